#ifndef HARTL_DATA_PREPROCESS_HPP_
#define HARTL_DATA_PREPROCESS_HPP_

#include <algorithm>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hartl/data/recording.hpp"

namespace hartl::data {

/// Per-channel observed range; `valid[c]` is false for channels that never
/// had a finite value.
struct ChannelRange {
  Vector lo;
  Vector hi;
  std::vector<bool> valid;
};

/// Linear interpolation of NaN gaps along time. Leading and trailing gaps take
/// the nearest valid value. A channel with no valid value is masked and
/// zero-filled; its index is appended to `masked` when provided.
inline SensorRecording fill_missing(SensorRecording rec, std::vector<int>* masked = nullptr) {
  const int T = rec.length();
  const int C = rec.channel_count();
  if (rec.channel_mask.size() != static_cast<std::size_t>(C)) rec.channel_mask.assign(C, true);
  for (int c = 0; c < C; ++c) {
    auto col = rec.channels.col(c);
    int prev = -1;
    for (int t = 0; t < T; ++t) {
      if (is_missing(col(t))) continue;
      if (prev < 0) {
        for (int u = 0; u < t; ++u) col(u) = col(t);
      } else if (t - prev > 1) {
        const double a = col(prev);
        const double b = col(t);
        const double span = t - prev;
        for (int u = prev + 1; u < t; ++u) col(u) = a + (b - a) * ((u - prev) / span);
      }
      prev = t;
    }
    if (prev < 0) {
      rec.channel_mask[c] = false;
      col.setZero();
      if (masked) masked->push_back(c);
    } else {
      for (int u = prev + 1; u < T; ++u) col(u) = col(prev);
    }
  }
  return rec;
}

/// Min/max per channel over every finite value in `recs`.
inline ChannelRange fit_range(std::span<const SensorRecording> recs) {
  if (recs.empty()) throw ValidationError("fit_range: no recordings");
  const int C = recs.front().channel_count();
  ChannelRange r;
  r.lo = Vector::Constant(C, std::numeric_limits<double>::infinity());
  r.hi = Vector::Constant(C, -std::numeric_limits<double>::infinity());
  r.valid.assign(C, false);
  for (const auto& rec : recs) {
    if (rec.channel_count() != C) throw DimensionError("fit_range: channel count differs between recordings");
    for (int c = 0; c < C; ++c) {
      if (!rec.channel_mask.empty() && !rec.channel_mask[c]) continue;
      for (int t = 0; t < rec.length(); ++t) {
        const double v = rec.channels(t, c);
        if (is_missing(v)) continue;
        r.lo(c) = std::min(r.lo(c), v);
        r.hi(c) = std::max(r.hi(c), v);
        r.valid[c] = true;
      }
    }
  }
  return r;
}

/// Affine map of each channel so that range.lo -> -1 and range.hi -> +1.
/// Values outside the fitted range (other runs) are clamped into [-1, 1].
/// Constant channels map to 0. When the range is already exactly [-1, 1] the
/// map is the identity, which makes the operation a fixed point.
inline SensorRecording apply_range(SensorRecording rec, const ChannelRange& range) {
  const int C = rec.channel_count();
  if (range.lo.size() != C) throw DimensionError("apply_range: channel count mismatch");
  if (rec.channel_mask.size() != static_cast<std::size_t>(C)) rec.channel_mask.assign(C, true);
  for (int c = 0; c < C; ++c) {
    auto col = rec.channels.col(c);
    if (!range.valid[c] || !rec.channel_mask[c]) {
      rec.channel_mask[c] = false;
      col.setZero();
      continue;
    }
    const double lo = range.lo(c);
    const double hi = range.hi(c);
    if (hi == lo) {
      col.setZero();
      continue;
    }
    const double mid2 = hi + lo;
    const double width = hi - lo;
    for (int t = 0; t < col.size(); ++t) {
      const double x = col(t);
      double y;
      if (x <= lo) {
        y = -1.0;
      } else if (x >= hi) {
        y = 1.0;
      } else {
        y = std::clamp((2.0 * x - mid2) / width, -1.0, 1.0);
      }
      col(t) = y;
    }
  }
  return rec;
}

/// Interpolate, then rescale using the recording's own range.
inline SensorRecording clean_and_normalize(SensorRecording rec, std::vector<int>* masked = nullptr) {
  rec = fill_missing(std::move(rec), masked);
  const ChannelRange range = fit_range(std::span<const SensorRecording>(&rec, 1));
  return apply_range(std::move(rec), range);
}

}  // namespace hartl::data

#endif  // HARTL_DATA_PREPROCESS_HPP_
