#ifndef HARTL_DATA_WINDOWS_HPP_
#define HARTL_DATA_WINDOWS_HPP_

#include <iostream>
#include <string>
#include <vector>

#include "hartl/data/recording.hpp"

namespace hartl::data {

enum class Domain : std::uint8_t { kSource = 0, kTarget = 1 };

inline const char* to_string(Domain d) { return d == Domain::kSource ? "source" : "target"; }

struct WindowOrigin {
  int subject_id = 0;
  std::string run_id;
  int start = 0;

  bool operator==(const WindowOrigin&) const = default;
};

/// Fixed-length slice of a recording, labelled by its last instance.
struct Window {
  Matrix values;  // L x C
  int label = kNullClass;
  Domain domain = Domain::kSource;
  WindowOrigin origin;
};

struct WindowSet {
  std::vector<Window> windows;
  int length = 24;
  int stride = 12;
  int channels = 0;
  std::string manifest_hash;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(w.label);
    return out;
  }

  void append(const WindowSet& other) {
    if (!other.empty() && !empty() && (other.length != length || other.channels != channels)) {
      throw DimensionError("WindowSet::append: window shape mismatch");
    }
    if (empty()) {
      length = other.length;
      stride = other.stride;
      channels = other.channels;
      if (manifest_hash.empty()) manifest_hash = other.manifest_hash;
    }
    windows.insert(windows.end(), other.windows.begin(), other.windows.end());
  }
};

/// Unlabelled view handed to domain-adaptation trainers: carries sensor
/// values and provenance but no activity labels.
class UnlabeledWindowSet {
 public:
  UnlabeledWindowSet() = default;

  explicit UnlabeledWindowSet(const WindowSet& labeled)
      : length_(labeled.length), channels_(labeled.channels) {
    values_.reserve(labeled.size());
    origins_.reserve(labeled.size());
    for (const auto& w : labeled.windows) {
      values_.push_back(w.values);
      origins_.push_back(w.origin);
    }
  }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  int length() const { return length_; }
  int channels() const { return channels_; }
  const Matrix& values(std::size_t i) const { return values_.at(i); }
  const WindowOrigin& origin(std::size_t i) const { return origins_.at(i); }

 private:
  std::vector<Matrix> values_;
  std::vector<WindowOrigin> origins_;
  int length_ = 0;
  int channels_ = 0;
};

/// Number of windows a sliding segmentation produces before null filtering.
inline int window_count(int T, int L, int S) {
  if (L <= 0 || S <= 0 || L > T) return 0;
  return (T - L) / S + 1;
}

/// Sliding-window segmentation. Windows start at 0, S, 2S, ... while
/// start + L <= T. A window whose final instance is null is dropped when
/// `drop_null` is set. L > T yields an empty set and a warning.
inline WindowSet segment(const SensorRecording& rec, int L, int S, bool drop_null = true,
                         Domain domain = Domain::kSource, std::ostream* warn = &std::cerr) {
  if (L < 1) throw ValidationError("segment: window length must be >= 1");
  if (S < 1) throw ValidationError("segment: stride must be >= 1");
  if (static_cast<std::size_t>(rec.length()) != rec.labels.size()) {
    throw DimensionError("segment: channels rows != labels length");
  }
  WindowSet out;
  out.length = L;
  out.stride = S;
  out.channels = rec.channel_count();
  const int T = rec.length();
  if (L > T) {
    if (warn) {
      *warn << "warning: run " << rec.subject_id << "/" << rec.run_id << " has " << T
            << " instances, shorter than window length " << L << "\n";
    }
    return out;
  }
  for (int start = 0; start + L <= T; start += S) {
    const int label = rec.labels[start + L - 1];
    if (drop_null && label == kNullClass) continue;
    Window w;
    w.values = rec.channels.middleRows(start, L);
    w.label = label;
    w.domain = domain;
    w.origin = {rec.subject_id, rec.run_id, start};
    out.windows.push_back(std::move(w));
  }
  return out;
}

}  // namespace hartl::data

#endif  // HARTL_DATA_WINDOWS_HPP_
