#ifndef HARTL_DATA_SPLIT_HPP_
#define HARTL_DATA_SPLIT_HPP_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hartl/data/preprocess.hpp"
#include "hartl/data/windows.hpp"

namespace hartl::data {

/// Which (subject, run) pairs feed each part of a source/target split.
struct SplitSpec {
  int source_subject = 3;
  int target_subject = 4;
  std::vector<std::string> source_train_runs;
  std::vector<std::string> source_val_runs;
  std::vector<std::string> target_train_runs;
  std::vector<std::string> target_test_runs;
  int window_length = 24;
  int window_stride = 12;

  /// Subject 3 ADL1-3+Drill -> subject 4, validated on S3 ADL4-5, tested on
  /// S4 ADL4-5.
  static SplitSpec paper_default() {
    SplitSpec s;
    s.source_train_runs = {"ADL1", "ADL2", "ADL3", "Drill"};
    s.source_val_runs = {"ADL4", "ADL5"};
    s.target_train_runs = {"ADL1", "ADL2", "ADL3", "Drill"};
    s.target_test_runs = {"ADL4", "ADL5"};
    return s;
  }

  bool empty() const {
    return source_train_runs.empty() && source_val_runs.empty() && target_train_runs.empty() &&
           target_test_runs.empty();
  }

  json to_json() const {
    return {{"source_subject", source_subject},       {"target_subject", target_subject},
            {"source_train_runs", source_train_runs}, {"source_val_runs", source_val_runs},
            {"target_train_runs", target_train_runs}, {"target_test_runs", target_test_runs},
            {"window_length", window_length},         {"window_stride", window_stride}};
  }

  static SplitSpec from_json(const json& j) {
    detail::reject_unknown_keys(j,
                                {"source_subject", "target_subject", "source_train_runs", "source_val_runs",
                                 "target_train_runs", "target_test_runs", "window_length", "window_stride"},
                                "split");
    SplitSpec s;
    s.source_subject = j.value("source_subject", s.source_subject);
    s.target_subject = j.value("target_subject", s.target_subject);
    s.source_train_runs = j.value("source_train_runs", std::vector<std::string>{});
    s.source_val_runs = j.value("source_val_runs", std::vector<std::string>{});
    s.target_train_runs = j.value("target_train_runs", std::vector<std::string>{});
    s.target_test_runs = j.value("target_test_runs", std::vector<std::string>{});
    s.window_length = j.value("window_length", s.window_length);
    s.window_stride = j.value("window_stride", s.window_stride);
    return s;
  }
};

/// Labelled source train/val, unlabelled target train, labelled target test.
/// Normalisation ranges are fitted on the source training runs only.
struct DomainSplit {
  WindowSet source_train;
  WindowSet source_val;
  UnlabeledWindowSet target_train;
  WindowSet target_test;
  ChannelRange normalization;
  SplitSpec spec;
};

namespace detail {

inline const SensorRecording* find_run(std::span<const SensorRecording> recs, int subject,
                                       const std::string& run) {
  for (const auto& r : recs) {
    if (r.subject_id == subject && r.run_id == run) return &r;
  }
  return nullptr;
}

}  // namespace detail

/// Interpolates and normalises the named runs and segments them. Used both by
/// `build_split` and by fine-tuning to obtain labelled target runs with the
/// same source-fitted normalisation.
inline WindowSet prepare_runs(std::span<const SensorRecording> recs, int subject,
                              const std::vector<std::string>& runs, const ChannelRange& range, int L, int S,
                              Domain domain, std::ostream* warn = &std::cerr) {
  WindowSet out;
  out.length = L;
  out.stride = S;
  for (const auto& run : runs) {
    const SensorRecording* r = detail::find_run(recs, subject, run);
    if (!r) throw ValidationError("missing run (" + std::to_string(subject) + ", " + run + ")");
    out.channels = r->channel_count();
    out.append(segment(apply_range(fill_missing(*r), range), L, S, true, domain, warn));
  }
  return out;
}

inline DomainSplit build_split(std::span<const SensorRecording> recs, const SplitSpec& spec,
                               const std::string& manifest_hash = {}, std::ostream* warn = &std::cerr) {
  if (spec.empty()) throw ValidationError("build_split: empty split specification");
  if (spec.source_train_runs.empty()) throw ValidationError("build_split: no source training runs");

  std::vector<std::string> absent;
  auto check = [&](int subject, const std::vector<std::string>& runs) {
    for (const auto& run : runs) {
      if (!detail::find_run(recs, subject, run)) {
        absent.push_back("(" + std::to_string(subject) + ", " + run + ")");
      }
    }
  };
  check(spec.source_subject, spec.source_train_runs);
  check(spec.source_subject, spec.source_val_runs);
  check(spec.target_subject, spec.target_train_runs);
  check(spec.target_subject, spec.target_test_runs);
  if (!absent.empty()) {
    std::string msg = "build_split: missing runs";
    for (const auto& a : absent) msg += " " + a;
    throw ValidationError(msg);
  }

  std::vector<SensorRecording> filled;
  for (const auto& run : spec.source_train_runs) {
    filled.push_back(fill_missing(*detail::find_run(recs, spec.source_subject, run)));
  }

  DomainSplit split;
  split.spec = spec;
  split.normalization = fit_range(filled);
  const int L = spec.window_length;
  const int S = spec.window_stride;
  split.source_train =
      prepare_runs(recs, spec.source_subject, spec.source_train_runs, split.normalization, L, S, Domain::kSource, warn);
  split.source_val =
      prepare_runs(recs, spec.source_subject, spec.source_val_runs, split.normalization, L, S, Domain::kSource, warn);
  split.target_train = UnlabeledWindowSet(
      prepare_runs(recs, spec.target_subject, spec.target_train_runs, split.normalization, L, S, Domain::kTarget, warn));
  split.target_test =
      prepare_runs(recs, spec.target_subject, spec.target_test_runs, split.normalization, L, S, Domain::kTarget, warn);
  for (WindowSet* ws : {&split.source_train, &split.source_val, &split.target_test}) {
    ws->manifest_hash = manifest_hash;
    ws->channels = recs.front().channel_count();
  }
  return split;
}

}  // namespace hartl::data

#endif  // HARTL_DATA_SPLIT_HPP_
