#ifndef HARTL_HARNESS_RUNNER_HPP_
#define HARTL_HARNESS_RUNNER_HPP_

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "hartl/classical/kmm.hpp"
#include "hartl/classical/tradaboost.hpp"
#include "hartl/harness/config.hpp"
#include "hartl/harness/record_io.hpp"
#include "hartl/model/snapshot.hpp"
#include "hartl/train/trainers.hpp"

namespace hartl::harness {

// ---------------------------------------------------------------------------
// data

struct LoadedData {
  std::vector<data::SensorRecording> recordings;
  std::string manifest_hash;
  std::string split_hash;
  int channels = 0;
  int n_classes = 0;
};

/// Every (subject, run) a config will read, including fine-tuning runs.
inline std::vector<std::pair<int, std::string>> required_runs(const ExperimentConfig& c) {
  std::vector<std::pair<int, std::string>> out;
  auto add = [&](int s, const std::vector<std::string>& runs) {
    for (const auto& r : runs) {
      if (std::find(out.begin(), out.end(), std::pair{s, r}) == out.end()) out.emplace_back(s, r);
    }
  };
  const auto& sp = c.split.spec;
  add(sp.source_subject, sp.source_train_runs);
  add(sp.source_subject, sp.source_val_runs);
  add(sp.target_subject, sp.target_train_runs);
  add(sp.target_subject, sp.target_test_runs);
  if (c.method == "finetune") {
    add(sp.target_subject, c.params.value("tuning_runs", std::vector<std::string>{"ADL3"}));
  }
  return out;
}

/// Checks that the data a config needs exists, before anything is trained.
inline void check_data_available(const ExperimentConfig& c) {
  if (!is_network_method(c.method) || c.split.kind == "synthetic") return;
  Problems probs;
  const fs::path manifest = c.resolve(c.split.manifest);
  if (!fs::exists(manifest)) probs.add("manifest not found: " + manifest.string());
  if (c.split.resolved_data_root().empty()) {
    probs.add(std::string("no dataset root: set split.data_root or ") + kDataRootEnv);
  } else {
    for (const auto& [s, r] : required_runs(c)) {
      const fs::path f = c.split.run_file(s, r);
      if (!fs::exists(f)) probs.add("missing recording for (" + std::to_string(s) + ", " + r + "): " + f.string());
    }
  }
  probs.raise("dataset unavailable");
}

inline LoadedData load_data(const ExperimentConfig& c) {
  check_data_available(c);
  LoadedData d;
  if (c.split.kind == "synthetic") {
    const auto& shift = *c.split.shift;
    d.recordings = synth::generate_subjects(shift, c.split.spec.source_subject, c.split.spec.target_subject);
    d.manifest_hash = sha256_hex(synth::synthetic_manifest(shift).dump());
    d.split_hash = sha256_hex(json{{"kind", "synthetic"}, {"spec", c.split.spec.to_json()}, {"shift", shift.to_json()}}.dump());
    d.channels = shift.n_channels;
    d.n_classes = shift.n_classes;
  } else {
    const auto manifest = data::load_manifest(c.resolve(c.split.manifest));
    for (const auto& [s, r] : required_runs(c)) {
      d.recordings.push_back(data::load_recording(c.split.run_file(s, r), manifest, s, r));
    }
    d.manifest_hash = manifest.hash();
    d.split_hash = sha256_hex(json{{"kind", "dataset"}, {"spec", c.split.spec.to_json()}, {"manifest", d.manifest_hash}}.dump());
    d.channels = static_cast<int>(manifest.channel_columns.size());
    d.n_classes = manifest.labels.class_count();
  }
  if (c.model.channels != d.channels) {
    throw DimensionError("model expects " + std::to_string(c.model.channels) + " channels, data has " +
                         std::to_string(d.channels));
  }
  if (c.model.n_classes != d.n_classes) {
    throw DimensionError("model expects " + std::to_string(c.model.n_classes) + " classes, data has " +
                         std::to_string(d.n_classes));
  }
  return d;
}

/// Plain text sample matrix: one row per line, whitespace or comma separated.
inline Matrix read_samples(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open sample file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(path.string(), n, "not a number: '" + tok + "'");
      }
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path.string(), n, "expected " + std::to_string(rows.front().size()) + " columns, found " +
                                             std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("sample file " + path.string() + " is empty");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

/// Splits off the last column as 0/1 labels.
inline std::pair<Matrix, std::vector<int>> split_labels(const Matrix& m, const std::string& what) {
  if (m.cols() < 2) throw ValidationError(what + ": need at least one feature column and a label column");
  std::vector<int> y(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double v = m(i, m.cols() - 1);
    if (v != 0.0 && v != 1.0) throw ValidationError(what + ": labels must be 0 or 1");
    y[i] = static_cast<int>(v);
  }
  return {m.leftCols(m.cols() - 1), y};
}

// ---------------------------------------------------------------------------
// methods

struct MethodOutcome {
  std::optional<train::TrainResult> train;
  std::optional<model::ParameterSnapshot> source_checkpoint;  // fine-tuning
  json artifacts = json::object();                           // extra per-method results
};

using Progress = train::RowCallback;

inline train::DannOptions dann_options(const json& p) {
  train::DannOptions o;
  o.schedule = train::parse_schedule(p.value("schedule", std::string("adaptive")));
  o.initial_lambda = p.value("initial_lambda", o.initial_lambda);
  o.fixed_lambda = p.value("fixed_lambda", o.fixed_lambda);
  o.ganin_gamma = p.value("ganin_gamma", o.ganin_gamma);
  if (p.contains("controller")) {
    const json& c = p.at("controller");
    auto& k = o.controller;
    k.acc_max = c.value("acc_max", k.acc_max);
    k.acc_min = c.value("acc_min", k.acc_min);
    k.lambda_max = c.value("lambda_max", k.lambda_max);
    k.lambda_mid = c.value("lambda_mid", k.lambda_mid);
    k.lambda_min = c.value("lambda_min", k.lambda_min);
    k.alpha = c.value("alpha", k.alpha);
    k.beta = c.value("beta", k.beta);
    k.validate();
  }
  return o;
}

inline model::DannHeadSpec dann_head(const json& p) {
  model::DannHeadSpec h;
  if (p.contains("head")) {
    h.attach_point = p.at("head").value("attach_point", h.attach_point);
    h.recurrent_units = p.at("head").value("recurrent_units", h.recurrent_units);
  }
  return h;
}

/// `source` (fine-tuning only) overrides params.source_checkpoint.
inline MethodOutcome run_network_method(const ExperimentConfig& c, const LoadedData& d, const Progress& cb,
                                        const model::ParameterSnapshot* source_override = nullptr) {
  const auto split = data::build_split(d.recordings, c.split.spec, d.manifest_hash);
  const auto& p = c.params;
  MethodOutcome out;
  if (c.method == "baseline") {
    out.train = train::train_baseline(split, c.model, c.train, cb);
  } else if (c.method == "loss_weighted") {
    const auto scorer = p.contains("scorer") ? train::TrainConfig::from_json(p.at("scorer")) : c.train;
    auto r = train::train_loss_weighted(split, c.model, c.train, p.value("kappa", 2.0), scorer, cb);
    out.artifacts["scorer_heldout_accuracy"] = r.scorer_heldout_accuracy;
    out.artifacts["instance_weights"] = r.weights;
    out.train = std::move(r.train);
  } else if (c.method == "dann") {
    auto r = train::train_dann(split, c.model, dann_head(p), c.train, dann_options(p), cb);
    out.train = std::move(r.train);
  } else if (c.method == "finetune") {
    const auto tuning_runs = p.value("tuning_runs", std::vector<std::string>{"ADL3"});
    for (const auto& r : tuning_runs) {
      const auto& test = c.split.spec.target_test_runs;
      if (std::find(test.begin(), test.end(), r) != test.end()) {
        throw ValidationError("finetune: tuning run " + r + " is also a target test run");
      }
    }
    model::ParameterSnapshot source;
    if (source_override) {
      source = *source_override;
    } else if (p.contains("source_checkpoint")) {
      source = model::load_snapshot(c.resolve(p.at("source_checkpoint").get<std::string>()));
    } else {
      const auto src_cfg = p.contains("source_train") ? train::TrainConfig::from_json(p.at("source_train"))
                                                      : train::TrainConfig{};
      source = train::train_baseline(split, c.model, src_cfg).best;
      out.source_checkpoint = source;
    }
    const auto tune = data::prepare_runs(d.recordings, c.split.spec.target_subject, tuning_runs,
                                         split.normalization, c.split.spec.window_length,
                                         c.split.spec.window_stride, data::Domain::kTarget);
    // contiguous tail of the tuning windows selects the checkpoint
    const double vf = p.value("val_fraction", 0.2);
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(vf * tune.size())));
    if (tune.size() <= n_val) throw ValidationError("finetune: too few tuning windows for a validation slice");
    data::WindowSet fit = tune, val = tune;
    fit.windows.assign(tune.windows.begin(), tune.windows.end() - n_val);
    val.windows.assign(tune.windows.end() - n_val, tune.windows.end());
    train::FinetuneOptions o;
    o.frozen = p.value("frozen", std::vector<std::string>{"conv1", "conv2"});
    o.restore_groups = p.value("restore", std::vector<std::string>{});
    out.train = train::finetune(source, c.model, fit, val, split.target_test, o, c.train, cb);
    out.artifacts["tuning_windows"] = fit.size();
    out.artifacts["selection_windows"] = val.size();
  } else {
    throw ValidationError("not a network method: " + c.method);
  }
  return out;
}

inline MethodOutcome run_classical_method(const ExperimentConfig& c) {
  const auto& p = c.params;
  MethodOutcome out;
  if (c.method == "kmm") {
    const Matrix xs = read_samples(c.resolve(p.at("source").get<std::string>()));
    const Matrix xt = read_samples(c.resolve(p.at("target").get<std::string>()));
    std::optional<double> eps;
    if (p.contains("eps") && !p.at("eps").is_null()) eps = p.at("eps").get<double>();
    const auto r = classical::kmm_weights(xs, xt, p.value("sigma", 0.0), p.value("B", 1000.0), eps);
    out.artifacts = {{"beta", std::vector<double>(r.beta.data(), r.beta.data() + r.beta.size())},
                     {"objective", r.objective},
                     {"sigma", r.sigma},
                     {"eps", r.eps},
                     {"iterations", r.iterations}};
  } else if (c.method == "tradaboost") {
    const auto [xs, ys] = split_labels(read_samples(c.resolve(p.at("source").get<std::string>())), "source");
    const auto [xt, yt] = split_labels(read_samples(c.resolve(p.at("target").get<std::string>())), "target");
    const auto [xe, ye] = split_labels(read_samples(c.resolve(p.at("test").get<std::string>())), "test");
    const int rounds = p.value("rounds", 20);
    const auto r = classical::tradaboost(xs, ys, xt, yt, rounds);
    auto accuracy = [&](const std::vector<int>& pred) {
      int ok = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == ye[i];
      return static_cast<double>(ok) / static_cast<double>(ye.size());
    };
    out.artifacts = r.to_json();
    if (!r.rounds.empty()) out.artifacts["test_accuracy"] = accuracy(r.predict(xe));
    const auto stump = classical::fit_stump(xs, ys, std::vector<double>(ys.size(), 1.0));
    std::vector<int> sp(xe.rows());
    for (Eigen::Index i = 0; i < xe.rows(); ++i) sp[i] = stump.predict(RowVector(xe.row(i)));
    out.artifacts["source_only_stump_accuracy"] = accuracy(sp);
  } else {
    throw ValidationError("not a classical method: " + c.method);
  }
  return out;
}

// ---------------------------------------------------------------------------
// run

struct RunRef {
  fs::path dir;
  std::string run_id;
  std::string config_hash;
};

/// Same config with every relative path made absolute, so the copy stored
/// with a run reproduces it from anywhere.
inline ExperimentConfig absolutized(ExperimentConfig c) {
  auto abs = [&](std::string& s) {
    if (!s.empty()) s = fs::absolute(c.resolve(s)).lexically_normal().string();
  };
  abs(c.split.fixture);
  abs(c.split.manifest);
  abs(c.split.data_root);
  for (const char* k : {"source", "target", "test", "source_checkpoint"}) {
    if (c.params.contains(k)) {
      std::string s = c.params[k].get<std::string>();
      abs(s);
      c.params[k] = s;
    }
  }
  c.base_dir.clear();
  return c;
}

inline std::string next_run_id(const fs::path& out_dir, const std::string& name, const std::string& hash) {
  const std::string prefix = name + "-" + hash.substr(0, 12) + "-";
  int seq = 1;
  if (fs::exists(out_dir)) {
    for (const auto& e : fs::directory_iterator(out_dir)) {
      const std::string f = e.path().filename().string();
      if (f.rfind(prefix, 0) == 0) {
        try {
          seq = std::max(seq, std::stoi(f.substr(prefix.size())) + 1);
        } catch (const std::exception&) {
        }
      }
    }
  }
  std::ostringstream id;
  id << prefix << std::setw(3) << std::setfill('0') << seq;
  return id.str();
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << s;
}

/// Runs one experiment. Outputs are built in a private temporary directory
/// and renamed into place; a failed run is still moved into place but carries
/// an INCOMPLETE marker with the error.
inline RunRef run(const ExperimentConfig& cfg_in, const Progress& cb = {}, std::ostream* log = nullptr) {
  const ExperimentConfig cfg = absolutized(cfg_in);
  const std::string hash = cfg.hash();
  const fs::path out_dir = cfg_in.resolve(cfg.output_dir);

  // fail fast: all data checks happen before any output or training
  LoadedData data;
  if (is_network_method(cfg.method)) data = load_data(cfg);

  fs::create_directories(out_dir);
  const std::string run_id = next_run_id(out_dir, cfg.name, hash);
  const fs::path tmp = out_dir / (".tmp-" + run_id + "-" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  const fs::path final_dir = out_dir / run_id;

  json run_meta = {{"run_id", run_id},
                   {"config_hash", hash},
                   {"method", cfg.method},
                   {"name", cfg.name},
                   {"code_version", std::string(kVersion)},
                   {"reproduce", "hartl train --config " + (final_dir / "config.json").string()}};
  if (is_network_method(cfg.method)) run_meta["split_hash"] = data.split_hash;
  write_text(tmp / "config.json", cfg.to_json().dump(2) + "\n");
  write_text(tmp / "reproduce.sh", "#!/bin/sh\n# config " + hash + "\n" + run_meta["reproduce"].get<std::string>() + "\n");
  fs::permissions(tmp / "reproduce.sh", fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                  fs::perm_options::add);

  try {
    MethodOutcome outcome = is_network_method(cfg.method) ? run_network_method(cfg, data, cb) : run_classical_method(cfg);
    if (outcome.train) {
      auto& rec = outcome.train->record;
      rec.config_hash = hash;
      rec.best_checkpoint = "best.snapshot";
      auto best = outcome.train->best;
      best.meta["config_hash"] = hash;
      best.meta["iteration"] = rec.best_iteration;
      model::save_snapshot(tmp / "best.snapshot", best);
      write_text(tmp / "record.jsonl", encode_record(rec, data.split_hash));
      run_meta["best_iteration"] = rec.best_iteration;
      run_meta["best_val_f1"] = rec.best_val_f1;
      run_meta["max_target_f1"] = rec.max_target_f1();
      run_meta["target_f1_at_best_val"] = rec.best_row().target_f1;
    }
    if (outcome.source_checkpoint) {
      auto src = *outcome.source_checkpoint;
      src.meta["config_hash"] = hash;
      model::save_snapshot(tmp / "source.snapshot", src);
    }
    if (!outcome.artifacts.empty()) {
      json a = outcome.artifacts;
      a["config_hash"] = hash;
      write_text(tmp / "result.json", a.dump(2) + "\n");
    }
    run_meta["status"] = "complete";
    write_text(tmp / "run.json", run_meta.dump(2) + "\n");
  } catch (const std::exception& e) {
    run_meta["status"] = "incomplete";
    run_meta["error"] = e.what();
    write_text(tmp / "run.json", run_meta.dump(2) + "\n");
    write_text(tmp / "INCOMPLETE", std::string(e.what()) + "\n");
    fs::rename(tmp, final_dir);
    if (log) *log << "run " << run_id << " failed; partial outputs in " << final_dir.string() << "\n";
    throw;
  }
  fs::rename(tmp, final_dir);
  if (log) *log << "run " << run_id << " -> " << final_dir.string() << "\n";
  return {final_dir, run_id, hash};
}

}  // namespace hartl::harness

#endif  // HARTL_HARNESS_RUNNER_HPP_
