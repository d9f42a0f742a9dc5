#ifndef HARTL_HARNESS_CONFIG_HPP_
#define HARTL_HARNESS_CONFIG_HPP_

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hartl/data/recording.hpp"
#include "hartl/data/split.hpp"
#include "hartl/model/deepconvlstm.hpp"
#include "hartl/synthgen.hpp"
#include "hartl/train/config.hpp"
#include "hartl/train/trainers.hpp"

namespace hartl::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kDataRootEnv = "HARTL_DATA_ROOT";

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> m = {"baseline", "loss_weighted", "dann", "finetune", "kmm", "tradaboost"};
  return m;
}

inline bool is_network_method(const std::string& m) { return m != "kmm" && m != "tradaboost"; }

/// Collects validation problems so a bad config reports all of them at once.
class Problems {
 public:
  void add(std::string msg) { items_.push_back(std::move(msg)); }

  template <class Fn>
  void check(const std::string& where, Fn&& fn) {
    try {
      fn();
    } catch (const json::exception& e) {
      add(where + ": " + e.what());
    } catch (const Error& e) {
      add(where + ": " + e.what());
    }
  }

  bool empty() const { return items_.empty(); }

  void raise(const std::string& head) const {
    if (items_.empty()) return;
    std::string msg = head;
    for (const auto& i : items_) msg += "\n  - " + i;
    throw ValidationError(msg);
  }

 private:
  std::vector<std::string> items_;
};

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where,
                           Problems& p) {
  if (!j.is_object()) {
    p.add(where + ": expected an object");
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) p.add(where + ": unknown key '" + it.key() + "'");
  }
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

/// paper-default / custom read delimited recordings named by `file_pattern`
/// ({subject} and {run} are substituted) under the data root; synthetic
/// generates them from a shift spec.
struct SplitConfig {
  std::string kind = "synthetic";  // paper-default | synthetic | custom
  data::SplitSpec spec = data::SplitSpec::paper_default();
  // dataset
  std::string manifest;
  std::string data_root;  // empty: $HARTL_DATA_ROOT
  std::string file_pattern = "S{subject}-{run}.dat";
  // synthetic
  std::string fixture;
  std::optional<synth::ShiftSpec> shift;

  json to_json() const {
    json j = {{"kind", kind}};
    if (kind == "custom") j["spec"] = spec.to_json();
    if (kind != "synthetic") {
      j["manifest"] = manifest;
      if (!data_root.empty()) j["data_root"] = data_root;
      j["file_pattern"] = file_pattern;
    } else if (!fixture.empty()) {
      j["fixture"] = fixture;
    } else if (shift) {
      j["shift_spec"] = shift->to_json();
    }
    return j;
  }

  fs::path resolved_data_root() const {
    if (!data_root.empty()) return data_root;
    if (const char* env = std::getenv(kDataRootEnv)) return env;
    return {};
  }

  fs::path run_file(int subject, const std::string& run) const {
    std::string name = file_pattern;
    auto sub = [&](const std::string& key, const std::string& val) {
      for (auto pos = name.find(key); pos != std::string::npos; pos = name.find(key)) name.replace(pos, key.size(), val);
    };
    sub("{subject}", std::to_string(subject));
    sub("{run}", run);
    return resolved_data_root() / name;
  }
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string name = "experiment";
  SplitConfig split;
  std::string method = "baseline";
  json params = json::object();
  model::ModelSpec model;
  train::TrainConfig train;
  std::string output_dir = "runs";
  fs::path base_dir;  // directory relative paths resolve against; not serialized

  json to_json() const {
    json j = {{"schema_version", schema_version},
              {"name", name},
              {"method", method},
              {"params", params},
              {"output_dir", output_dir}};
    if (is_network_method(method)) {
      j["split"] = split.to_json();
      j["model"] = model.to_json();
      j["train"] = train.to_json();
    }
    return j;
  }

  /// Content hash over the canonical config and the code version.
  std::string hash() const {
    const std::string shift = split.shift ? split.shift->to_json().dump() : std::string();
    return sha256_hex(to_json().dump() + "\n" + shift + "\n" + std::string(kVersion));
  }

  fs::path resolve(const std::string& p) const {
    fs::path q(p);
    return q.is_absolute() || base_dir.empty() ? q : base_dir / q;
  }
};

namespace detail {

inline void parse_method_params(const std::string& method, const json& p, Problems& probs) {
  auto unknown = [&](const std::set<std::string>& allowed) { reject_unknown(p, allowed, "params", probs); };
  if (method == "baseline") {
    unknown({});
  } else if (method == "loss_weighted") {
    unknown({"kappa", "scorer"});
    probs.check("params.kappa", [&] {
      if (!(p.value("kappa", 2.0) >= 0.0)) throw ValidationError("must be >= 0");
    });
    if (p.contains("scorer")) probs.check("params.scorer", [&] { train::TrainConfig::from_json(p.at("scorer")); });
  } else if (method == "dann") {
    unknown({"schedule", "initial_lambda", "fixed_lambda", "ganin_gamma", "controller", "head"});
    probs.check("params.schedule", [&] { train::parse_schedule(p.value("schedule", std::string("adaptive"))); });
    if (p.contains("controller")) {
      probs.check("params.controller", [&] {
        const json& c = p.at("controller");
        data::detail::reject_unknown_keys(
            c, {"acc_max", "acc_min", "lambda_max", "lambda_mid", "lambda_min", "alpha", "beta"}, "controller");
      });
    }
    if (p.contains("head")) {
      probs.check("params.head", [&] {
        data::detail::reject_unknown_keys(p.at("head"), {"attach_point", "recurrent_units"}, "head");
      });
    }
  } else if (method == "finetune") {
    unknown({"source_checkpoint", "source_train", "frozen", "restore", "tuning_runs", "val_fraction"});
    if (p.contains("source_train")) {
      probs.check("params.source_train", [&] { train::TrainConfig::from_json(p.at("source_train")); });
    }
    probs.check("params.val_fraction", [&] {
      const double f = p.value("val_fraction", 0.2);
      if (!(f > 0.0 && f < 1.0)) throw ValidationError("must lie in (0, 1)");
    });
    probs.check("params.tuning_runs", [&] {
      if (p.value("tuning_runs", std::vector<std::string>{"ADL3"}).empty()) throw ValidationError("must not be empty");
    });
  } else if (method == "kmm") {
    unknown({"source", "target", "sigma", "B", "eps"});
    if (!p.contains("source") || !p.contains("target")) probs.add("params: kmm needs 'source' and 'target' files");
  } else if (method == "tradaboost") {
    unknown({"source", "target", "test", "rounds"});
    if (!p.contains("source") || !p.contains("target") || !p.contains("test")) {
      probs.add("params: tradaboost needs 'source', 'target' and 'test' files");
    }
  }
}

}  // namespace detail

/// Parses and validates; every problem found is listed in one error.
inline ExperimentConfig parse_config(const json& j, const fs::path& base_dir = {}) {
  Problems probs;
  ExperimentConfig c;
  c.base_dir = base_dir;
  reject_unknown(j, {"schema_version", "name", "split", "method", "params", "model", "train", "output_dir"}, "config",
                 probs);
  probs.raise("invalid config");

  probs.check("schema_version", [&] {
    c.schema_version = j.value("schema_version", 0);
    if (c.schema_version != kSchemaVersion) {
      throw ValidationError("unsupported version " + std::to_string(c.schema_version) + " (expected " +
                            std::to_string(kSchemaVersion) + ")");
    }
  });
  probs.check("name", [&] {
    c.name = j.value("name", c.name);
    if (c.name.empty() || c.name.find_first_of("/\\ ") != std::string::npos) {
      throw ValidationError("must be non-empty without spaces or slashes");
    }
  });
  probs.check("method", [&] {
    c.method = j.at("method").get<std::string>();
    if (std::find(method_names().begin(), method_names().end(), c.method) == method_names().end()) {
      throw ValidationError("unknown method '" + c.method + "'");
    }
  });
  c.params = j.value("params", json::object());
  if (probs.empty()) detail::parse_method_params(c.method, c.params, probs);
  c.output_dir = j.value("output_dir", c.output_dir);

  if (!probs.empty()) probs.raise("invalid config");
  if (!is_network_method(c.method)) {
    for (const char* k : {"split", "model", "train"}) {
      if (j.contains(k)) probs.add(std::string(k) + ": not used by " + c.method);
    }
    probs.raise("invalid config");
    return c;
  }

  std::optional<json> fixture_json;
  probs.check("split", [&] {
    const json& s = j.value("split", json::object());
    Problems local;
    reject_unknown(s, {"kind", "spec", "manifest", "data_root", "file_pattern", "fixture", "shift_spec"}, "split",
                   local);
    local.raise("split");
    auto& sc = c.split;
    sc.kind = s.value("kind", std::string("synthetic"));
    if (sc.kind != "paper-default" && sc.kind != "synthetic" && sc.kind != "custom") {
      throw ValidationError("unknown kind '" + sc.kind + "'");
    }
    if (s.contains("spec")) {
      if (sc.kind == "paper-default") throw ValidationError("paper-default takes no 'spec'");
      sc.spec = data::SplitSpec::from_json(s.at("spec"));
    } else if (sc.kind == "custom") {
      throw ValidationError("custom split needs a 'spec'");
    }
    if (sc.kind == "synthetic") {
      if (s.contains("fixture") == s.contains("shift_spec")) {
        throw ValidationError("synthetic split needs exactly one of 'fixture' or 'shift_spec'");
      }
      if (s.contains("fixture")) {
        sc.fixture = s.at("fixture").get<std::string>();
        fixture_json = read_json(c.resolve(sc.fixture));
        sc.shift = synth::ShiftSpec::from_json(fixture_json->at("shift_spec"));
      } else {
        sc.shift = synth::ShiftSpec::from_json(s.at("shift_spec"));
      }
    } else {
      if (!s.contains("manifest")) throw ValidationError("dataset splits need a 'manifest'");
      sc.manifest = s.at("manifest").get<std::string>();
      sc.data_root = s.value("data_root", std::string());
      sc.file_pattern = s.value("file_pattern", sc.file_pattern);
    }
  });
  probs.check("model", [&] {
    if (j.contains("model")) c.model = model::ModelSpec::from_json(j.at("model"));
    else if (fixture_json && fixture_json->contains("model")) c.model = model::ModelSpec::from_json(fixture_json->at("model"));
    c.model.input_length = c.split.spec.window_length;
    c.model.validate();
  });
  probs.check("train", [&] {
    const auto base = c.method == "finetune" ? train::TrainConfig::finetune_default() : train::TrainConfig{};
    c.train = train::TrainConfig::from_json(j.value("train", json::object()), base);
  });
  probs.raise("invalid config");
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  return parse_config(read_json(path), path.parent_path());
}

/// Sets a dotted path ("params.kappa", "train.seed") in a config document.
/// Intermediate objects must already exist or be creatable under known keys;
/// schema validation of the result happens in `parse_config`.
inline void set_path(json& doc, const std::string& dotted, const json& value) {
  json* cur = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ValidationError("bad parameter path '" + dotted + "'");
    if (!cur->is_object()) throw ValidationError("parameter path '" + dotted + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    if (cur->is_null()) *cur = json::object();
    start = dot + 1;
  }
}

}  // namespace hartl::harness

#endif  // HARTL_HARNESS_CONFIG_HPP_
