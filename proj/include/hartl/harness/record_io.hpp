#ifndef HARTL_HARNESS_RECORD_IO_HPP_
#define HARTL_HARNESS_RECORD_IO_HPP_

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hartl/train/config.hpp"

namespace hartl::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// JSON lines: a header, one line per evaluation row, a summary.
inline std::string encode_record(const train::RunRecord& r, const std::string& split_hash) {
  std::ostringstream out;
  out << json{{"type", "header"},
              {"method", r.method},
              {"config_hash", r.config_hash},
              {"split_hash", split_hash},
              {"trainer_config", r.config},
              {"code_version", std::string(kVersion)}}
             .dump()
      << "\n";
  for (const auto& row : r.rows) {
    json j = row.to_json();
    j["type"] = "row";
    out << j.dump() << "\n";
  }
  out << json{{"type", "summary"},
              {"best_iteration", r.best_iteration},
              {"best_val_f1", r.best_val_f1},
              {"best_checkpoint", r.best_checkpoint},
              {"max_target_f1", r.max_target_f1()}}
             .dump()
      << "\n";
  return out.str();
}

struct LoadedRecord {
  train::RunRecord record;
  std::string split_hash;
};

inline LoadedRecord decode_record(std::istream& in, const std::string& where) {
  LoadedRecord out;
  std::string line;
  int n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where, n, e.what());
    }
    const std::string type = j.value("type", std::string());
    if (type == "header") {
      out.record.method = j.at("method").get<std::string>();
      out.record.config_hash = j.at("config_hash").get<std::string>();
      out.split_hash = j.value("split_hash", std::string());
      out.record.config = j.value("trainer_config", json::object());
      header = true;
    } else if (type == "row") {
      out.record.add(train::RunRow::from_json(j));
    } else if (type == "summary") {
      out.record.best_iteration = j.at("best_iteration").get<int>();
      out.record.best_val_f1 = j.at("best_val_f1").get<double>();
      out.record.best_checkpoint = j.value("best_checkpoint", std::string());
    } else {
      throw ParseError(where, n, "unknown line type '" + type + "'");
    }
  }
  if (!header) throw ParseError(where, 0, "missing header line");
  return out;
}

inline LoadedRecord load_record(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("no run record at " + path.string());
  return decode_record(in, path.string());
}

}  // namespace hartl::harness

#endif  // HARTL_HARNESS_RECORD_IO_HPP_
