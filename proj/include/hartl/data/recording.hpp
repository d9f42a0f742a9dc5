#ifndef HARTL_DATA_RECORDING_HPP_
#define HARTL_DATA_RECORDING_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hartl/common.hpp"

namespace hartl::data {

using json = nlohmann::json;

inline constexpr int kNullClass = 0;

/// One subject-run: raw multichannel time series plus per-instant class ids.
/// Missing sensor values are stored as quiet NaN until cleaning.
struct SensorRecording {
  int subject_id = 0;
  std::string run_id;
  double sample_rate = 30.0;
  Matrix channels;                 // T x C
  std::vector<int> labels;         // T, 0 = null
  std::vector<bool> channel_mask;  // true = usable channel
  std::vector<std::string> channel_names;

  int length() const { return static_cast<int>(channels.rows()); }
  int channel_count() const { return static_cast<int>(channels.cols()); }
};

inline bool is_missing(double v) { return std::isnan(v); }

/// Raw dataset label code -> contiguous class id 1..K with display names.
class LabelMap {
 public:
  struct Entry {
    std::int64_t code;
    int id;
    std::string name;
  };

  LabelMap() = default;

  LabelMap(std::vector<Entry> entries, std::set<std::int64_t> null_codes)
      : entries_(std::move(entries)), null_codes_(std::move(null_codes)) {
    std::set<int> ids;
    for (const auto& e : entries_) {
      if (!by_code_.emplace(e.code, e.id).second) {
        throw MappingError("label map: duplicate raw code " + std::to_string(e.code));
      }
      if (null_codes_.count(e.code)) {
        throw MappingError("label map: code " + std::to_string(e.code) + " is both null and a gesture");
      }
      if (!ids.insert(e.id).second) {
        throw MappingError("label map: class id " + std::to_string(e.id) + " assigned twice");
      }
    }
    for (int k = 1; k <= static_cast<int>(ids.size()); ++k) {
      if (!ids.count(k)) {
        throw MappingError("label map: class ids must be contiguous 1..K, missing " + std::to_string(k));
      }
    }
  }

  int class_count() const { return static_cast<int>(entries_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }

  /// Class id for a raw code; null codes map to 0.
  int map(std::int64_t code) const {
    if (null_codes_.count(code)) return kNullClass;
    auto it = by_code_.find(code);
    if (it == by_code_.end()) {
      throw MappingError("unknown label code " + std::to_string(code));
    }
    return it->second;
  }

  std::string name(int id) const {
    if (id == kNullClass) return "Null";
    for (const auto& e : entries_) {
      if (e.id == id) return e.name;
    }
    throw MappingError("no class with id " + std::to_string(id));
  }

 private:
  std::vector<Entry> entries_;
  std::set<std::int64_t> null_codes_;
  std::map<std::int64_t, int> by_code_;
};

/// Declarative description of a dataset file: which 1-based columns hold
/// sensor channels, which column holds the gesture label and how raw codes map
/// to classes.
struct ColumnManifest {
  std::string name;
  char delimiter = ' ';  // ' ' = any run of whitespace
  std::optional<int> column_count;
  std::vector<int> channel_columns;
  std::vector<std::string> channel_names;
  int label_column = 0;
  LabelMap labels;
  double sample_rate = 30.0;
  json source;  // canonical form, used for hashing

  std::string hash() const { return sha256_hex(source.dump()); }
};

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ValidationError(where + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace detail

inline ColumnManifest parse_manifest(const json& j) {
  detail::reject_unknown_keys(j,
                              {"schema_version", "name", "delimiter", "column_count", "channels",
                               "channel_columns", "label_column", "null_codes", "classes", "sample_rate"},
                              "manifest");
  if (j.value("schema_version", 0) != 1) throw ValidationError("manifest: schema_version must be 1");
  ColumnManifest m;
  m.source = j;
  m.name = j.value("name", std::string("unnamed"));
  const std::string delim = j.value("delimiter", std::string("whitespace"));
  if (delim == "whitespace") {
    m.delimiter = ' ';
  } else if (delim.size() == 1) {
    m.delimiter = delim[0];
  } else {
    throw ValidationError("manifest: delimiter must be 'whitespace' or a single character");
  }
  if (j.contains("column_count")) m.column_count = j.at("column_count").get<int>();
  if (j.contains("channels")) {
    for (const auto& c : j.at("channels")) {
      m.channel_columns.push_back(c.at("column").get<int>());
      m.channel_names.push_back(c.value("name", "col" + std::to_string(m.channel_columns.back())));
    }
  }
  if (j.contains("channel_columns")) {
    for (const auto& range : j.at("channel_columns")) {
      const int lo = range.at(0).get<int>();
      const int hi = range.at(1).get<int>();
      if (lo > hi) throw ValidationError("manifest: channel column range reversed");
      for (int c = lo; c <= hi; ++c) {
        m.channel_columns.push_back(c);
        m.channel_names.push_back("col" + std::to_string(c));
      }
    }
  }
  if (m.channel_columns.empty()) throw ValidationError("manifest: no channel columns");
  m.label_column = j.at("label_column").get<int>();
  std::set<int> seen;
  for (int c : m.channel_columns) {
    if (c < 1) throw ValidationError("manifest: columns are 1-based");
    if (!seen.insert(c).second) throw ValidationError("manifest: column " + std::to_string(c) + " listed twice");
  }
  if (seen.count(m.label_column)) throw ValidationError("manifest: label column is also a channel");
  std::set<std::int64_t> nulls;
  for (const auto& n : j.value("null_codes", json::array({0}))) nulls.insert(n.get<std::int64_t>());
  std::vector<LabelMap::Entry> entries;
  for (const auto& c : j.at("classes")) {
    entries.push_back({c.at("code").get<std::int64_t>(), c.at("id").get<int>(), c.value("name", std::string())});
  }
  m.labels = LabelMap(std::move(entries), std::move(nulls));
  m.sample_rate = j.value("sample_rate", 30.0);
  return m;
}

inline ColumnManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("manifest " + path.string() + ": " + e.what());
  }
  return parse_manifest(j);
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  if (delimiter == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      fields.push_back(line.substr(i, j - i));
      i = j;
    }
  } else {
    std::string cur;
    for (char ch : line) {
      if (ch == delimiter) {
        fields.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur.push_back(ch);
      }
    }
    fields.push_back(cur);
  }
  return fields;
}

inline bool is_blank(const std::string& s) {
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

inline std::optional<double> parse_cell(const std::string& s) {
  if (is_blank(s) || s == "NaN" || s == "nan" || s == "NA") return std::nullopt;
  std::size_t used = 0;
  double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

}  // namespace detail

/// Reads one OPPORTUNITY-style text file. Missing cells become NaN; nothing is
/// interpolated here.
inline SensorRecording load_recording(const std::filesystem::path& path, const ColumnManifest& manifest,
                                      int subject_id = 0, std::string run_id = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open recording " + path.string());

  const int needed = std::max(manifest.label_column,
                              *std::max_element(manifest.channel_columns.begin(), manifest.channel_columns.end()));
  std::optional<int> expected = manifest.column_count;
  std::vector<double> values;
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  const std::size_t C = manifest.channel_columns.size();
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line) || line[0] == '#') continue;
    auto fields = detail::split_fields(line, manifest.delimiter);
    const int n = static_cast<int>(fields.size());
    if (!expected) expected = n;
    if (n != *expected) {
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(*expected) + " columns, found " + std::to_string(n));
    }
    if (n < needed) {
      throw ParseError(path.string(), lineno, "manifest references column " + std::to_string(needed));
    }
    for (int col : manifest.channel_columns) {
      try {
        auto v = detail::parse_cell(fields[col - 1]);
        values.push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
      } catch (const std::exception&) {
        throw ParseError(path.string(), lineno, "non-numeric value '" + fields[col - 1] + "'");
      }
    }
    std::optional<double> code;
    try {
      code = detail::parse_cell(fields[manifest.label_column - 1]);
    } catch (const std::exception&) {
      code.reset();
    }
    if (!code || std::floor(*code) != *code) {
      throw ParseError(path.string(), lineno, "label must be an integer code");
    }
    try {
      labels.push_back(manifest.labels.map(static_cast<std::int64_t>(*code)));
    } catch (const MappingError& e) {
      throw MappingError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }

  SensorRecording rec;
  rec.subject_id = subject_id;
  rec.run_id = std::move(run_id);
  rec.sample_rate = manifest.sample_rate;
  const auto T = static_cast<Eigen::Index>(labels.size());
  rec.channels = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), T, static_cast<Eigen::Index>(C));
  rec.labels = std::move(labels);
  rec.channel_mask.assign(C, true);
  rec.channel_names = manifest.channel_names;
  return rec;
}

/// Writes a recording in the whitespace layout understood by
/// `synthetic_manifest`-style manifests: channel columns 1..C, label in C+1.
inline void write_recording(const std::filesystem::path& path, const SensorRecording& rec,
                            const std::vector<std::int64_t>& class_codes) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(17);
  for (int t = 0; t < rec.length(); ++t) {
    for (int c = 0; c < rec.channel_count(); ++c) {
      const double v = rec.channels(t, c);
      if (is_missing(v)) {
        out << "NaN ";
      } else {
        out << v << ' ';
      }
    }
    const int label = rec.labels[t];
    out << (label == kNullClass ? 0 : class_codes.at(label - 1)) << '\n';
  }
}

}  // namespace hartl::data

#endif  // HARTL_DATA_RECORDING_HPP_
