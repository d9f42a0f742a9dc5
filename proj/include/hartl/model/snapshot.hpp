#ifndef HARTL_MODEL_SNAPSHOT_HPP_
#define HARTL_MODEL_SNAPSHOT_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hartl/model/deepconvlstm.hpp"

namespace hartl::model {

/// Immutable copy of a model's parameters with the hash of the producing
/// spec and free-form provenance.
struct ParameterSnapshot {
  ParameterSet params;
  std::string spec_hash;
  json spec;
  json meta = json::object();
};

inline ParameterSnapshot snapshot(const DeepConvLstm& m, json meta = json::object()) {
  return {m.parameters(), m.spec().hash(), m.spec().to_json(), std::move(meta)};
}

/// Copies the named groups (all groups when `groups` is empty) from `snap`
/// into `m`. A full restore requires matching spec hashes; a partial restore
/// requires each named group to exist with identical tensor shapes.
inline void restore(DeepConvLstm& m, const ParameterSnapshot& snap, const std::vector<std::string>& groups = {}) {
  ParameterSet& dst = m.parameters();
  const bool full = groups.empty();
  const std::vector<std::string> names = full ? dst.names() : groups;
  for (const auto& name : names) {
    const ParameterGroup* src = snap.params.find(name);
    const ParameterGroup* own = dst.find(name);
    if (!own) throw StructureError("restore: model has no layer group '" + name + "'");
    if (!src) throw StructureError("restore: snapshot has no layer group '" + name + "'");
    if (!ParameterSet::same_group_structure(*src, *own)) {
      throw StructureError("restore: layer group '" + name + "' has incompatible shapes");
    }
  }
  if (full && snap.spec_hash != m.spec().hash()) {
    throw StructureError("restore: snapshot spec hash differs from model spec hash");
  }
  for (const auto& name : names) dst.group(name) = *snap.params.find(name);
}

namespace detail {

inline constexpr char kSnapMagic[8] = {'H', 'A', 'R', 'T', 'L', 'P', 'S', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError("truncated snapshot");
  return v;
}

}  // namespace detail

inline std::string encode_parameters(const ParameterSet& p) {
  std::ostringstream out(std::ios::binary);
  out.write(detail::kSnapMagic, 8);
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.groups().size()));
  for (const auto& g : p.groups()) {
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(g.name.size()));
    out.write(g.name.data(), static_cast<std::streamsize>(g.name.size()));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(g.tensors.size()));
    for (const auto& t : g.tensors) {
      detail::write_pod<std::int64_t>(out, t.rows());
      detail::write_pod<std::int64_t>(out, t.cols());
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
  }
  return out.str();
}

inline ParameterSet decode_parameters(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(detail::kSnapMagic, 8)) {
    throw ValidationError("not a parameter snapshot (bad magic)");
  }
  std::vector<ParameterGroup> groups(detail::read_pod<std::uint32_t>(in));
  for (auto& g : groups) {
    g.name.resize(detail::read_pod<std::uint32_t>(in));
    in.read(g.name.data(), static_cast<std::streamsize>(g.name.size()));
    g.tensors.resize(detail::read_pod<std::uint32_t>(in));
    for (auto& t : g.tensors) {
      const auto r = detail::read_pod<std::int64_t>(in);
      const auto c = detail::read_pod<std::int64_t>(in);
      t.resize(r, c);
      in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
      if (!in) throw ValidationError("truncated snapshot");
    }
  }
  return ParameterSet(std::move(groups));
}

/// Writes `<path>` (binary tensors) and `<path>.json` (spec hash, spec, group
/// names, provenance, payload hash).
inline void save_snapshot(const std::filesystem::path& path, const ParameterSnapshot& snap) {
  const std::string bytes = encode_parameters(snap.params);
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  json side = {{"format", "hartl-parameters"}, {"version", 1},   {"spec_hash", snap.spec_hash},
               {"spec", snap.spec},            {"groups", snap.params.names()}, {"meta", snap.meta},
               {"payload_sha256", sha256_hex(bytes)}};
  std::ofstream(path.string() + ".json") << side.dump(2) << "\n";
}

inline ParameterSnapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open snapshot " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  ParameterSnapshot snap;
  snap.params = decode_parameters(bytes);
  std::ifstream side_in(path.string() + ".json");
  if (!side_in) throw ValidationError("snapshot sidecar missing for " + path.string());
  const json side = json::parse(side_in);
  if (side.at("payload_sha256").get<std::string>() != sha256_hex(bytes)) {
    throw ValidationError("snapshot " + path.string() + " does not match its sidecar hash");
  }
  snap.spec_hash = side.at("spec_hash").get<std::string>();
  snap.spec = side.at("spec");
  snap.meta = side.value("meta", json::object());
  return snap;
}

}  // namespace hartl::model

#endif  // HARTL_MODEL_SNAPSHOT_HPP_
