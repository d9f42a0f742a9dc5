#ifndef HARTL_DATA_CACHE_HPP_
#define HARTL_DATA_CACHE_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hartl/data/windows.hpp"

namespace hartl::data {

// Binary window cache: magic, header ints, then per window
// {label, domain, subject, run, start, L*C doubles column-major}.
// A JSON sidecar `<file>.json` records L, S, C, count, manifest hash and the
// sha256 of the binary payload.

namespace detail {

inline constexpr char kWindowMagic[8] = {'H', 'A', 'R', 'T', 'L', 'W', 'S', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError("truncated cache file");
  return v;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline std::string encode_windows(const WindowSet& ws) {
  std::ostringstream out(std::ios::binary);
  out.write(detail::kWindowMagic, sizeof(detail::kWindowMagic));
  detail::put<std::int32_t>(out, ws.length);
  detail::put<std::int32_t>(out, ws.stride);
  detail::put<std::int32_t>(out, ws.channels);
  detail::put<std::uint64_t>(out, ws.windows.size());
  for (const auto& w : ws.windows) {
    if (w.values.rows() != ws.length || w.values.cols() != ws.channels) {
      throw DimensionError("encode_windows: window shape differs from set shape");
    }
    detail::put<std::int32_t>(out, w.label);
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(w.domain));
    detail::put<std::int32_t>(out, w.origin.subject_id);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(w.origin.run_id.size()));
    out.write(w.origin.run_id.data(), static_cast<std::streamsize>(w.origin.run_id.size()));
    detail::put<std::int32_t>(out, w.origin.start);
    out.write(reinterpret_cast<const char*>(w.values.data()),
              static_cast<std::streamsize>(w.values.size() * sizeof(double)));
  }
  return out.str();
}

inline WindowSet decode_windows(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, detail::kWindowMagic)) {
    throw ValidationError("not a window cache (bad magic)");
  }
  WindowSet ws;
  ws.length = detail::get<std::int32_t>(in);
  ws.stride = detail::get<std::int32_t>(in);
  ws.channels = detail::get<std::int32_t>(in);
  const auto n = detail::get<std::uint64_t>(in);
  ws.windows.resize(n);
  for (auto& w : ws.windows) {
    w.label = detail::get<std::int32_t>(in);
    w.domain = static_cast<Domain>(detail::get<std::uint8_t>(in));
    w.origin.subject_id = detail::get<std::int32_t>(in);
    const auto len = detail::get<std::uint32_t>(in);
    w.origin.run_id.resize(len);
    in.read(w.origin.run_id.data(), len);
    w.origin.start = detail::get<std::int32_t>(in);
    w.values.resize(ws.length, ws.channels);
    in.read(reinterpret_cast<char*>(w.values.data()),
            static_cast<std::streamsize>(w.values.size() * sizeof(double)));
    if (!in) throw ValidationError("truncated cache file");
  }
  return ws;
}

inline void save_windows(const std::filesystem::path& path, const WindowSet& ws) {
  const std::string bytes = encode_windows(ws);
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  json side = {{"format", "hartl-windowset"}, {"version", 1},          {"length", ws.length},
               {"stride", ws.stride},         {"channels", ws.channels}, {"count", ws.size()},
               {"manifest_hash", ws.manifest_hash}, {"payload_sha256", sha256_hex(bytes)}};
  std::ofstream(path.string() + ".json") << side.dump(2) << "\n";
}

inline WindowSet load_windows(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  WindowSet ws = decode_windows(bytes);
  const std::filesystem::path side_path = path.string() + ".json";
  if (std::filesystem::exists(side_path)) {
    const json side = json::parse(detail::read_file(side_path));
    if (side.at("payload_sha256").get<std::string>() != sha256_hex(bytes)) {
      throw ValidationError("window cache " + path.string() + " does not match its sidecar hash");
    }
    ws.manifest_hash = side.value("manifest_hash", std::string());
  }
  return ws;
}

}  // namespace hartl::data

#endif  // HARTL_DATA_CACHE_HPP_
