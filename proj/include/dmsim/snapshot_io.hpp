#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dmsim/error.hpp"
#include "dmsim/grid.hpp"

namespace dmsim {

/// Binary snapshot layout (all integers and floats little-endian):
///   bytes 0..3   magic "DMS1"
///   uint32       dim (1 or 2)
///   uint32 x dim cell counts (nx[, ny])
///   float64 x M  u, x-fastest
///   float64 x M  v, x-fastest
struct SnapshotData {
  int dim = 1;
  std::array<int, 2> counts{0, 1};
  std::vector<double> u;
  std::vector<double> v;

  friend bool operator==(const SnapshotData&, const SnapshotData&) = default;
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t x) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<unsigned char>((x >> (8 * k)) & 0xffu));
}

inline void put_f64(std::vector<unsigned char>& out, double d) {
  const auto x = std::bit_cast<std::uint64_t>(d);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<unsigned char>((x >> (8 * k)) & 0xffu));
}

inline std::uint32_t get_u32(const std::vector<unsigned char>& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw ConfigError("snapshot: truncated header");
  std::uint32_t x = 0;
  for (int k = 0; k < 4; ++k) x |= static_cast<std::uint32_t>(in[pos + k]) << (8 * k);
  pos += 4;
  return x;
}

inline double get_f64(const std::vector<unsigned char>& in, std::size_t& pos) {
  std::uint64_t x = 0;
  for (int k = 0; k < 8; ++k) x |= static_cast<std::uint64_t>(in[pos + k]) << (8 * k);
  pos += 8;
  return std::bit_cast<double>(x);
}

}  // namespace detail

inline std::vector<unsigned char> encode_snapshot(const Field& u, const Field& v) {
  require_same_grid(u.grid(), v.grid());
  const Grid& g = u.grid();
  std::vector<unsigned char> out = {'D', 'M', 'S', '1'};
  detail::put_u32(out, static_cast<std::uint32_t>(g.dim()));
  for (int a = 0; a < g.dim(); ++a) detail::put_u32(out, static_cast<std::uint32_t>(g.cells(a)));
  for (double x : u.values()) detail::put_f64(out, x);
  for (double x : v.values()) detail::put_f64(out, x);
  return out;
}

inline SnapshotData decode_snapshot(const std::vector<unsigned char>& in) {
  if (in.size() < 8 || std::memcmp(in.data(), "DMS1", 4) != 0) throw ConfigError("snapshot: bad magic");
  std::size_t pos = 4;
  SnapshotData s;
  const std::uint32_t dim = detail::get_u32(in, pos);
  if (dim != 1 && dim != 2) throw ConfigError("snapshot: dimension must be 1 or 2");
  s.dim = static_cast<int>(dim);
  std::size_t m = 1;
  for (int a = 0; a < s.dim; ++a) {
    s.counts[a] = static_cast<int>(detail::get_u32(in, pos));
    m *= static_cast<std::size_t>(s.counts[a]);
  }
  if (in.size() != pos + 16 * m) throw ConfigError("snapshot: payload size does not match header");
  s.u.resize(m);
  s.v.resize(m);
  for (auto& x : s.u) x = detail::get_f64(in, pos);
  for (auto& x : s.v) x = detail::get_f64(in, pos);
  return s;
}

inline void write_snapshot(const std::filesystem::path& path, const Field& u, const Field& v) {
  const auto bytes = encode_snapshot(u, v);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline SnapshotData read_snapshot(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

/// Rebuilds fields on `g`; the snapshot's cell counts must match it.
inline std::pair<Field, Field> snapshot_fields(const SnapshotData& s, const Grid& g) {
  if (s.dim != g.dim() || s.counts[0] != g.cells(0) || (g.dim() == 2 && s.counts[1] != g.cells(1)))
    throw ConfigError("snapshot cell counts do not match the configured grid");
  return {Field(g, s.u), Field(g, s.v)};
}

}  // namespace dmsim
