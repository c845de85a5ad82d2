#pragma once

// Binary reachability-map file, little-endian.
//
//   header : "RMAP" | u32 version | u64 arm geometry hash
//            | f64 cell_size | f64 cell_stride | f64 single-cell radius
//            | f64 bounds lo[3] | f64 bounds hi[3] | u64 sample count
//            | str arm | u32 joint count | (str name, f64 interval) per joint
//            | f64 wrist reference[3] | u32 prune-per-cell
//   cells  : u64 cell count | per cell (sorted): i32 i, j, k | u32 n | u32 ids[n]
//   samples: per sample: f64 q[joint count] | f64 quaternion w, x, y, z | f64 center[3]
//
// str = u32 byte length followed by the bytes.

#include "ikseed/errors.hpp"
#include "ikseed/reachability_map.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>

namespace ikseed {

namespace detail {

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw FormatError("truncated reachability map");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 20)) throw FormatError("corrupt reachability map (string too long)");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw FormatError("truncated reachability map");
  return s;
}

}  // namespace detail

inline void write_map(std::ostream& out, const ReachabilityMap& m) {
  using detail::put;
  out.write("RMAP", 4);
  put<std::uint32_t>(out, ReachabilityMap::kFormatVersion);
  put<std::uint64_t>(out, m.chain_hash_);
  put<double>(out, m.grid_.cell_size);
  put<double>(out, m.grid_.cell_stride);
  put<double>(out, m.single_cell_radius());
  for (int a = 0; a < 3; ++a) put<double>(out, m.lo_[a]);
  for (int a = 0; a < 3; ++a) put<double>(out, m.hi_[a]);
  put<std::uint64_t>(out, m.size());
  detail::put_string(out, m.arm_);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.joint_names_.size()));
  for (std::size_t k = 0; k < m.joint_names_.size(); ++k) {
    detail::put_string(out, m.joint_names_[k]);
    put<double>(out, m.intervals_[k]);
  }
  for (double w : m.wrist_reference_) put<double>(out, w);
  put<std::uint32_t>(out, m.prune_per_cell_);

  const auto cells = m.cell_indices();
  put<std::uint64_t>(out, cells.size());
  for (const auto& c : cells) {
    for (auto v : c) put<std::int32_t>(out, v);
    const auto ids = m.cell(c);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ids.size()));
    for (auto id : ids) put<std::uint32_t>(out, id);
  }
  const std::size_t n = m.partial_dof();
  for (std::size_t s = 0; s < m.size(); ++s) {
    for (std::size_t k = 0; k < n; ++k) put<double>(out, m.q_[s * n + k]);
    for (std::size_t k = 0; k < 4; ++k) put<double>(out, m.quats_[4 * s + k]);
    for (std::size_t k = 0; k < 3; ++k) put<double>(out, m.centers_[3 * s + k]);
  }
  if (!out) throw FormatError("failed writing reachability map");
}

inline ReachabilityMap read_map(std::istream& in) {
  using detail::get;
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RMAP", 4) != 0)
    throw FormatError("not a reachability map (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != ReachabilityMap::kFormatVersion)
    throw FormatError("unsupported reachability map version " + std::to_string(version));

  ReachabilityMap m;
  m.chain_hash_ = get<std::uint64_t>(in);
  m.grid_.cell_size = get<double>(in);
  m.grid_.cell_stride = get<double>(in);
  const double radius = get<double>(in);
  if (radius != m.single_cell_radius()) throw FormatError("corrupt reachability map (grid parameters disagree)");
  m.grid_.validate();
  for (int a = 0; a < 3; ++a) m.lo_[a] = get<double>(in);
  for (int a = 0; a < 3; ++a) m.hi_[a] = get<double>(in);
  const auto count = get<std::uint64_t>(in);
  if (count > std::numeric_limits<std::uint32_t>::max()) throw FormatError("corrupt reachability map (sample count)");
  m.arm_ = detail::get_string(in);
  const auto n = get<std::uint32_t>(in);
  if (n > 64) throw FormatError("corrupt reachability map (joint count)");
  for (std::uint32_t k = 0; k < n; ++k) {
    m.joint_names_.push_back(detail::get_string(in));
    m.intervals_.push_back(get<double>(in));
  }
  for (auto& w : m.wrist_reference_) w = get<double>(in);
  m.prune_per_cell_ = get<std::uint32_t>(in);

  const auto cell_count = get<std::uint64_t>(in);
  m.cells_.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(cell_count, 1u << 24)));
  for (std::uint64_t c = 0; c < cell_count; ++c) {
    CellIndex idx;
    for (auto& v : idx) v = get<std::int32_t>(in);
    const auto len = get<std::uint32_t>(in);
    std::vector<std::uint32_t> ids(len);
    for (auto& id : ids) {
      id = get<std::uint32_t>(in);
      if (id >= count) throw FormatError("corrupt reachability map (sample id out of range)");
    }
    m.cells_.emplace(ReachabilityMap::pack(idx), std::move(ids));
  }
  m.q_.resize(count * n);
  m.quats_.resize(count * 4);
  m.centers_.resize(count * 3);
  for (std::uint64_t s = 0; s < count; ++s) {
    for (std::size_t k = 0; k < n; ++k) m.q_[s * n + k] = get<double>(in);
    for (std::size_t k = 0; k < 4; ++k) m.quats_[4 * s + k] = get<double>(in);
    for (std::size_t k = 0; k < 3; ++k) m.centers_[3 * s + k] = get<double>(in);
  }
  return m;
}

inline void save_map(const ReachabilityMap& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  write_map(out, m);
  out.flush();
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

inline ReachabilityMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return read_map(in);
}

inline std::string serialize_map(const ReachabilityMap& m) {
  std::ostringstream ss(std::ios::binary);
  write_map(ss, m);
  return ss.str();
}

}  // namespace ikseed
