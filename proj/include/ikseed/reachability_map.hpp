#pragma once

// Voxelized reachability map: wrist-center position (arm-base frame) ->
// lattice samples of the arm's non-wrist joints with the lower-arm rotation
// each sample produces.
//
// Cells have extent `cell_size` and are laid out every `cell_stride`, so with
// stride < size every point is covered by several cells. Cell (i, j, k) spans
// [origin + i*stride, origin + i*stride + size) on each axis, origin being the
// lower corner of the sample bounds.

#include "ikseed/chain.hpp"
#include "ikseed/errors.hpp"
#include "ikseed/parallel.hpp"
#include "ikseed/pose.hpp"
#include "ikseed/wrist.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iosfwd>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ikseed {

struct GridSpec {
  double cell_size = 0.05;
  double cell_stride = 0.025;

  void validate() const {
    if (!(cell_size > 0.0) || !(cell_stride > 0.0)) throw ValidationError("grid cell size and stride must be positive");
    if (cell_stride > cell_size) throw ValidationError("grid stride must not exceed the cell size");
  }
};

struct MapBuildOptions {
  /// Per non-wrist joint sampling step (radians / meters). A single value applies to all.
  std::vector<double> intervals = {2.0 * std::numbers::pi / 180.0};
  GridSpec grid;
  unsigned threads = 1;
  /// Keep at most this many samples per cell (0 = keep all).
  std::uint32_t prune_per_cell = 0;
};

using CellIndex = std::array<std::int32_t, 3>;

struct MapHit {
  std::uint32_t sample = 0;
  double distance = 0.0;
};

/// Read-only view of one stored sample.
struct MapSample {
  std::span<const double> q_partial;
  Quat lower_arm_quat;
  Vec3 wrist_center;

  Mat3 lower_arm_rotation() const { return lower_arm_quat.toRotationMatrix(); }
};

class ReachabilityMap {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  ReachabilityMap() = default;

  // ---- metadata
  const std::string& arm() const { return arm_; }
  std::uint64_t chain_hash() const { return chain_hash_; }
  const std::vector<std::string>& joint_names() const { return joint_names_; }
  const std::vector<double>& intervals() const { return intervals_; }
  const std::array<double, 3>& wrist_reference() const { return wrist_reference_; }
  std::uint32_t prune_per_cell() const { return prune_per_cell_; }
  const GridSpec& grid() const { return grid_; }
  const Vec3& bounds_lo() const { return lo_; }
  const Vec3& bounds_hi() const { return hi_; }
  /// Largest radius answered from a single cell.
  double single_cell_radius() const { return 0.5 * (grid_.cell_size - grid_.cell_stride); }

  // ---- samples
  std::size_t size() const { return centers_.size() / 3; }
  std::size_t partial_dof() const { return joint_names_.size(); }
  MapSample sample(std::size_t i) const {
    const std::size_t n = partial_dof();
    const double* qd = quats_.data() + 4 * i;
    return {std::span<const double>(q_.data() + n * i, n), Quat(qd[0], qd[1], qd[2], qd[3]),
            Vec3(centers_[3 * i], centers_[3 * i + 1], centers_[3 * i + 2])};
  }
  Vec3 center(std::size_t i) const { return {centers_[3 * i], centers_[3 * i + 1], centers_[3 * i + 2]}; }

  // ---- cells
  std::size_t cell_count() const { return cells_.size(); }
  /// Sample indices stored in a cell (empty when the cell does not exist).
  std::span<const std::uint32_t> cell(const CellIndex& c) const {
    auto it = cells_.find(pack(c));
    if (it == cells_.end()) return {};
    return it->second;
  }
  /// All cells whose extent contains p.
  std::vector<CellIndex> covering_cells(const Vec3& p) const {
    std::array<std::int32_t, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      const double u = p[a] - lo_[a];
      lo[a] = static_cast<std::int32_t>(std::floor((u - grid_.cell_size) / grid_.cell_stride)) + 1;
      hi[a] = static_cast<std::int32_t>(std::floor(u / grid_.cell_stride));
    }
    std::vector<CellIndex> out;
    for (auto i = lo[0]; i <= hi[0]; ++i)
      for (auto j = lo[1]; j <= hi[1]; ++j)
        for (auto k = lo[2]; k <= hi[2]; ++k) out.push_back({i, j, k});
    return out;
  }
  bool cell_contains(const CellIndex& c, const Vec3& p) const {
    for (int a = 0; a < 3; ++a) {
      const double start = lo_[a] + c[a] * grid_.cell_stride;
      if (p[a] < start || p[a] >= start + grid_.cell_size) return false;
    }
    return true;
  }
  /// Sorted list of all non-empty cells.
  std::vector<CellIndex> cell_indices() const {
    std::vector<std::uint64_t> keys;
    keys.reserve(cells_.size());
    for (const auto& [k, v] : cells_) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    std::vector<CellIndex> out;
    out.reserve(keys.size());
    for (auto k : keys) out.push_back(unpack(k));
    return out;
  }

  /// Samples with |center - target| <= r, sorted by distance then index.
  std::vector<MapHit> query(const Vec3& target, double r) const {
    if (!(r >= 0.0)) throw ValidationError("query radius must be non-negative");
    std::vector<MapHit> hits;
    if (size() == 0) return hits;
    const double r2 = r * r;
    auto consider = [&](std::uint32_t s) {
      const Vec3 c = center(s);
      const double d2 = (c - target).squaredNorm();
      if (d2 <= r2) hits.push_back({s, std::sqrt(d2)});
    };

    // cell indices that can exist for this map's bounds
    std::array<double, 3> first{}, last{};
    for (int a = 0; a < 3; ++a) {
      first[a] = std::floor(-grid_.cell_size / grid_.cell_stride) + 1.0;
      last[a] = std::floor((hi_[a] - lo_[a]) / grid_.cell_stride);
    }
    if (r < single_cell_radius() * (1.0 - 1e-9)) {
      // the cell centered nearest the target contains the whole radius-r cube
      const double h = single_cell_radius();
      CellIndex c;
      for (int a = 0; a < 3; ++a) {
        const double i = std::floor((target[a] - lo_[a] - h) / grid_.cell_stride);
        if (!(i >= first[a] && i <= last[a])) return hits;
        c[a] = static_cast<std::int32_t>(i);
      }
      for (auto s : cell(c)) consider(s);
    } else {
      // visit each sample once through its canonical (highest-index) covering cell
      CellIndex lo, hi;
      for (int a = 0; a < 3; ++a) {
        const double l = std::max(first[a], std::floor((target[a] - r - lo_[a]) / grid_.cell_stride));
        const double u = std::min(last[a], std::floor((target[a] + r - lo_[a]) / grid_.cell_stride));
        if (!(l <= u)) return hits;
        lo[a] = static_cast<std::int32_t>(l);
        hi[a] = static_cast<std::int32_t>(u);
      }
      for (auto i = lo[0]; i <= hi[0]; ++i)
        for (auto j = lo[1]; j <= hi[1]; ++j)
          for (auto k = lo[2]; k <= hi[2]; ++k) {
            const CellIndex ci{i, j, k};
            for (auto s : cell(ci))
              if (canonical_cell(center(s)) == ci) consider(s);
          }
    }
    std::sort(hits.begin(), hits.end(), [](const MapHit& a, const MapHit& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.sample < b.sample;
    });
    return hits;
  }

  bool matches(const KinematicChain& chain) const { return chain.arm_hash(arm_) == chain_hash_; }

  friend bool operator==(const ReachabilityMap& a, const ReachabilityMap& b);

 private:
  friend ReachabilityMap build_map(const KinematicChain&, const std::string&, const MapBuildOptions&);
  friend void write_map(std::ostream&, const ReachabilityMap&);
  friend ReachabilityMap read_map(std::istream&);

  static std::uint64_t pack(const CellIndex& c) {
    constexpr std::int64_t bias = 1 << 20;
    std::uint64_t key = 0;
    for (int a = 0; a < 3; ++a) key = (key << 21) | static_cast<std::uint64_t>((c[a] + bias) & 0x1FFFFF);
    return key;
  }
  static CellIndex unpack(std::uint64_t key) {
    constexpr std::int64_t bias = 1 << 20;
    CellIndex c;
    for (int a = 2; a >= 0; --a) {
      c[a] = static_cast<std::int32_t>(static_cast<std::int64_t>(key & 0x1FFFFF) - bias);
      key >>= 21;
    }
    return c;
  }
  CellIndex canonical_cell(const Vec3& p) const {
    CellIndex c;
    for (int a = 0; a < 3; ++a)
      c[a] = static_cast<std::int32_t>(std::floor((p[a] - lo_[a]) / grid_.cell_stride));
    return c;
  }

  std::string arm_;
  std::uint64_t chain_hash_ = 0;
  std::vector<std::string> joint_names_;
  std::vector<double> intervals_;
  std::array<double, 3> wrist_reference_{};
  std::uint32_t prune_per_cell_ = 0;
  GridSpec grid_;
  Vec3 lo_ = Vec3::Zero();
  Vec3 hi_ = Vec3::Zero();
  std::vector<double> q_;        // partial_dof per sample
  std::vector<double> quats_;    // w, x, y, z per sample
  std::vector<double> centers_;  // x, y, z per sample
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

inline bool operator==(const ReachabilityMap& a, const ReachabilityMap& b) {
  auto same_bits = [](const std::vector<double>& x, const std::vector<double>& y) {
    return x.size() == y.size() && (x.empty() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
  };
  auto same_vec = [](const Vec3& x, const Vec3& y) { return std::memcmp(x.data(), y.data(), sizeof(double) * 3) == 0; };
  return a.arm_ == b.arm_ && a.chain_hash_ == b.chain_hash_ && a.joint_names_ == b.joint_names_ &&
         same_bits(a.intervals_, b.intervals_) &&
         std::memcmp(a.wrist_reference_.data(), b.wrist_reference_.data(), sizeof(double) * 3) == 0 &&
         a.prune_per_cell_ == b.prune_per_cell_ &&
         std::memcmp(&a.grid_.cell_size, &b.grid_.cell_size, sizeof(double)) == 0 &&
         std::memcmp(&a.grid_.cell_stride, &b.grid_.cell_stride, sizeof(double)) == 0 && same_vec(a.lo_, b.lo_) &&
         same_vec(a.hi_, b.hi_) && same_bits(a.q_, b.q_) && same_bits(a.quats_, b.quats_) &&
         same_bits(a.centers_, b.centers_) && a.cells_ == b.cells_;
}

/// Number of lattice values for a joint range sampled at `interval`,
/// both endpoints included when the range divides evenly.
inline std::size_t lattice_count(double lo, double hi, double interval) {
  return static_cast<std::size_t>(std::floor((hi - lo) / interval + 1e-9)) + 1;
}

inline ReachabilityMap build_map(const KinematicChain& chain, const std::string& arm_name,
                                 const MapBuildOptions& options) {
  options.grid.validate();
  const ArmFrames& arm = chain.arm(arm_name);
  const WristGeometry wrist = wrist_geometry(chain, arm);
  const std::size_t n = arm.positional.size();
  if (n == 0) throw ValidationError("arm has no non-wrist joints to sample");

  std::vector<double> intervals = options.intervals;
  if (intervals.size() == 1 && n > 1) intervals.assign(n, intervals[0]);
  if (intervals.size() != n)
    throw ValidationError("expected " + std::to_string(n) + " sampling intervals, got " +
                          std::to_string(intervals.size()));

  std::vector<std::size_t> counts(n);
  std::size_t total = 1;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(intervals[k] > 0.0)) throw ValidationError("sampling intervals must be positive");
    const double lo = chain.lower(arm.positional[k]);
    const double hi = chain.upper(arm.positional[k]);
    if (!(hi > lo)) throw ValidationError("empty joint range");
    counts[k] = lattice_count(lo, hi, intervals[k]);
    total *= counts[k];
  }
  if (total > std::numeric_limits<std::uint32_t>::max()) throw ValidationError("lattice exceeds 2^32 samples");

  ReachabilityMap map;
  map.arm_ = arm_name;
  map.chain_hash_ = chain.arm_hash(arm_name);
  for (auto i : arm.positional) map.joint_names_.push_back(chain.movable(i).name);
  map.intervals_ = intervals;
  for (std::size_t k = 0; k < 3; ++k) map.wrist_reference_[k] = 0.5 * (wrist.limits[k].first + wrist.limits[k].second);
  map.prune_per_cell_ = options.prune_per_cell;
  map.grid_ = options.grid;
  map.q_.resize(total * n);
  map.quats_.resize(total * 4);
  map.centers_.resize(total * 3);

  parallel_for(total, options.threads, [&](std::size_t begin, std::size_t end) {
    JointState q = chain.neutral_state();
    for (std::size_t k = 0; k < 3; ++k) q[static_cast<Eigen::Index>(arm.wrist[k])] = map.wrist_reference_[k];
    for (std::size_t s = begin; s < end; ++s) {
      // row-major lattice: last joint varies fastest
      std::size_t rem = s;
      for (std::size_t k = n; k-- > 0;) {
        const std::size_t idx = rem % counts[k];
        rem /= counts[k];
        const double v = std::min(chain.lower(arm.positional[k]) + static_cast<double>(idx) * intervals[k],
                                  chain.upper(arm.positional[k]));
        q[static_cast<Eigen::Index>(arm.positional[k])] = v;
        map.q_[s * n + k] = v;
      }
      const Pose lower = relative_pose(chain, q, arm.arm_base, arm.lower_arm);
      const Quat quat = canonical_quat(lower.rotation);
      map.quats_[4 * s] = quat.w();
      map.quats_[4 * s + 1] = quat.x();
      map.quats_[4 * s + 2] = quat.y();
      map.quats_[4 * s + 3] = quat.z();
      const Vec3 c = lower.apply(wrist.center_in_lower_arm);
      for (int a = 0; a < 3; ++a) map.centers_[3 * s + static_cast<std::size_t>(a)] = c[a];
    }
  });

  if (total > 0) {
    map.lo_ = map.center(0);
    map.hi_ = map.lo_;
    for (std::size_t s = 1; s < total; ++s) {
      map.lo_ = map.lo_.cwiseMin(map.center(s));
      map.hi_ = map.hi_.cwiseMax(map.center(s));
    }
  }
  for (std::size_t s = 0; s < total; ++s)
    for (const auto& c : map.covering_cells(map.center(s)))
      map.cells_[ReachabilityMap::pack(c)].push_back(static_cast<std::uint32_t>(s));

  if (options.prune_per_cell > 0) {
    // farthest-point subsampling in joint space, seeded by the first sample
    const std::size_t k_keep = options.prune_per_cell;
    for (auto& [key, ids] : map.cells_) {
      if (ids.size() <= k_keep) continue;
      std::vector<double> best(ids.size(), std::numeric_limits<double>::infinity());
      std::vector<std::uint32_t> kept{ids[0]};
      std::vector<bool> used(ids.size(), false);
      used[0] = true;
      while (kept.size() < k_keep) {
        const double* last = map.q_.data() + n * kept.back();
        std::size_t arg = 0;
        double far = -1.0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (used[i]) continue;
          const double* qi = map.q_.data() + n * ids[i];
          double d = 0.0;
          for (std::size_t k = 0; k < n; ++k) d += (qi[k] - last[k]) * (qi[k] - last[k]);
          best[i] = std::min(best[i], d);
          if (best[i] > far) {
            far = best[i];
            arg = i;
          }
        }
        used[arg] = true;
        kept.push_back(ids[arg]);
      }
      std::sort(kept.begin(), kept.end());
      ids = std::move(kept);
    }
  }
  return map;
}

}  // namespace ikseed
