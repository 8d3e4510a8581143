#pragma once

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <vector>

#include "mpacdc/structure.hpp"

namespace mpacdc {

struct NeighborPair {
  int center;               // atom index i
  int neighbor;             // atom index j
  Eigen::Vector3d vector;   // r_j - r_i, minimum image if periodic
  double distance;
};

namespace detail {

inline void push_pair(std::vector<NeighborPair>& out, int i, int j,
                      const Eigen::Vector3d& v, double r_cut) {
  const double d = v.norm();
  // zero-distance pairs (coincident atoms) cannot carry a direction
  if (d > 1e-12 && d <= r_cut) out.push_back({i, j, v, d});
}

}  // namespace detail

// Ordered neighbor pairs with distance <= r_cut, both (i,j) and (j,i),
// no self pairs. Periodic structures use the minimum-image convention and
// require r_cut < half the minimum cell height (no multi-image support).
inline std::vector<NeighborPair> build_neighbor_list(const Structure& s,
                                                     double r_cut) {
  if (!(r_cut > 0.0)) throw config_error("neighbor list: r_cut must be > 0");
  s.validate();
  const int n = s.size();
  std::vector<NeighborPair> out;

  const bool any_pbc = s.pbc[0] || s.pbc[1] || s.pbc[2];
  if (any_pbc) {
    const Eigen::Matrix3d cell = *s.cell;  // rows are lattice vectors
    // height of the cell along axis k: volume / area of the opposite face
    const double vol = std::abs(cell.determinant());
    for (int k = 0; k < 3; ++k) {
      if (!s.pbc[k]) continue;
      const Eigen::Vector3d a = cell.row((k + 1) % 3);
      const Eigen::Vector3d b = cell.row((k + 2) % 3);
      const double height = vol / a.cross(b).norm();
      if (r_cut >= 0.5 * height)
        throw config_error(
            "neighbor list: r_cut must be smaller than half the minimum cell "
            "height (no multi-image support)");
    }
    const Eigen::Matrix3d inv = cell.inverse();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        Eigen::Vector3d d = s.positions[j] - s.positions[i];
        Eigen::Vector3d frac = inv.transpose() * d;
        for (int k = 0; k < 3; ++k)
          if (s.pbc[k]) frac[k] -= std::round(frac[k]);
        d = cell.transpose() * frac;
        detail::push_pair(out, i, j, d, r_cut);
      }
    return out;
  }

  if (n <= 64) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        detail::push_pair(out, i, j, s.positions[j] - s.positions[i], r_cut);
      }
    return out;
  }

  // cell binning for larger aperiodic systems
  Eigen::Vector3d lo = s.positions[0], hi = s.positions[0];
  for (const auto& p : s.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double bin = r_cut;
  Eigen::Vector3i nbin;
  for (int k = 0; k < 3; ++k)
    nbin[k] = std::max(1, static_cast<int>(std::floor((hi[k] - lo[k]) / bin)) + 1);
  auto bin_of = [&](const Eigen::Vector3d& p) {
    Eigen::Vector3i b;
    for (int k = 0; k < 3; ++k)
      b[k] = std::min(nbin[k] - 1,
                      std::max(0, static_cast<int>(std::floor((p[k] - lo[k]) / bin))));
    return b;
  };
  auto key_of = [&](const Eigen::Vector3i& b) {
    return (static_cast<long long>(b[0]) * nbin[1] + b[1]) * nbin[2] + b[2];
  };
  std::unordered_map<long long, std::vector<int>> bins;
  for (int i = 0; i < n; ++i) bins[key_of(bin_of(s.positions[i]))].push_back(i);

  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3i b = bin_of(s.positions[i]);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const Eigen::Vector3i nb = b + Eigen::Vector3i(dx, dy, dz);
          if ((nb.array() < 0).any() || (nb.array() >= nbin.array()).any())
            continue;
          auto it = bins.find(key_of(nb));
          if (it == bins.end()) continue;
          for (int j : it->second) {
            if (i == j) continue;
            detail::push_pair(out, i, j, s.positions[j] - s.positions[i], r_cut);
          }
        }
  }
  std::sort(out.begin(), out.end(), [](const NeighborPair& a, const NeighborPair& b) {
    return std::tie(a.center, a.neighbor) < std::tie(b.center, b.neighbor);
  });
  return out;
}

// pairs grouped by center, in ascending neighbor order (deterministic
// accumulation order for scatter sums)
inline std::vector<std::vector<int>> pairs_by_center(
    const std::vector<NeighborPair>& pairs, int n_atoms) {
  std::vector<std::vector<int>> by_center(n_atoms);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    by_center[pairs[k].center].push_back(static_cast<int>(k));
  for (auto& v : by_center)
    std::sort(v.begin(), v.end(), [&](int a, int b) {
      return pairs[a].neighbor < pairs[b].neighbor;
    });
  return by_center;
}

}  // namespace mpacdc
