#ifndef PETPRIOR_METRIC_ORACLE_HPP
#define PETPRIOR_METRIC_ORACLE_HPP

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "petprior/volume.hpp"

namespace petprior::testing {

/// Union-find labelling with 18-connectivity (all offsets with at most two
/// nonzero axes), written independently of the library's flood fill.
inline std::vector<int> oracle_components(const Volume3D& m) {
  const GridSize g = m.grid();
  const Index n = g.count();
  std::vector<Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index i) {
    while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
    return i;
  };
  auto at = [&](Index x, Index y, Index z) { return (z * g.ny + y) * g.nx + x; };
  for (Index z = 0; z < g.nz; ++z)
    for (Index y = 0; y < g.ny; ++y)
      for (Index x = 0; x < g.nx; ++x) {
        if (m.data()[at(x, y, z)] == 0.0f) continue;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int nonzero = (dx != 0) + (dy != 0) + (dz != 0);
              if (nonzero == 0 || nonzero == 3) continue;
              const Index xx = x + dx, yy = y + dy, zz = z + dz;
              if (xx < 0 || yy < 0 || zz < 0 || xx >= g.nx || yy >= g.ny || zz >= g.nz) continue;
              if (m.data()[at(xx, yy, zz)] == 0.0f) continue;
              parent[static_cast<std::size_t>(find(at(x, y, z)))] = find(at(xx, yy, zz));
            }
      }
  std::vector<int> root_label(static_cast<std::size_t>(n), 0), out(static_cast<std::size_t>(n), 0);
  int next = 0;
  for (Index i = 0; i < n; ++i) {
    if (m.data()[i] == 0.0f) continue;
    int& l = root_label[static_cast<std::size_t>(find(i))];
    if (l == 0) l = ++next;
    out[static_cast<std::size_t>(i)] = l;
  }
  return out;
}

inline double oracle_voxel_mm3(const Volume3D& m) {
  const auto s = m.spacing();
  return s[0] * s[1] * s[2];
}

inline std::optional<double> oracle_dice(const Volume3D& p, const Volume3D& g) {
  long a = 0, b = 0, both = 0;
  for (Index i = 0; i < p.data().size(); ++i) {
    const bool pi = p.data()[i] != 0.0f, gi = g.data()[i] != 0.0f;
    a += pi;
    b += gi;
    both += pi && gi;
  }
  if (a + b == 0) return std::nullopt;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

/// Volume (litres) of `a` not explained by `b`: voxels outside b, or whole
/// components of a that never touch b.
inline double oracle_excess_liters(const Volume3D& a, const Volume3D& b, bool component) {
  long voxels = 0;
  if (!component) {
    for (Index i = 0; i < a.data().size(); ++i) voxels += a.data()[i] != 0.0f && b.data()[i] == 0.0f;
  } else {
    const auto lab = oracle_components(a);
    const int k = lab.empty() ? 0 : *std::max_element(lab.begin(), lab.end());
    std::vector<long> size(static_cast<std::size_t>(k + 1), 0);
    std::vector<bool> touches(static_cast<std::size_t>(k + 1), false);
    for (std::size_t i = 0; i < lab.size(); ++i) {
      if (lab[i] == 0) continue;
      ++size[static_cast<std::size_t>(lab[i])];
      if (b.data()[static_cast<Index>(i)] != 0.0f) touches[static_cast<std::size_t>(lab[i])] = true;
    }
    for (int l = 1; l <= k; ++l) {
      if (!touches[static_cast<std::size_t>(l)]) voxels += size[static_cast<std::size_t>(l)];
    }
  }
  return static_cast<double>(voxels) * oracle_voxel_mm3(a) * 1e-6;
}

}  // namespace petprior::testing

#endif  // PETPRIOR_METRIC_ORACLE_HPP
