#ifndef PETPRIOR_DISK_ORACLE_HPP
#define PETPRIOR_DISK_ORACLE_HPP

#include "petprior/volume.hpp"

namespace petprior::testing {

/// Brute-force disk: lattice points (r, c) with (r - r0)^2 + (c - c0)^2 <= R^2 inside the image.
inline Index disk_oracle(Index rows, Index cols, Index r0, Index c0, double radius) {
  Index n = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const double d2 = static_cast<double>((r - r0) * (r - r0) + (c - c0) * (c - c0));
      n += d2 <= radius * radius ? 1 : 0;
    }
  }
  return n;
}

}  // namespace petprior::testing

#endif  // PETPRIOR_DISK_ORACLE_HPP
