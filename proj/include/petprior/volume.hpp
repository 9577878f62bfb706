#ifndef PETPRIOR_VOLUME_HPP
#define PETPRIOR_VOLUME_HPP

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include "petprior/error.hpp"

namespace petprior {

using Index = Eigen::Index;

enum class Modality { kCtHu, kPetSuv, kResidualCt, kResidualPet, kLabel, kNormalized };

std::string_view to_string(Modality modality);
Modality modality_from_string(std::string_view name);

inline bool is_residual(Modality m) {
  return m == Modality::kResidualCt || m == Modality::kResidualPet;
}

/// Voxel counts along x, y, z. Axis 2 is axial.
struct GridSize {
  Index nx = 0;
  Index ny = 0;
  Index nz = 0;

  Index count() const { return nx * ny * nz; }
  Index plane_count() const { return nx * ny; }
  friend bool operator==(const GridSize&, const GridSize&) = default;
};

inline std::string to_string(const GridSize& g) {
  std::ostringstream os;
  os << g.nx << "x" << g.ny << "x" << g.nz;
  return os.str();
}

using Spacing = Eigen::Vector3d;  // mm per voxel
using Origin = Eigen::Vector3d;   // mm

/// Dense scalar grid with physical geometry. Storage is x-fastest, matching
/// the NIfTI on-disk order. Values are immutable once constructed; every
/// transformation returns a new volume.
template <typename Scalar>
class Volume {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Volume() = default;

  Volume(GridSize grid, Spacing spacing, Origin origin, Modality modality, Array data)
      : grid_(grid), spacing_(std::move(spacing)), origin_(std::move(origin)),
        modality_(modality), data_(std::move(data)) {
    require(grid_.nx > 0 && grid_.ny > 0 && grid_.nz > 0, ErrorCode::kInvariant,
            "volume grid must be non-empty, got " + to_string(grid_));
    require((spacing_.array() > 0.0).all() && spacing_.allFinite(), ErrorCode::kInvariant,
            "voxel spacing must be strictly positive");
    require(data_.size() == grid_.count(), ErrorCode::kShapeMismatch,
            "data size does not match grid " + to_string(grid_));
  }

  static Volume constant(GridSize grid, Spacing spacing, Modality modality, Scalar value,
                         Origin origin = Origin::Zero()) {
    return Volume(grid, std::move(spacing), std::move(origin), modality,
                  Array::Constant(grid.count(), value));
  }

  const GridSize& grid() const { return grid_; }
  const Spacing& spacing() const { return spacing_; }
  const Origin& origin() const { return origin_; }
  Modality modality() const { return modality_; }
  const Array& data() const { return data_; }

  Index index(Index x, Index y, Index z) const { return x + grid_.nx * (y + grid_.ny * z); }
  Scalar operator()(Index x, Index y, Index z) const { return data_[index(x, y, z)]; }

  double voxel_volume_mm3() const { return spacing_.prod(); }

  /// Axial plane z as an nx-by-ny array (column-major, x fastest).
  Plane plane(Index z) const {
    return Eigen::Map<const Plane>(data_.data() + z * grid_.plane_count(), grid_.nx, grid_.ny);
  }

  /// Same geometry, new values.
  template <typename Other>
  Volume<Other> with_data(Eigen::Array<Other, Eigen::Dynamic, 1> data, Modality modality) const {
    return Volume<Other>(grid_, spacing_, origin_, modality, std::move(data));
  }

  template <typename Other>
  bool same_grid(const Volume<Other>& other) const {
    return grid_ == other.grid() &&
           ((spacing_ - other.spacing()).array().abs() <= 1e-6 * spacing_.array()).all();
  }

  /// Value-level invariants of the modality: binary labels, residuals in [-1, 1].
  void check_invariants() const {
    if (modality_ == Modality::kLabel) {
      for (Index i = 0; i < data_.size(); ++i) {
        if (data_[i] != Scalar(0) && data_[i] != Scalar(1))
          fail(ErrorCode::kInvariant, "label volume holds non-binary value at " + coord(i));
      }
    } else if (is_residual(modality_)) {
      for (Index i = 0; i < data_.size(); ++i) {
        if (!(data_[i] >= Scalar(-1) && data_[i] <= Scalar(1)))
          fail(ErrorCode::kRange, "residual value outside [-1, 1] at " + coord(i));
      }
    }
  }

  std::string coord(Index linear) const {
    std::ostringstream os;
    const Index x = linear % grid_.nx;
    const Index y = (linear / grid_.nx) % grid_.ny;
    const Index z = linear / grid_.plane_count();
    os << "(" << x << ", " << y << ", " << z << ")";
    return os.str();
  }

 private:
  GridSize grid_;
  Spacing spacing_ = Spacing::Ones();
  Origin origin_ = Origin::Zero();
  Modality modality_ = Modality::kNormalized;
  Array data_;
};

using Volume3D = Volume<float>;

template <typename A, typename B>
void require_same_grid(const Volume<A>& a, const Volume<B>& b, const std::string& what) {
  require(a.same_grid(b), ErrorCode::kGridMismatch,
          what + ": grid mismatch " + to_string(a.grid()) + " vs " + to_string(b.grid()));
}

}  // namespace petprior

#endif  // PETPRIOR_VOLUME_HPP
