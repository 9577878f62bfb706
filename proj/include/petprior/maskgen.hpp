#ifndef PETPRIOR_MASKGEN_HPP
#define PETPRIOR_MASKGEN_HPP

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "petprior/slicer.hpp"
#include "petprior/volume.hpp"

namespace petprior {

enum class PrimitiveKind { kCircle, kSquare, kEllipse };

/// A filled shape in pixel coordinates (row, col). For circles `a` is the
/// radius; squares use `a` as half side; ellipses use semi-axes (a, b).
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kCircle;
  double row = 0.0;
  double col = 0.0;
  double a = 0.0;
  double b = 0.0;
  double angle = 0.0;  // radians
};

using BinaryImage = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// 1 = valid pixel, 0 = hole. `primitives` records the shapes whose union is
/// the hole set.
struct HoleMask {
  BinaryImage mask;
  std::vector<Primitive> primitives;

  Index rows() const { return mask.rows(); }
  Index cols() const { return mask.cols(); }
  Index hole_count() const { return mask.size() - mask.cast<Index>().sum(); }
  double corruption_fraction() const {
    return mask.size() == 0 ? 0.0 : static_cast<double>(hole_count()) / static_cast<double>(mask.size());
  }
  Image as_float() const { return mask.cast<float>(); }

  static HoleMask all_valid(Index rows, Index cols) { return {BinaryImage::Ones(rows, cols), {}}; }
};

struct MaskGenConfig {
  std::pair<double, double> target_fraction_range{0.25, 0.30};
  std::pair<int, int> primitive_count_range{5, 12};
  /// Area of one primitive as a fraction of the image.
  std::pair<double, double> primitive_size_range{0.01, 0.08};
  std::uint64_t seed = 0;
  int max_attempts = 400;

  void validate() const;
};

/// Burns the hole set of `primitives` into an all-valid mask.
BinaryImage rasterize_primitives(const std::vector<Primitive>& primitives, Index rows, Index cols);

/// Random union of circles, squares and ellipses.
///
/// Each mask draws a target fraction t uniformly from the configured range
/// widened by 0.05 on both sides, then redraws whole primitive sets until the
/// corruption lands within 0.02 of t. Since t is symmetric about the range
/// midpoint, the population mean sits inside the configured range.
HoleMask random_irregular_mask(Index rows, Index cols, const MaskGenConfig& config,
                               std::mt19937_64& rng);

struct Region {
  std::vector<std::pair<Index, Index>> pixels;  // (row, col)

  std::pair<double, double> centroid() const;
};

struct CandidateRegions {
  std::vector<Region> regions;
  double threshold_suv = 0.0;
};

/// Conventional FDG-PET cutoff; the method only calls for "a simple threshold".
inline constexpr double kDefaultPetThresholdSuv = 2.5;
inline constexpr double kDefaultHoleRadiusPx = 17.0;

/// 8-connected components of {SUV >= threshold} in one plane.
CandidateRegions threshold_components(const Image& pet_suv_plane, double threshold_suv);

/// Per axial slice components of the thresholded PET volume.
std::vector<CandidateRegions> pet_candidate_regions(const Volume3D& pet_suv, double threshold_suv);

/// One filled disk per region, centered on the region centroid rounded to the
/// nearest pixel. A pixel is a hole iff its center is within `radius_px` of
/// that center (Euclidean, inclusive). Disks are clipped at the border.
HoleMask candidate_hole_mask(const CandidateRegions& regions, Index rows, Index cols,
                             double radius_px = kDefaultHoleRadiusPx);

}  // namespace petprior

#endif  // PETPRIOR_MASKGEN_HPP
