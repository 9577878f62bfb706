#ifndef PETPRIOR_SEGMENT_AUGMENT_HPP
#define PETPRIOR_SEGMENT_AUGMENT_HPP

#include <random>
#include <utility>

#include <Eigen/Dense>

#include "petprior/nn/tensor.hpp"

namespace petprior::segment {

using nn::Index;
using nn::Shape;
using nn::Tensor;

struct AugmentationConfig {
  double p_rotation = 0.2;
  double rotation_range_deg = 30.0;  // symmetric, per axis
  double p_scale = 0.2;
  std::pair<double, double> scale_range{0.7, 1.4};
  double p_elastic = 0.2;
  std::pair<double, double> elastic_alpha_range{0.0, 3.0};  // peak displacement, voxels
  std::pair<double, double> elastic_sigma_range{5.0, 8.0};  // smoothing, voxels
  double p_gamma = 0.3;
  std::pair<double, double> gamma_range{0.7, 1.5};
  /// Channels [0, gamma_channels) receive gamma; the rest (residuals) do not.
  Index gamma_channels = 2;

  static AugmentationConfig none();
  void validate() const;
};

/// Resampling map from output voxel to source voxel:
///   src = matrix * (out - center) + center + displacement(out)
/// with coordinates ordered (x, y, z) and center at the patch midpoint.
struct SpatialTransform {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
  /// Per-voxel displacement (x, y, z), each D*H*W long, or empty.
  Eigen::ArrayXXf displacement;

  static SpatialTransform rotation(int axis, double radians);
  bool is_identity() const;

  /// Trilinear resampling of every channel; outside samples read 0.
  Tensor<float> apply_linear(const Tensor<float>& x) const;
  /// Nearest-neighbour resampling, for labels.
  Tensor<float> apply_nearest(const Tensor<float>& x) const;
};

/// Draws a transform for a patch of the given shape; identity when no
/// spatial augmentation fires.
SpatialTransform sample_spatial_transform(const Shape& shape, const AugmentationConfig& config, std::mt19937_64& rng);

/// Gamma on the first `channels` channels: per channel rescale to [0, 1],
/// raise to `gamma`, map back to the original range.
void apply_gamma(Tensor<float>& x, Index channels, double gamma);

/// Same geometric transform on every channel (trilinear) and on the label
/// (nearest); intensity transforms never touch the label.
std::pair<Tensor<float>, Tensor<float>> augment(const Tensor<float>& patch, const Tensor<float>& label,
                                                const AugmentationConfig& config, std::mt19937_64& rng);

}  // namespace petprior::segment

#endif  // PETPRIOR_SEGMENT_AUGMENT_HPP
