#ifndef PETPRIOR_PREPROCESS_HPP
#define PETPRIOR_PREPROCESS_HPP

#include <optional>
#include <span>
#include <string>

#include "petprior/volume.hpp"

namespace petprior {

/// Linear map of [lower, upper] onto [0, 1] with clamping.
struct ClipScaleParams {
  double lower = 0.0;
  double upper = 1.0;

  static ClipScaleParams ct() { return {-1000.0, 800.0}; }
  static ClipScaleParams pet() { return {0.0, 12.0}; }
};

/// Percentile clip bounds and post-clip statistics of one volume.
struct ZScoreParams {
  double p_low = 0.5;
  double p_high = 99.5;
  double low_value = 0.0;
  double high_value = 0.0;
  double mu = 0.0;
  double sigma = 1.0;

  std::string to_json() const;
  static ZScoreParams from_json(const std::string& text);
};

struct ZScoreOptions {
  double p_low = 0.5;
  double p_high = 99.5;
  /// When set, percentiles and moments use only voxels where the mask is
  /// nonzero. Default: every voxel, air included.
  const Volume3D* stats_mask = nullptr;
};

/// Linear-interpolation percentile (order statistic at rank p/100 * (n-1)).
double percentile(std::span<const double> sorted_values, double p);

Volume3D clip_scale_normalize(const Volume3D& vol, const ClipScaleParams& params);

ZScoreParams fit_zscore_params(const Volume3D& vol, const ZScoreOptions& options = {});

Volume3D zscore_normalize(const Volume3D& vol, const ZScoreParams& params);

/// Identity on residual volumes; rejects values outside [-1, 1] naming the voxel.
Volume3D passthrough_residual(const Volume3D& vol);

}  // namespace petprior

#endif  // PETPRIOR_PREPROCESS_HPP
