#include "petprior/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "json.hpp"

namespace petprior {

std::string ZScoreParams::to_json() const {
  return nlohmann::json{{"p_low", p_low},         {"p_high", p_high}, {"low_value", low_value},
                        {"high_value", high_value}, {"mu", mu},         {"sigma", sigma}}
      .dump();
}

ZScoreParams ZScoreParams::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ZScoreParams p;
  p.p_low = j.at("p_low").get<double>();
  p.p_high = j.at("p_high").get<double>();
  p.low_value = j.at("low_value").get<double>();
  p.high_value = j.at("high_value").get<double>();
  p.mu = j.at("mu").get<double>();
  p.sigma = j.at("sigma").get<double>();
  return p;
}

double percentile(std::span<const double> sorted_values, double p) {
  require(!sorted_values.empty(), ErrorCode::kEmptyInput, "percentile of empty set");
  const double rank = p / 100.0 * static_cast<double>(sorted_values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted_values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

Volume3D clip_scale_normalize(const Volume3D& vol, const ClipScaleParams& params) {
  require(params.lower < params.upper, ErrorCode::kInvalidArgument,
          "clip-scale params need lower < upper");
  require(vol.modality() == Modality::kCtHu || vol.modality() == Modality::kPetSuv ||
              vol.modality() == Modality::kNormalized,
          ErrorCode::kInvalidArgument,
          "clip-scale expects CT_HU or PET_SUV, got " + std::string(to_string(vol.modality())));
  const auto lower = static_cast<float>(params.lower);
  const auto range = static_cast<float>(params.upper - params.lower);
  Eigen::ArrayXf out = ((vol.data() - lower) / range).cwiseMax(0.0f).cwiseMin(1.0f);
  return vol.with_data<float>(std::move(out), Modality::kNormalized);
}

ZScoreParams fit_zscore_params(const Volume3D& vol, const ZScoreOptions& options) {
  require(options.p_low <= options.p_high, ErrorCode::kInvalidArgument,
          "z-score percentiles must be ordered");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(vol.data().size()));
  if (options.stats_mask != nullptr) {
    require_same_grid(vol, *options.stats_mask, "z-score statistics mask");
    for (Index i = 0; i < vol.data().size(); ++i) {
      if (options.stats_mask->data()[i] != 0.0f) values.push_back(vol.data()[i]);
    }
  } else {
    values.assign(vol.data().begin(), vol.data().end());
  }
  require(values.size() >= 2, ErrorCode::kDegenerateInput, "z-score fit needs at least 2 voxels");
  std::sort(values.begin(), values.end());
  require(values.front() != values.back(), ErrorCode::kDegenerateInput,
          "constant volume: z-score sigma would be 0");

  ZScoreParams p;
  p.p_low = options.p_low;
  p.p_high = options.p_high;
  p.low_value = percentile(values, options.p_low);
  p.high_value = percentile(values, options.p_high);

  double sum = 0.0;
  for (double v : values) sum += std::clamp(v, p.low_value, p.high_value);
  p.mu = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) {
    const double d = std::clamp(v, p.low_value, p.high_value) - p.mu;
    ss += d * d;
  }
  p.sigma = std::sqrt(ss / static_cast<double>(values.size()));
  require(p.sigma > 0.0, ErrorCode::kDegenerateInput,
          "z-score sigma is 0 after percentile clipping");
  return p;
}

Volume3D zscore_normalize(const Volume3D& vol, const ZScoreParams& params) {
  require(params.sigma > 0.0, ErrorCode::kInvalidArgument, "z-score sigma must be positive");
  require(params.low_value <= params.high_value, ErrorCode::kInvalidArgument,
          "z-score clip bounds must be ordered");
  const auto lo = static_cast<float>(params.low_value);
  const auto hi = static_cast<float>(params.high_value);
  const auto mu = static_cast<float>(params.mu);
  const auto sigma = static_cast<float>(params.sigma);
  Eigen::ArrayXf out = (vol.data().cwiseMax(lo).cwiseMin(hi) - mu) / sigma;
  return vol.with_data<float>(std::move(out), Modality::kNormalized);
}

Volume3D passthrough_residual(const Volume3D& vol) {
  require(is_residual(vol.modality()), ErrorCode::kInvalidArgument,
          "expected a residual volume, got " + std::string(to_string(vol.modality())));
  vol.check_invariants();
  return vol;
}

}  // namespace petprior
