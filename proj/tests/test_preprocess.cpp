#include <algorithm>
#include <numeric>

#include "oracle_tables.hpp"
#include "petprior/preprocess.hpp"
#include "test_support.hpp"

using namespace petprior;
using petprior::testing::ClipKind;
using petprior::testing::kClipScaleTable;

namespace {

Volume3D line_volume(std::vector<float> values, Modality m) {
  const GridSize g{static_cast<Index>(values.size()), 1, 1};
  return Volume3D(g, Spacing::Ones(), Origin::Zero(), m, Eigen::Map<Eigen::ArrayXf>(values.data(), values.size()));
}

double mean(const Eigen::ArrayXf& a) { return a.cast<double>().mean(); }
double stddev(const Eigen::ArrayXf& a) {
  const double m = mean(a);
  return std::sqrt((a.cast<double>() - m).square().mean());
}

}  // namespace

TEST(ClipScale, MatchesHandTable) {
  for (const auto& c : kClipScaleTable) {
    const bool ct = c.kind == ClipKind::kCt;
    const auto v = line_volume({c.input}, ct ? Modality::kCtHu : Modality::kPetSuv);
    const auto out = clip_scale_normalize(v, ct ? ClipScaleParams::ct() : ClipScaleParams::pet());
    EXPECT_NEAR(out.data()[0], c.expected, 1e-6) << "input " << c.input;
    EXPECT_EQ(out.modality(), Modality::kNormalized);
  }
}

TEST(ClipScale, MonotoneAndBounded) {
  std::vector<float> xs;
  for (float x = -3000.0f; x <= 3000.0f; x += 7.3f) xs.push_back(x);
  const auto out = clip_scale_normalize(line_volume(xs, Modality::kCtHu), ClipScaleParams::ct());
  for (Index i = 0; i < out.data().size(); ++i) {
    ASSERT_GE(out.data()[i], 0.0f);
    ASSERT_LE(out.data()[i], 1.0f);
    if (i > 0) ASSERT_GE(out.data()[i], out.data()[i - 1]);
  }
}

TEST(ClipScale, IdentityParamsAreIdempotent) {
  std::vector<float> xs{0.0f, 0.125f, 0.5f, 0.999f, 1.0f};
  const auto v = line_volume(xs, Modality::kNormalized);
  const auto once = clip_scale_normalize(v, {0.0, 1.0});
  EXPECT_TRUE((once.data() == v.data()).all());
  EXPECT_TRUE((clip_scale_normalize(once, {0.0, 1.0}).data() == once.data()).all());
}

TEST(Percentile, LinearInterpolationOnOneToThousand) {
  std::vector<float> xs(1000);
  std::iota(xs.begin(), xs.end(), 1.0f);
  std::mt19937_64 rng(1);
  std::shuffle(xs.begin(), xs.end(), rng);
  const auto p = fit_zscore_params(line_volume(xs, Modality::kCtHu));
  EXPECT_NEAR(p.low_value, 5.995, 1e-9);
  EXPECT_NEAR(p.high_value, 995.005, 1e-9);
}

TEST(Percentile, SingleOutlierDoesNotMoveHighBound) {
  std::vector<float> xs(401);
  std::iota(xs.begin(), xs.end(), 0.0f);
  const double base = fit_zscore_params(line_volume(xs, Modality::kPetSuv)).high_value;
  xs.back() = 1e6f;
  EXPECT_DOUBLE_EQ(fit_zscore_params(line_volume(xs, Modality::kPetSuv)).high_value, base);
}

TEST(ZScore, ConstantVolumeIsDegenerate) {
  EXPECT_ERROR_CODE(fit_zscore_params(line_volume(std::vector<float>(50, 3.0f), Modality::kCtHu)),
                    ErrorCode::kDegenerateInput);
}

TEST(ZScore, SelfFitGivesUnitMoments) {
  std::mt19937_64 rng(9);
  std::lognormal_distribution<float> d(0.0f, 1.2f);
  std::vector<float> xs(20000);
  for (auto& x : xs) x = d(rng);
  const auto v = line_volume(xs, Modality::kPetSuv);
  const auto z = zscore_normalize(v, fit_zscore_params(v));
  EXPECT_LE(std::abs(mean(z.data())), 1e-3);
  EXPECT_NEAR(stddev(z.data()), 1.0, 1e-3);
}

TEST(ZScore, MuMapsToZeroAndLowTailClips) {
  ZScoreParams p;
  p.low_value = -2.0;
  p.high_value = 10.0;
  p.mu = 4.0;
  p.sigma = 2.0;
  const auto z = zscore_normalize(line_volume({4.0f, -2.0f, -50.0f, 10.0f, 99.0f}, Modality::kCtHu), p);
  EXPECT_EQ(z.data()[0], 0.0f);
  EXPECT_EQ(z.data()[1], z.data()[2]);
  EXPECT_EQ(z.data()[3], z.data()[4]);
  EXPECT_FLOAT_EQ(z.data()[1], -3.0f);
}

TEST(ZScore, ParamsSerialiseLosslessly) {
  ZScoreParams p;
  p.low_value = -0.1;
  p.high_value = 1.0 / 3.0;
  p.mu = 0.2;
  p.sigma = 0.7;
  const auto q = ZScoreParams::from_json(p.to_json());
  EXPECT_EQ(q.high_value, p.high_value);
  EXPECT_EQ(q.sigma, p.sigma);
}

TEST(Residual, PassthroughKeepsLegalValues) {
  auto r = line_volume({-1.0f, 0.0f, 0.0f, 1.0f}, Modality::kResidualPet);
  EXPECT_TRUE((passthrough_residual(r).data() == r.data()).all());
  auto zeros = line_volume(std::vector<float>(6, 0.0f), Modality::kResidualCt);
  EXPECT_TRUE((passthrough_residual(zeros).data() == 0.0f).all());
}

TEST(Residual, OutOfRangeNamesVoxel) {
  const GridSize g{3, 2, 2};
  Volume3D::Array a = Volume3D::Array::Zero(g.count());
  const Volume3D probe(g, Spacing::Ones(), Origin::Zero(), Modality::kResidualCt, a);
  a[probe.index(2, 1, 1)] = 1.01f;
  try {
    passthrough_residual(Volume3D(g, Spacing::Ones(), Origin::Zero(), Modality::kResidualCt, a));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRange);
    EXPECT_NE(std::string(e.what()).find("(2, 1, 1)"), std::string::npos) << e.what();
  }
}
