#include "gradcheck.hpp"
#include "petprior/inpaint/model.hpp"
#include "petprior/phantom.hpp"
#include "petprior/preprocess.hpp"
#include "test_support.hpp"

using namespace petprior;
using namespace petprior::inpaint;
using namespace petprior::testing;

namespace {

InpaintNetConfig tiny_net() {
  InpaintNetConfig c;
  c.levels = 2;
  c.base_width = 8;
  c.max_width = 16;
  return c;
}

RGBSlice random_slice(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image ct(r, c), pet(r, c);
  for (Index i = 0; i < ct.size(); ++i) {
    ct(i) = u(rng);
    pet(i) = u(rng);
  }
  return make_rgb_slice(ct, pet, 0, "r");
}

/// Healthy slices of a few lesion-free phantoms at 32 x 32 in-plane.
std::vector<TrainingSlice> phantom_slices(int cases) {
  std::vector<TrainingSlice> out;
  for (int i = 0; i < cases; ++i) {
    PhantomSpec spec;
    spec.grid_size = {32, 32, 16};
    spec.n_lesions = 0;
    spec.seed = 100 + static_cast<std::uint64_t>(i);
    const auto p = generate_phantom(spec);
    auto s = healthy_training_slices(clip_scale_normalize(p.ct, ClipScaleParams::ct()),
                                     clip_scale_normalize(p.pet, ClipScaleParams::pet()), p.label,
                                     "h" + std::to_string(i));
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

/// Windowed SSIM evaluated directly per window with 2D Gaussian weights.
double ssim_oracle(const Image& a, const Image& b) {
  const int k = 11;
  double g[11], gs = 0.0;
  for (int i = 0; i < k; ++i) {
    g[i] = std::exp(-(i - 5) * (i - 5) / (2.0 * 1.5 * 1.5));
    gs += g[i];
  }
  double total = 0.0;
  int windows = 0;
  for (Index r0 = 0; r0 + k <= a.rows(); ++r0) {
    for (Index c0 = 0; c0 + k <= a.cols(); ++c0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          const double w = g[i] * g[j] / (gs * gs);
          const double x = a(r0 + i, c0 + j), y = b(r0 + i, c0 + j);
          ma += w * x;
          mb += w * y;
          saa += w * x * x;
          sbb += w * y * y;
          sab += w * x * y;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      const double c1 = 1e-4, c2 = 9e-4;
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return total / windows;
}

}  // namespace

TEST(InpaintNetwork, ShapeContractAndFiniteOutput) {
  PConvUNet<float> net(InpaintNetConfig{});
  net.init(1);
  std::mt19937_64 rng(2);
  Tensor<float> x(Shape{1, 3, 1, 64, 64});
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (Index i = 0; i < x.numel(); ++i) x.data()[i] = u(rng);
  const auto y = net.forward(x, Tensor<float>::constant(x.shape(), 1.0f), false);
  EXPECT_TRUE(y.shape() == x.shape());
  EXPECT_TRUE(y.data().allFinite());
  EXPECT_TRUE((y.data() >= 0.0f).all() && (y.data() <= 1.0f).all());
  EXPECT_TRUE((net.encoder_mask(4).data() == 1.0f).all());
}

TEST(InpaintNetwork, RejectsIndivisibleInput) {
  PConvUNet<float> net(tiny_net());
  Tensor<float> x(Shape{1, 3, 1, 30, 32});
  EXPECT_ERROR_CODE(net.forward(x, x, false), ErrorCode::kShapeMismatch);
}

TEST(InpaintNetwork, OneStepLowersLossForMostSeeds) {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PConvUNet<float> net(tiny_net());
    net.init(seed);
    std::mt19937_64 rng(seed + 50);
    const Shape s{2, 3, 1, 32, 32};
    Tensor<float> target(s), mask = Tensor<float>::constant(s, 1.0f);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (Index i = 0; i < target.numel(); ++i) target.data()[i] = u(rng);
    for (Index n = 0; n < 2; ++n)
      for (Index c = 0; c < 3; ++c)
        for (Index y = 8; y < 20; ++y)
          for (Index x = 10; x < 22; ++x) mask.at(n, c, 0, y, x) = 0.0f;
    const Tensor<float> input(s, target.data() * mask.data());
    FeaturePyramid<float> features;
    nn::Adam<float> opt(net.parameters(), 1e-4);
    auto step_loss = [&](bool update) {
      opt.zero_grad();
      const auto out = net.forward(input, mask, true);
      auto loss = inpaint_loss(out, target, mask, &features);
      if (update) {
        net.backward(loss.grad);
        opt.step();
      }
      return loss.total;
    };
    const float before = step_loss(true);
    const float after = step_loss(false);
    improved += after < before ? 1 : 0;
  }
  EXPECT_GE(improved, 8);
}

TEST(InpaintLoss, IdenticalImagesGiveZero) {
  std::mt19937_64 rng(3);
  const auto t = uniform_tensor(Shape{1, 3, 1, 16, 16}, rng, 0, 1);
  const auto m = block_hole_mask(t.shape(), rng);
  FeaturePyramid<double> f;
  const auto l = inpaint_loss(t, t, m, &f);
  EXPECT_EQ(l.valid, 0.0);
  EXPECT_EQ(l.hole, 0.0);
  EXPECT_EQ(l.perceptual, 0.0);
  EXPECT_EQ(l.style, 0.0);
  EXPECT_EQ(l.total, l.tv * 0.1);
}

TEST(InpaintLoss, HoleOnlyHandValue) {
  std::mt19937_64 rng(4);
  const auto target = uniform_tensor(Shape{1, 3, 1, 8, 8}, rng, 0, 0.4);
  const auto mask = block_hole_mask(target.shape(), rng);
  const Tensor<double> pred(target.shape(), target.data() + 0.5 * (1.0 - mask.data()));
  InpaintLossWeights w{0.0, 1.0, 0.0, 0.0, 0.0};
  const auto l = inpaint_loss<double>(pred, target, mask, nullptr, w);
  EXPECT_NEAR(l.total, 0.5, 1e-12);
  EXPECT_EQ(l.valid, 0.0);
}

TEST(InpaintLoss, ConstantCompositeHasNoTv) {
  const Shape s{1, 3, 1, 8, 8};
  const auto c = Tensor<double>::constant(s, 0.3);
  std::mt19937_64 rng(5);
  const auto l = inpaint_loss<double>(c, c, block_hole_mask(s, rng), nullptr, {1.0, 6.0, 0.0, 0.0, 0.1});
  EXPECT_EQ(l.tv, 0.0);
}

TEST(InpaintLoss, ExtractorRequiredForFeatureTerms) {
  const auto c = Tensor<double>::constant(Shape{1, 3, 1, 8, 8}, 0.3);
  EXPECT_ERROR_CODE(inpaint_loss<double>(c, c, c, nullptr), ErrorCode::kInvalidArgument);
  EXPECT_ERROR_CODE(InpaintLossWeights({-1.0, 1.0, 0.0, 0.0, 0.0}).validate(), ErrorCode::kInvalidArgument);
}

TEST(InpaintLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) EXPECT_LT(inpaint_loss_gradient_error(seed), 1e-3) << "seed " << seed;
}

TEST(InpaintModel, AllValidMaskIsIdentity) {
  InpaintModel model(tiny_net(), 1);
  const auto s = random_slice(30, 27, 1);
  const auto out = model.inpaint(s, HoleMask::all_valid(30, 27));
  for (int c = 0; c < 3; ++c) EXPECT_TRUE((out.channels[c] == s.channels[c]).all());
  EXPECT_EQ(model.forward_count(), 0u);
}

TEST(InpaintModel, ValidPixelsPassThroughBitwise) {
  InpaintModel model(tiny_net(), 2);
  const auto s = random_slice(37, 41, 2);
  MaskGenConfig cfg;
  std::mt19937_64 rng(3);
  const auto holes = random_irregular_mask(37, 41, cfg, rng);
  const auto out = inpaint_slice(model, s, holes);
  EXPECT_EQ(out.rows(), 37);
  EXPECT_EQ(out.cols(), 41);
  for (int c = 0; c < 3; ++c) {
    for (Index i = 0; i < holes.mask.size(); ++i) {
      if (holes.mask(i) == 1) ASSERT_EQ(out.channels[c](i), s.channels[c](i));
    }
  }
  EXPECT_EQ(model.forward_count(), 1u);
}

TEST(InpaintModel, CheckpointRoundTripReproducesOutput) {
  TempDir dir("inpaint_ckpt");
  InpaintModel model(tiny_net(), 9);
  model.mark_trained(2);
  model.save(dir / "m.ckpt");
  auto back = InpaintModel::load(dir / "m.ckpt");
  EXPECT_TRUE(back.trained());
  EXPECT_EQ(back.phase(), 2);
  const auto s = random_slice(32, 32, 4);
  CandidateRegions r;
  r.regions.push_back(Region{{{16, 16}}});
  const auto holes = candidate_hole_mask(r, 32, 32, 6.0);
  const auto a = model.inpaint(s, holes), b = back.inpaint(s, holes);
  for (int c = 0; c < 3; ++c) EXPECT_TRUE((a.channels[c] == b.channels[c]).all());
}

TEST(InpaintTraining, PhaseTwoLrMustDrop) {
  InpaintTrainConfig cfg;
  cfg.lr_phase2 = cfg.lr_phase1;
  EXPECT_ERROR_CODE(cfg.validate(), ErrorCode::kInvariant);
}

TEST(InpaintTraining, LabelledSliceIsLeak) {
  auto slices = phantom_slices(1);
  ASSERT_GT(slices.size(), 3u);
  slices[3].slice.case_id = "leaky";
  slices[3].slice.z_index = 5;
  slices[3].label(4, 4) = 1.0f;
  InpaintTrainConfig cfg;
  cfg.network = tiny_net();
  cfg.epochs_phase1 = cfg.epochs_phase2 = 1;
  try {
    train_inpainter(slices, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLeakage);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("leaky"), std::string::npos) << msg;
    EXPECT_NE(msg.find("5"), std::string::npos) << msg;
  }
}

TEST(InpaintTraining, HealthySlicesSkipLabelledPlanes) {
  PhantomSpec spec;
  spec.seed = 4;
  const auto p = generate_phantom(spec);
  const auto slices = healthy_training_slices(clip_scale_normalize(p.ct, ClipScaleParams::ct()),
                                              clip_scale_normalize(p.pet, ClipScaleParams::pet()), p.label, "c");
  Index labelled = 0;
  for (Index z = 0; z < p.label.grid().nz; ++z) labelled += (p.label.plane(z) != 0.0f).any() ? 1 : 0;
  ASSERT_GT(labelled, 0);
  EXPECT_EQ(static_cast<Index>(slices.size()), p.label.grid().nz - labelled);
  for (const auto& s : slices) EXPECT_FALSE((p.label.plane(s.slice.z_index) != 0.0f).any());
}

TEST(InpaintTraining, TwoPlusTwoEpochsReduceLoss) {
  TempDir dir("inpaint_train");
  InpaintTrainConfig cfg;
  cfg.network = tiny_net();
  cfg.epochs_phase1 = 2;
  cfg.epochs_phase2 = 2;
  cfg.lr_phase1 = 1e-3;
  cfg.lr_phase2 = 5e-4;
  cfg.seed = 7;
  auto result = train_inpainter(phantom_slices(2), cfg, dir.path());
  ASSERT_EQ(result.log.size(), 4u);
  EXPECT_LT(result.log.back().total, result.log.front().total);
  EXPECT_EQ(result.log[2].phase, 2);
  EXPECT_DOUBLE_EQ(result.log[2].lr, 5e-4);
  EXPECT_TRUE(result.model.trained());
  EXPECT_TRUE(std::filesystem::exists(dir / "phase1.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "phase2.ckpt"));
}

TEST(InpaintTraining, DeterministicForSeed) {
  InpaintTrainConfig cfg;
  cfg.network = tiny_net();
  cfg.epochs_phase1 = 1;
  cfg.epochs_phase2 = 1;
  cfg.lr_phase1 = 1e-3;
  cfg.lr_phase2 = 5e-4;
  cfg.seed = 3;
  const auto slices = phantom_slices(1);
  auto a = train_inpainter(slices, cfg), b = train_inpainter(slices, cfg);
  EXPECT_EQ(a.log.back().total, b.log.back().total);
}

TEST(Quality, IdenticalImages) {
  const auto a = random_slice(16, 16, 1).channels[0];
  const auto q = quality_metrics(a, a);
  EXPECT_EQ(q.mse, 0.0);
  EXPECT_NEAR(q.ssim, 1.0, 1e-12);
  EXPECT_EQ(q.psnr, kPsnrCapDb);
}

TEST(Quality, ClosedFormPsnr) {
  Image a = Image::Constant(16, 16, 0.3f), b = a + 0.1f;
  const auto q = quality_metrics(a, b);
  EXPECT_NEAR(q.mse, 0.01, 1e-7);
  EXPECT_NEAR(q.psnr, 20.0, 1e-5);
  const auto z = quality_metrics(Image::Zero(12, 12), Image::Ones(12, 12));
  EXPECT_DOUBLE_EQ(z.mse, 1.0);
  EXPECT_DOUBLE_EQ(z.psnr, 0.0);
}

TEST(Quality, SsimMatchesWindowOracleAndIsSymmetric) {
  const auto a = random_slice(19, 23, 5).channels[0];
  const auto b = random_slice(19, 23, 6).channels[0];
  const auto ab = quality_metrics(a, b), ba = quality_metrics(b, a);
  EXPECT_NEAR(ab.ssim, ssim_oracle(a, b), 1e-9);
  EXPECT_DOUBLE_EQ(ab.ssim, ba.ssim);
  EXPECT_ERROR_CODE(quality_metrics(Image::Zero(10, 12), Image::Zero(10, 12)), ErrorCode::kShapeMismatch);
}

TEST(Quality, PadReflectMirrors) {
  Image img(3, 2);
  img << 1, 2, 3, 4, 5, 6;
  const auto p = pad_reflect(img, 5, 3);
  EXPECT_EQ(p(3, 0), img(1, 0));
  EXPECT_EQ(p(4, 0), img(0, 0));
  EXPECT_EQ(p(0, 2), img(0, 0));
  EXPECT_TRUE((p.topLeftCorner(3, 2) == img).all());
}
