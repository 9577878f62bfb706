#include "petprior/phantom.hpp"
#include "petprior/preprocess.hpp"
#include "petprior/slicer.hpp"
#include "test_support.hpp"

using namespace petprior;

namespace {

Volume3D constant_norm(GridSize g, float v) { return Volume3D::constant(g, Spacing::Ones(), Modality::kNormalized, v); }

Image random_image(Index r, Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(r, c);
  for (Index i = 0; i < img.size(); ++i) img(i) = u(rng);
  return img;
}

}  // namespace

TEST(Slicer, ConstantVolumesGiveConstantChannels) {
  const auto stack = volume_to_rgb_slices(constant_norm({6, 5, 4}, 0.25f), constant_norm({6, 5, 4}, 0.75f), "k");
  ASSERT_EQ(stack.slices.size(), 4u);
  for (std::size_t z = 0; z < 4; ++z) {
    const auto& s = stack.slices[z];
    EXPECT_EQ(s.z_index, static_cast<Index>(z));
    EXPECT_EQ(s.case_id, "k");
    EXPECT_TRUE((s.channels[0] == 0.25f).all());
    EXPECT_TRUE((s.channels[1] == 0.75f).all());
    EXPECT_TRUE((s.channels[2] == 0.25f).all());
  }
}

TEST(Slicer, PetChannelIsThePetPlane) {
  PhantomSpec spec;
  spec.seed = 11;
  const auto p = generate_phantom(spec);
  const auto ct = clip_scale_normalize(p.ct, ClipScaleParams::ct());
  const auto pet = clip_scale_normalize(p.pet, ClipScaleParams::pet());
  const auto stack = volume_to_rgb_slices(ct, pet);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Index k = std::uniform_int_distribution<Index>(0, ct.grid().nz - 1)(rng);
    const auto& s = stack.slices[static_cast<std::size_t>(k)];
    EXPECT_TRUE((s.channels[1] == pet.plane(k)).all());
    EXPECT_TRUE((s.channels[0] == s.channels[2]).all());
  }
}

TEST(Slicer, MismatchedDepthIsGridMismatch) {
  EXPECT_ERROR_CODE(volume_to_rgb_slices(constant_norm({4, 4, 3}, 0.1f), constant_norm({4, 4, 4}, 0.1f)),
                    ErrorCode::kGridMismatch);
}

TEST(Slicer, ResidualChannels) {
  Image one = Image::Ones(4, 4), zero = Image::Zero(4, 4);
  const auto a = make_rgb_slice(zero, one, 0), b = make_rgb_slice(zero, zero, 0);
  const auto same = split_residual_channels(a, a);
  EXPECT_TRUE((same.ct == 0.0f).all() && (same.pet == 0.0f).all());
  EXPECT_TRUE((split_residual_channels(a, b).pet == 1.0f).all());
}

TEST(Slicer, ResidualRangeAndAntisymmetry) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto a = make_rgb_slice(random_image(9, 7, rng), random_image(9, 7, rng), 3);
    const auto b = make_rgb_slice(random_image(9, 7, rng), random_image(9, 7, rng), 3);
    const auto ab = split_residual_channels(a, b), ba = split_residual_channels(b, a);
    EXPECT_TRUE((ab.ct >= -1.0f).all() && (ab.ct <= 1.0f).all());
    EXPECT_TRUE((ab.pet >= -1.0f).all() && (ab.pet <= 1.0f).all());
    EXPECT_TRUE((ab.ct == -ba.ct).all());
    EXPECT_TRUE((ab.pet == -ba.pet).all());
  }
}

TEST(Slicer, RestackRoundTripIsBitwise) {
  PhantomSpec spec;
  spec.seed = 12;
  const auto p = generate_phantom(spec);
  const auto ct = clip_scale_normalize(p.ct, ClipScaleParams::ct());
  const auto pet = clip_scale_normalize(p.pet, ClipScaleParams::pet());
  const auto stack = volume_to_rgb_slices(ct, pet);
  std::vector<Image> ct_planes, pet_planes;
  for (const auto& s : stack.slices) {
    ct_planes.push_back(s.channels[2]);
    pet_planes.push_back(s.channels[1]);
  }
  EXPECT_TRUE((stack_to_volume(ct_planes, ct, Modality::kNormalized).data() == ct.data()).all());
  EXPECT_TRUE((stack_to_volume(pet_planes, pet, Modality::kNormalized).data() == pet.data()).all());
}

TEST(Slicer, StackZerosAsLabelAndCountMismatch) {
  const auto like = constant_norm({5, 4, 8}, 0.0f);
  std::vector<Image> planes(8, Image::Zero(5, 4));
  const auto lab = stack_to_volume(planes, like, Modality::kLabel);
  EXPECT_EQ(lab.modality(), Modality::kLabel);
  EXPECT_EQ(lab.data().sum(), 0.0f);
  planes.pop_back();
  EXPECT_ERROR_CODE(stack_to_volume(planes, like, Modality::kLabel), ErrorCode::kShapeMismatch);
}
