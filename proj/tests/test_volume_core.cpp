#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "petprior/hash.hpp"
#include "petprior/manifest.hpp"
#include "petprior/nifti.hpp"
#include "petprior/phantom.hpp"
#include "test_support.hpp"

using namespace petprior;
using petprior::testing::TempDir;

namespace {

Volume3D random_volume(GridSize g, Modality m, std::uint64_t seed, float lo, float hi, Spacing sp = {1.5, 2.0, 3.0}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Volume3D::Array a(g.count());
  for (Index i = 0; i < a.size(); ++i) a[i] = u(rng);
  return Volume3D(g, sp, Origin(-10.0, 5.0, 2.5), m, a);
}

void write_case(const std::filesystem::path& dir, const std::string& id, bool lesion) {
  const GridSize g{8, 8, 4};
  auto ct = Volume3D::constant(g, Spacing::Ones(), Modality::kCtHu, 0.0f);
  auto pet = Volume3D::constant(g, Spacing::Ones(), Modality::kPetSuv, 1.0f);
  Volume3D::Array lab = Volume3D::Array::Zero(g.count());
  if (lesion) lab[ct.index(3, 3, 2)] = 1.0f;
  save_volume(ct, dir / (id + "_ct.nii.gz"));
  save_volume(pet, dir / (id + "_pet.nii.gz"));
  save_volume(ct.with_data(lab, Modality::kLabel), dir / (id + "_label.nii.gz"));
}

}  // namespace

TEST(Volume, RejectsNonPositiveSpacing) {
  EXPECT_ERROR_CODE(Volume3D::constant({2, 2, 2}, Spacing(1.0, 0.0, 1.0), Modality::kCtHu, 0.0f),
                    ErrorCode::kInvariant);
}

TEST(Volume, LabelAndResidualInvariants) {
  const GridSize g{2, 2, 2};
  Volume3D::Array a = Volume3D::Array::Zero(8);
  a[3] = 0.5f;
  EXPECT_ERROR_CODE(Volume3D(g, Spacing::Ones(), Origin::Zero(), Modality::kLabel, a).check_invariants(),
                    ErrorCode::kInvariant);
  a[3] = 1.5f;
  EXPECT_ERROR_CODE(Volume3D(g, Spacing::Ones(), Origin::Zero(), Modality::kResidualPet, a).check_invariants(),
                    ErrorCode::kRange);
}

TEST(Nifti, RoundTripKeepsShapeSpacingAndBits) {
  TempDir dir("nifti");
  const auto ct = random_volume({16, 16, 8}, Modality::kCtHu, 3, -1000.0f, 1500.0f);
  save_volume(ct, dir / "ct.nii.gz");
  const auto back = load_volume(dir / "ct.nii.gz", Modality::kCtHu);
  EXPECT_EQ(back.grid(), (GridSize{16, 16, 8}));
  EXPECT_TRUE(back.spacing().isApprox(ct.spacing(), 1e-6));
  EXPECT_TRUE(back.origin().isApprox(ct.origin(), 1e-6));
  EXPECT_EQ(0, std::memcmp(back.data().data(), ct.data().data(), sizeof(float) * ct.data().size()));

  const auto pet = random_volume({5, 7, 3}, Modality::kPetSuv, 4, 0.0f, 20.0f);
  save_volume(pet, dir / "pet.nii");
  EXPECT_TRUE((load_volume(dir / "pet.nii", Modality::kPetSuv).data() == pet.data()).all());
}

TEST(Nifti, ZeroLabelReloadsToZero) {
  TempDir dir("nifti_label");
  save_volume(Volume3D::constant({4, 4, 4}, Spacing::Ones(), Modality::kLabel, 0.0f), dir / "l.nii.gz");
  EXPECT_EQ(load_volume(dir / "l.nii.gz", Modality::kLabel).data().sum(), 0.0f);
}

TEST(Nifti, TextFileIsCorruptHeader) {
  TempDir dir("nifti_text");
  std::ofstream(dir / "notes.nii") << "this is not a volume\n";
  EXPECT_ERROR_CODE(load_volume(dir / "notes.nii", Modality::kCtHu), ErrorCode::kCorruptHeader);
}

TEST(Nifti, ResidualOutOfRangeRejectedBeforeWrite) {
  TempDir dir("nifti_res");
  Volume3D::Array a = Volume3D::Array::Zero(8);
  a[5] = 1.5f;
  const Volume3D r({2, 2, 2}, Spacing::Ones(), Origin::Zero(), Modality::kResidualCt, a);
  EXPECT_ERROR_CODE(save_volume(r, dir / "r.nii.gz"), ErrorCode::kRange);
  EXPECT_FALSE(std::filesystem::exists(dir / "r.nii.gz"));
}

TEST(Phantom, NoLesionsMeansEmptyLabel) {
  PhantomSpec spec;
  spec.n_lesions = 0;
  EXPECT_EQ(generate_phantom(spec).label.data().sum(), 0.0f);
}

TEST(Phantom, DeterministicForFixedSpec) {
  PhantomSpec spec;
  spec.seed = 77;
  const auto a = generate_phantom(spec), b = generate_phantom(spec);
  EXPECT_EQ(volume_hash(a.ct), volume_hash(b.ct));
  EXPECT_EQ(volume_hash(a.pet), volume_hash(b.pet));
  EXPECT_EQ(volume_hash(a.label), volume_hash(b.label));
  spec.seed = 78;
  EXPECT_NE(volume_hash(generate_phantom(spec).pet), volume_hash(a.pet));
}

TEST(Phantom, LesionVoxelsAreHot) {
  PhantomSpec spec;
  spec.n_lesions = 3;
  spec.lesion_suv_range = {5.0, 10.0};
  spec.seed = 5;
  const auto p = generate_phantom(spec);
  ASSERT_GT(p.label.data().sum(), 0.0f);
  for (Index i = 0; i < p.label.data().size(); ++i) {
    if (p.label.data()[i] == 1.0f) {
      ASSERT_GE(p.pet.data()[i], 5.0f);
    } else {
      ASSERT_LT(p.pet.data()[i], 5.0f);
    }
  }
  EXPECT_LE(p.ct.data().maxCoeff(), 1000.0f);
  EXPECT_EQ(p.ct.data().minCoeff(), -1000.0f);
}

TEST(Manifest, TenCasesFiveFolds) {
  std::vector<CaseRecord> cases;
  for (int i = 0; i < 10; ++i) cases.push_back({"c" + std::to_string(i), {}, {}, {}, TumorClass::kLungCancer});
  assign_folds(cases, 5);
  std::map<int, int> sizes;
  for (const auto& c : cases) ++sizes[c.fold];
  ASSERT_EQ(sizes.size(), 5u);
  for (const auto& [f, n] : sizes) EXPECT_EQ(n, 2) << "fold " << f;
}

TEST(Manifest, StratifiesMinorityClass) {
  std::vector<CaseRecord> cases;
  for (int i = 0; i < 8; ++i) cases.push_back({"ly" + std::to_string(i), {}, {}, {}, TumorClass::kLymphoma});
  for (int i = 0; i < 2; ++i) cases.push_back({"me" + std::to_string(i), {}, {}, {}, TumorClass::kMelanoma});
  assign_folds(cases, 5);
  std::set<int> melanoma_folds;
  std::map<int, int> sizes;
  for (const auto& c : cases) {
    ++sizes[c.fold];
    if (c.tumor_class == TumorClass::kMelanoma) melanoma_folds.insert(c.fold);
  }
  EXPECT_EQ(melanoma_folds.size(), 2u);
  for (const auto& [f, n] : sizes) EXPECT_EQ(n, 2);
}

TEST(Manifest, BuildFromDirectory) {
  TempDir dir("manifest");
  write_case(dir.path(), "a", true);
  write_case(dir.path(), "b", false);
  write_case(dir.path(), "c", true);
  std::ofstream(dir / "classes.csv") << "case_id,tumor_class\na,MELANOMA\nc,LYMPHOMA\n";
  auto cases = build_manifest(dir.path(), 2);
  ASSERT_EQ(cases.size(), 3u);
  EXPECT_EQ(cases[0].case_id, "a");
  EXPECT_EQ(cases[0].tumor_class, TumorClass::kMelanoma);
  EXPECT_EQ(cases[1].tumor_class, TumorClass::kNegative);
  save_manifest(cases, dir / "m.json");
  const auto back = load_manifest(dir / "m.json");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].case_id, cases[i].case_id);
    EXPECT_EQ(back[i].fold, cases[i].fold);
    EXPECT_EQ(back[i].ct_path, cases[i].ct_path);
  }
  const auto v = load_case(back[0]);
  EXPECT_EQ(v.label.data().sum(), 1.0f);
}

TEST(Manifest, UnpairedCtNamesCase) {
  TempDir dir("manifest_unpaired");
  write_case(dir.path(), "a", false);
  std::filesystem::remove(dir / "a_pet.nii.gz");
  try {
    build_manifest(dir.path(), 2);
    FAIL() << "expected unpaired error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnpaired);
    EXPECT_NE(std::string(e.what()).find("a"), std::string::npos);
  }
}

TEST(Manifest, LesionInUnclassifiedCaseIsRejected) {
  TempDir dir("manifest_neg");
  write_case(dir.path(), "x", true);
  EXPECT_THROW(build_manifest(dir.path(), 2), Error);
}

TEST(Hash, KnownDigestAndSeedChain) {
  EXPECT_EQ(sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // First 8 digest bytes of "1234/train-inpainter", little-endian.
  EXPECT_EQ(derive_seed(1234, "train-inpainter"), 4064215275582689037ULL);
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
}
