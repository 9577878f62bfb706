#include <fstream>
#include <map>
#include <random>

#include "metric_oracle.hpp"
#include "petprior/eval/metrics.hpp"
#include "petprior/png_io.hpp"
#include "test_support.hpp"

using namespace petprior;
using namespace petprior::eval;
using petprior::testing::make_volume;
using petprior::testing::random_mask;
using petprior::testing::TempDir;

namespace {

Volume3D empty_mask(GridSize g, Spacing sp = Spacing::Ones()) {
  return Volume3D::constant(g, sp, Modality::kLabel, 0.0f);
}

void set(Volume3D& m, Index x, Index y, Index z) {
  const GridSize g = m.grid();
  Volume3D::Array a = m.data();
  a[(z * g.ny + y) * g.nx + x] = 1.0f;
  m = m.with_data<float>(std::move(a), Modality::kLabel);
}

// Fills the box [x0, x1) x [y0, y1) x [z0, z1).
Volume3D with_box(const Volume3D& m, Index x0, Index x1, Index y0, Index y1, Index z0, Index z1) {
  const GridSize g = m.grid();
  Volume3D::Array a = m.data();
  for (Index z = z0; z < z1; ++z)
    for (Index y = y0; y < y1; ++y)
      for (Index x = x0; x < x1; ++x) a[(z * g.ny + y) * g.nx + x] = 1.0f;
  return m.with_data<float>(std::move(a), Modality::kLabel);
}

EvalRecord rec(const std::string& id, TumorClass c, std::optional<double> dice, double fpv,
               std::optional<double> fnv) {
  EvalRecord r;
  r.case_id = id;
  r.tumor_class = c;
  r.dice = dice;
  r.fpv_liters = fpv;
  r.fnv_liters = fnv;
  r.split = "test";
  return r;
}

}  // namespace

TEST(Dice, Examples) {
  const GridSize g{4, 4, 4};
  const auto a = with_box(empty_mask(g), 0, 2, 0, 2, 0, 1);
  EXPECT_DOUBLE_EQ(*dice_score(a, a), 1.0);
  const auto b = with_box(empty_mask(g), 2, 4, 2, 4, 3, 4);
  EXPECT_DOUBLE_EQ(*dice_score(a, b), 0.0);
  // |P| = 4, |G| = 4, |P & G| = 2.
  const auto c = with_box(empty_mask(g), 1, 3, 0, 2, 0, 1);
  EXPECT_DOUBLE_EQ(*dice_score(a, c), 0.5);
  EXPECT_DOUBLE_EQ(*dice_score(c, a), 0.5);
  EXPECT_FALSE(dice_score(empty_mask(g), empty_mask(g)).has_value());
  EXPECT_ERROR_CODE(dice_score(a, empty_mask({4, 4, 5})), ErrorCode::kGridMismatch);
}

TEST(Fpv, VoxelwiseThousandVoxelsAnisotropic) {
  const Spacing sp(2.0, 2.0, 3.0);
  const GridSize g{20, 20, 10};
  const auto gt = empty_mask(g, sp);
  const auto pred = with_box(empty_mask(g, sp), 0, 10, 0, 10, 0, 10);
  // 1000 voxels x 12 mm3 = 12000 mm3 = 1.2e-2 L.
  EXPECT_NEAR(fp_volume_liters(pred, gt, VolumeMode::kVoxelwise), 1.2e-2, 1e-15);
  EXPECT_EQ(fp_volume_liters(pred, pred, VolumeMode::kVoxelwise), 0.0);
  EXPECT_EQ(fp_volume_liters(pred, pred, VolumeMode::kComponent), 0.0);
}

TEST(Fpv, ComponentModeCountsOnlyDisjointComponent) {
  const Spacing sp(2.0, 2.0, 3.0);
  const GridSize g{30, 30, 10};
  // Component A: 4x4x4 box, half of it inside gt. Component B: 10x10x5 = 500 voxels, far away.
  auto pred = with_box(empty_mask(g, sp), 0, 4, 0, 4, 0, 4);
  pred = with_box(pred, 15, 25, 15, 25, 0, 5);
  const auto gt = with_box(empty_mask(g, sp), 0, 2, 0, 4, 0, 4);
  EXPECT_NEAR(fp_volume_liters(pred, gt, VolumeMode::kComponent), 6.0e-3, 1e-15);
  EXPECT_NEAR(fp_volume_liters(pred, gt, VolumeMode::kVoxelwise), (32 + 500) * 12e-6, 1e-15);
}

TEST(Fnv, Examples) {
  const GridSize g{10, 10, 10};
  // 100 voxels at 1 mm3 = 1e-4 L.
  const auto gt = with_box(empty_mask(g), 0, 5, 0, 5, 0, 4);
  for (auto mode : {VolumeMode::kComponent, VolumeMode::kVoxelwise}) {
    EXPECT_NEAR(fn_volume_liters(empty_mask(g), gt, mode), 1.0e-4, 1e-18);
    EXPECT_EQ(fn_volume_liters(with_box(empty_mask(g), 0, 6, 0, 6, 0, 6), gt, mode), 0.0);
    const Volume3D complement = gt.with_data<float>(1.0f - gt.data(), Modality::kLabel);
    EXPECT_NEAR(fn_volume_liters(complement, gt, mode), 1.0e-4, 1e-18);
  }
}

TEST(Components, EighteenConnectivity) {
  const GridSize g{3, 3, 3};
  auto m = empty_mask(g);
  set(m, 0, 0, 0);
  set(m, 1, 1, 0);  // edge neighbour in-plane: joined
  set(m, 2, 2, 1);  // corner neighbour of (1,1,0): separate
  int count = 0;
  const auto lab = label_components(m, &count);
  EXPECT_EQ(count, 2);
  EXPECT_EQ(lab[0], lab[4]);
  EXPECT_NE(lab[4], lab[9 + 8]);
}

TEST(Metrics, RandomMasksMatchOracleBothModes) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> density(0.02, 0.4);
  const Spacing sp(1.5, 2.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_mask({8, 8, 8}, density(rng), rng, sp);
    const auto g = random_mask({8, 8, 8}, density(rng), rng, sp);
    EXPECT_EQ(dice_score(p, g), petprior::testing::oracle_dice(p, g));
    EXPECT_EQ(dice_score(p, g), dice_score(g, p));
    for (auto mode : {VolumeMode::kComponent, VolumeMode::kVoxelwise}) {
      const bool comp = mode == VolumeMode::kComponent;
      EXPECT_EQ(fp_volume_liters(p, g, mode), petprior::testing::oracle_excess_liters(p, g, comp));
      EXPECT_EQ(fn_volume_liters(p, g, mode), petprior::testing::oracle_excess_liters(g, p, comp));
      EXPECT_EQ(fn_volume_liters(p, g, mode), fp_volume_liters(g, p, mode));
    }
    EXPECT_LE(fp_volume_liters(p, g, VolumeMode::kComponent), fp_volume_liters(p, g, VolumeMode::kVoxelwise));
    int count = 0;
    const auto lab = label_components(p, &count);
    const auto ref = petprior::testing::oracle_components(p);
    EXPECT_EQ(count, ref.empty() ? 0 : *std::max_element(ref.begin(), ref.end()));
    // Same partition up to relabelling.
    std::map<int, int> fwd, back;
    for (std::size_t i = 0; i < lab.size(); ++i) {
      if (!lab[i]) continue;
      EXPECT_EQ(fwd.emplace(lab[i], ref[i]).first->second, ref[i]);
      EXPECT_EQ(back.emplace(ref[i], lab[i]).first->second, lab[i]);
    }
  }
}

TEST(EvaluateCase, NegativeCasesHaveUndefinedDiceAndFnv) {
  const GridSize g{6, 6, 6};
  const auto pred = with_box(empty_mask(g), 0, 2, 0, 2, 0, 2);
  const auto r = evaluate_case("n", TumorClass::kNegative, 0, pred, empty_mask(g), VolumeMode::kComponent);
  EXPECT_FALSE(r.dice.has_value());
  EXPECT_FALSE(r.fnv_liters.has_value());
  EXPECT_NEAR(r.fpv_liters, 8e-6, 1e-18);
  const auto p = evaluate_case("p", TumorClass::kMelanoma, 0, pred, pred, VolumeMode::kComponent);
  EXPECT_DOUBLE_EQ(*p.dice, 1.0);
  EXPECT_EQ(*p.fnv_liters, 0.0);
}

TEST(Aggregate, ClassMeansAndBlanks) {
  std::vector<EvalRecord> rs{rec("l1", TumorClass::kLungCancer, 0.7, 1e-3, 2e-3),
                             rec("l2", TumorClass::kLungCancer, 0.8, 3e-3, 0.0),
                             rec("y1", TumorClass::kLymphoma, 0.4, 0.0, 1e-3),
                             rec("n1", TumorClass::kNegative, std::nullopt, 4e-3, std::nullopt)};
  const auto r = aggregate(rs);
  EXPECT_NEAR(*r[ReportGroup::kLungCancer].dice, 0.75, 1e-12);
  EXPECT_EQ(r[ReportGroup::kLungCancer].cases, 2);
  EXPECT_FALSE(r[ReportGroup::kMelanoma].dice.has_value());
  EXPECT_EQ(r[ReportGroup::kMelanoma].cases, 0);
  EXPECT_FALSE(r[ReportGroup::kGlobal].dice.has_value());
  EXPECT_FALSE(r[ReportGroup::kGlobal].fnv_liters.has_value());
  EXPECT_NEAR(*r[ReportGroup::kGlobal].fpv_liters, 2e-3, 1e-15);
  EXPECT_FALSE(r[ReportGroup::kNegative].dice.has_value());
  EXPECT_FALSE(r[ReportGroup::kNegative].fnv_liters.has_value());
  EXPECT_NEAR(*r[ReportGroup::kNegative].fpv_liters, 4e-3, 1e-15);
  // Positive mean recomputed as the count-weighted mean of class means.
  double num = 0.0;
  int den = 0;
  for (auto g : {ReportGroup::kLungCancer, ReportGroup::kLymphoma, ReportGroup::kMelanoma}) {
    if (r[g].dice) {
      num += *r[g].dice * r[g].cases;
      den += r[g].cases;
    }
  }
  EXPECT_NEAR(*r[ReportGroup::kPositive].dice, num / den, 1e-12);
  EXPECT_NEAR(*r[ReportGroup::kPositive].dice, (0.7 + 0.8 + 0.4) / 3.0, 1e-12);
}

TEST(Aggregate, OnlyNegativeCases) {
  const auto r = aggregate({rec("n1", TumorClass::kNegative, std::nullopt, 1e-3, std::nullopt)});
  EXPECT_FALSE(r[ReportGroup::kPositive].dice.has_value());
  EXPECT_FALSE(r[ReportGroup::kPositive].fpv_liters.has_value());
  EXPECT_TRUE(r[ReportGroup::kNegative].fpv_liters.has_value());
  EXPECT_ERROR_CODE(aggregate({}), ErrorCode::kEmptyInput);
}

TEST(Report, CsvLayoutAndRoundTrip) {
  TempDir dir("report");
  std::vector<EvalRecord> rs{rec("l1", TumorClass::kLungCancer, 0.123456789012, 1.5e-4, 2e-5),
                             rec("m1", TumorClass::kMelanoma, 0.9, 0.0, 0.0),
                             rec("n1", TumorClass::kNegative, std::nullopt, 3.25e-6, std::nullopt)};
  const auto report = aggregate(rs, VolumeMode::kVoxelwise);
  const auto layout = emit_report(report, rs, dir.path());
  ASSERT_TRUE(std::filesystem::exists(dir / "report.csv"));
  ASSERT_TRUE(std::filesystem::exists(dir / "records.csv"));
  ASSERT_TRUE(std::filesystem::exists(dir / "dice_distribution.png"));

  std::ifstream in(dir / "report.csv");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "metric,Global,Positive,Negative,Lung Cancer,Lymphoma,Melanoma");
  EXPECT_EQ(lines[1].rfind("Dice,,", 0), 0u);
  EXPECT_EQ(lines[2].rfind("FPV_liters_voxelwise,", 0), 0u);
  EXPECT_EQ(lines[3].rfind("FNV_liters_voxelwise,,", 0), 0u);

  const auto back = read_report_csv(dir / "report.csv");
  EXPECT_EQ(back.mode, VolumeMode::kVoxelwise);
  for (std::size_t i = 0; i < kReportGroups.size(); ++i) {
    const auto& a = report.groups[i];
    const auto& b = back.groups[i];
    for (auto m : {&GroupStats::dice, &GroupStats::fpv_liters, &GroupStats::fnv_liters}) {
      ASSERT_EQ((a.*m).has_value(), (b.*m).has_value());
      if ((a.*m)) EXPECT_NEAR(*(a.*m), *(b.*m), 1e-9);
    }
  }

  const auto records = read_records_csv(dir / "records.csv");
  ASSERT_EQ(records.size(), rs.size());
  EXPECT_EQ(records[2].tumor_class, TumorClass::kNegative);
  EXPECT_FALSE(records[2].dice.has_value());
  EXPECT_NEAR(*records[0].dice, 0.123456789012, 1e-9);

  // Two classes carry Dice values, so two plot groups.
  EXPECT_EQ(layout.groups(), 2u);
  const auto png = read_png(dir / "dice_distribution.png");
  EXPECT_EQ(png.width, layout.width);
  EXPECT_EQ(png.height, layout.height);
}

TEST(Report, SingleClassGivesOneGroup) {
  TempDir dir("plot");
  std::vector<EvalRecord> rs{rec("y1", TumorClass::kLymphoma, 0.6, 0.0, 0.0),
                             rec("y2", TumorClass::kLymphoma, 0.8, 0.0, 0.0)};
  const auto layout = write_dice_plot(rs, dir / "p.png");
  ASSERT_EQ(layout.groups(), 1u);
  EXPECT_EQ(layout.group_labels[0], "LYMPHOMA");
}

TEST(Report, UnwritableDirectory) {
  TempDir dir("unwritable");
  std::ofstream(dir / "file") << "x";
  const auto report = aggregate({rec("y1", TumorClass::kLymphoma, 0.6, 0.0, 0.0)});
  EXPECT_ERROR_CODE(emit_report(report, {}, dir / "file" / "sub"), ErrorCode::kIo);
}
