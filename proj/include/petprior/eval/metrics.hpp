#ifndef PETPRIOR_EVAL_METRICS_HPP
#define PETPRIOR_EVAL_METRICS_HPP

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "petprior/manifest.hpp"
#include "petprior/volume.hpp"

namespace petprior::eval {

/// How false-positive / false-negative volume is counted. Component mode
/// counts whole connected components (18-connectivity) that miss the other
/// mask entirely; voxelwise counts every mismatching voxel.
enum class VolumeMode { kComponent, kVoxelwise };

std::string_view to_string(VolumeMode mode);
VolumeMode volume_mode_from_string(std::string_view name);

/// Connected components with 18-connectivity; 0 is background, labels start at 1.
std::vector<int> label_components(const Volume3D& mask, int* count = nullptr);

/// 2|P&G| / (|P| + |G|); undefined (nullopt) when both masks are empty.
std::optional<double> dice_score(const Volume3D& pred, const Volume3D& gt);

double fp_volume_liters(const Volume3D& pred, const Volume3D& gt, VolumeMode mode = VolumeMode::kComponent);
double fn_volume_liters(const Volume3D& pred, const Volume3D& gt, VolumeMode mode = VolumeMode::kComponent);

struct EvalRecord {
  std::string case_id;
  TumorClass tumor_class = TumorClass::kNegative;
  int fold = 0;
  std::string split;  // train / val / test, informational
  std::optional<double> dice;
  double fpv_liters = 0.0;
  std::optional<double> fnv_liters;
};

/// Negative cases get undefined Dice and FNV.
EvalRecord evaluate_case(const std::string& case_id, TumorClass tumor_class, int fold, const Volume3D& pred,
                         const Volume3D& gt, VolumeMode mode);

enum class ReportGroup { kGlobal, kPositive, kNegative, kLungCancer, kLymphoma, kMelanoma };
inline constexpr std::array<ReportGroup, 6> kReportGroups{ReportGroup::kGlobal,     ReportGroup::kPositive,
                                                          ReportGroup::kNegative,   ReportGroup::kLungCancer,
                                                          ReportGroup::kLymphoma,   ReportGroup::kMelanoma};
std::string_view to_string(ReportGroup group);

struct GroupStats {
  int cases = 0;
  std::optional<double> dice;
  std::optional<double> fpv_liters;
  std::optional<double> fnv_liters;
};

struct ClasswiseReport {
  VolumeMode mode = VolumeMode::kComponent;
  std::array<GroupStats, 6> groups;  // indexed like kReportGroups

  const GroupStats& operator[](ReportGroup g) const { return groups[static_cast<std::size_t>(g)]; }
};

/// Means over defined values only. Global and Negative Dice/FNV are left
/// undefined, as in the challenge table.
ClasswiseReport aggregate(const std::vector<EvalRecord>& records, VolumeMode mode = VolumeMode::kComponent);

/// Rows Dice, FPV, FNV; one column per group; blanks for undefined cells.
void write_report_csv(const ClasswiseReport& report, const std::filesystem::path& path);
ClasswiseReport read_report_csv(const std::filesystem::path& path);

void write_records_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path);
std::vector<EvalRecord> read_records_csv(const std::filesystem::path& path);

struct PlotLayout {
  int width = 0;
  int height = 0;
  std::vector<std::string> group_labels;
  std::size_t groups() const { return group_labels.size(); }
};

/// Box plot of per-case Dice, one group per tumor class that has defined Dice values.
PlotLayout write_dice_plot(const std::vector<EvalRecord>& records, const std::filesystem::path& path);

/// report.csv, records.csv and dice_distribution.png under `out_dir`.
PlotLayout emit_report(const ClasswiseReport& report, const std::vector<EvalRecord>& records,
                       const std::filesystem::path& out_dir);

}  // namespace petprior::eval

#endif  // PETPRIOR_EVAL_METRICS_HPP
