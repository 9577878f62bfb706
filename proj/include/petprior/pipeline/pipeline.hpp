#ifndef PETPRIOR_PIPELINE_PIPELINE_HPP
#define PETPRIOR_PIPELINE_PIPELINE_HPP

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "petprior/manifest.hpp"
#include "petprior/pipeline/config.hpp"

namespace petprior::pipeline {

enum class Stage { kTrainInpainter, kComputePriors, kTrainSeg, kPredict, kEvaluate };
inline constexpr Stage kAllStages[] = {Stage::kTrainInpainter, Stage::kComputePriors, Stage::kTrainSeg,
                                       Stage::kPredict, Stage::kEvaluate};

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);

struct StageResult {
  Stage stage;
  bool skipped = false;
  std::string summary;
};

struct PipelineOptions {
  bool force = false;
  int workers = 1;
  /// Progress lines; silent when empty.
  std::function<void(const std::string&)> log;
};

/// Runs stages inside one run directory:
///
///   config.resolved.json   manifest.json
///   inpainter/   phase1.ckpt phase2.ckpt model.ckpt train_log.csv
///   priors/      <case>_res_ct.nii.gz <case>_res_pet.nii.gz prior_cache.json manifest.json
///   segmenter/   model.ckpt last.ckpt train_log.csv
///   predictions/ <case>_pred.nii.gz
///   eval/        report.csv records.csv dice_distribution.png
///
/// Each stage leaves a `.done` marker; completed stages are skipped unless
/// `force` is set. Stage seeds derive from the root seed and the stage name.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::filesystem::path run_dir, PipelineOptions options = {});

  StageResult run(Stage stage);
  std::vector<StageResult> run_all();

  const std::filesystem::path& run_dir() const { return run_dir_; }
  const PipelineConfig& config() const { return config_; }
  std::uint64_t stage_seed(Stage stage) const;

  /// Manifest with fold assignment, created on first use.
  std::vector<CaseRecord> manifest();

 private:
  std::filesystem::path stage_dir(Stage stage) const;
  bool done(Stage stage) const;
  void mark_done(Stage stage, const std::string& summary) const;
  void require_artifact(const std::filesystem::path& path, Stage producer) const;
  void say(const std::string& msg) const;

  std::string train_inpainter();
  std::string compute_priors();
  std::string train_seg();
  std::string predict();
  std::string evaluate();

  PipelineConfig config_;
  std::filesystem::path run_dir_;
  PipelineOptions options_;
};

/// Scores `<pred_dir>/<case>_pred.nii.gz` against the manifest labels and
/// writes report.csv, records.csv and dice_distribution.png to `out_dir`.
/// With `test_only`, report.csv aggregates the test fold only; records.csv
/// always lists every case with its split.
eval::ClasswiseReport evaluate_predictions(const std::vector<CaseRecord>& manifest,
                                           const std::filesystem::path& pred_dir, eval::VolumeMode mode,
                                           const std::filesystem::path& out_dir, int val_fold = -1,
                                           int test_fold = -1, bool test_only = false, int workers = 1);

}  // namespace petprior::pipeline

#endif  // PETPRIOR_PIPELINE_PIPELINE_HPP
