#ifndef PETPRIOR_PIPELINE_CONFIG_HPP
#define PETPRIOR_PIPELINE_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "petprior/eval/metrics.hpp"
#include "petprior/inpaint/model.hpp"
#include "petprior/prior.hpp"
#include "petprior/segment/segmenter.hpp"

namespace petprior::pipeline {

/// Carries every problem found in a config, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct DataConfig {
  /// Existing manifest JSON; when empty the manifest is built from data_dir.
  std::filesystem::path manifest;
  std::filesystem::path data_dir;
  int n_folds = 4;
  int val_fold = 0;
  int test_fold = 1;
};

enum class EvalSplit { kTest, kAll };

struct PipelineConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  inpaint::InpaintTrainConfig inpaint;
  PriorOptions prior;
  segment::SegTrainConfig segment;
  segment::AugmentationConfig augmentation;
  eval::VolumeMode eval_mode = eval::VolumeMode::kComponent;
  EvalSplit eval_split = EvalSplit::kTest;
  /// Fully defaulted JSON form; written to every run directory.
  nlohmann::json resolved;
};

/// Checks types, ranges and unknown keys against the schema, collecting all
/// errors, then fills defaults. Throws ConfigError.
PipelineConfig validate_config(const nlohmann::json& config);
PipelineConfig load_config(const std::filesystem::path& path);

/// The defaulted config with nothing overridden.
nlohmann::json default_config_json();

}  // namespace petprior::pipeline

#endif  // PETPRIOR_PIPELINE_CONFIG_HPP
