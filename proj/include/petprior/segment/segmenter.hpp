#ifndef PETPRIOR_SEGMENT_SEGMENTER_HPP
#define PETPRIOR_SEGMENT_SEGMENTER_HPP

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "petprior/manifest.hpp"
#include "petprior/nn/checkpoint.hpp"
#include "petprior/preprocess.hpp"
#include "petprior/segment/augment.hpp"
#include "petprior/segment/unet3d.hpp"
#include "petprior/volume.hpp"

namespace petprior::segment {

/// Segmenter input in fixed order (PET, CT, residual PET, residual CT).
/// `source` records where each channel came from, since the z-scored
/// PET and CT channels both carry the NORMALIZED tag.
struct SegInput {
  static constexpr std::array<Modality, 4> kExpectedSource{Modality::kPetSuv, Modality::kCtHu, Modality::kResidualPet,
                                                           Modality::kResidualCt};
  std::array<Volume3D, 4> channels;
  std::array<Modality, 4> source = kExpectedSource;

  /// Throws kChannelOrder or kGridMismatch.
  void validate() const;
  GridSize grid() const { return channels[0].grid(); }
  /// 1 x 4 x nz x ny x nx.
  Tensor<float> to_tensor() const;
};

/// Z-scores PET and CT with per-case statistics and passes the residuals
/// through unchanged.
SegInput make_seg_input(const Volume3D& pet_suv, const Volume3D& ct_hu, const Volume3D& residual_pet,
                        const Volume3D& residual_ct, const ZScoreOptions& zscore = {});

/// Loads a manifest case; residual paths must be set (kMissingResidual).
SegInput build_seg_input(const CaseRecord& record);

struct PatchSize {
  Index x = 32, y = 32, z = 32;
};

struct SegTrainConfig {
  int epochs = 1000;
  int iterations_per_epoch = 250;
  int batch_size = 2;
  double lr = 1e-4;
  PatchSize patch{128, 128, 64};
  std::uint64_t seed = 0;
  UNetConfig network;
  /// Every n-th sample (n = this value) is centred on foreground when any exists.
  int foreground_every = 2;
  int checkpoint_every = 50;
  /// Validation Dice cadence in epochs; 0 disables.
  int validate_every = 1;

  void validate() const;
};

struct SegCase {
  std::string case_id;
  SegInput input;
  Volume3D label;
};

SegCase load_seg_case(const CaseRecord& record);

/// Case lists for one fold split. Fails with kLeakage when a case id
/// appears in more than one role.
struct FoldSplit {
  std::vector<CaseRecord> train;
  std::vector<CaseRecord> val;
  std::vector<CaseRecord> test;
};
FoldSplit split_folds(const std::vector<CaseRecord>& manifest, int val_fold, int test_fold);

class SegModel {
 public:
  SegModel(const UNetConfig& config, PatchSize patch, std::uint64_t seed);

  UNet3D<float>& network() { return net_; }
  const UNetConfig& config() const { return net_.config(); }
  PatchSize patch() const { return patch_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  nn::Checkpoint to_checkpoint(const nlohmann::json& extra_meta = nlohmann::json::object());
  static SegModel from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& path, const nlohmann::json& extra_meta = nlohmann::json::object());
  static SegModel load(const std::filesystem::path& path);

 private:
  UNet3D<float> net_;
  PatchSize patch_;
  std::uint64_t seed_ = 0;
  bool trained_ = false;
};

struct SegEpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_dice;
};

void write_seg_log_csv(const std::vector<SegEpochLog>& log, const std::filesystem::path& path);

struct SegTrainResult {
  SegModel model;
  std::vector<SegEpochLog> log;
};

struct SegTrainOptions {
  /// Directory for `last.ckpt` (and `epoch_<n>.ckpt` at the cadence).
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Resume from this training checkpoint.
  std::optional<std::filesystem::path> resume_from;
  /// Stop after this epoch (for resume tests); 0 runs the full schedule.
  int stop_after_epoch = 0;
};

SegTrainResult train_segmenter(const std::vector<SegCase>& train, const std::vector<SegCase>& val,
                               const SegTrainConfig& config, const AugmentationConfig& aug,
                               const SegTrainOptions& options = {});

/// Sliding-window foreground probability, Gaussian-weighted with 50% overlap.
Volume3D predict_probability(SegModel& model, const SegInput& input);

/// Voxels with probability strictly above `threshold` become 1.
Volume3D predict_mask(SegModel& model, const SegInput& input, double threshold = 0.5);

namespace detail {
/// As predict_mask, without the trained-model check (used for validation
/// during training).
Volume3D predict_mask_unchecked(SegModel& model, const SegInput& input, double threshold);
}  // namespace detail

}  // namespace petprior::segment

#endif  // PETPRIOR_SEGMENT_SEGMENTER_HPP
