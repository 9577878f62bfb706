#ifndef PETPRIOR_INPAINT_MODEL_HPP
#define PETPRIOR_INPAINT_MODEL_HPP

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "petprior/inpaint/loss.hpp"
#include "petprior/inpaint/network.hpp"
#include "petprior/maskgen.hpp"
#include "petprior/nn/checkpoint.hpp"
#include "petprior/slicer.hpp"

namespace petprior::inpaint {

struct InpaintTrainConfig {
  int epochs_phase1 = 150;
  int epochs_phase2 = 150;
  double lr_phase1 = 1e-4;
  double lr_phase2 = 5e-5;
  bool freeze_encoder_batchnorm_phase2 = true;
  int batch_size = 8;
  /// 0 uses every slice each epoch; otherwise a random subset of this size.
  int max_slices_per_epoch = 0;
  std::uint64_t seed = 0;
  InpaintNetConfig network;
  InpaintLossWeights loss;
  MaskGenConfig masks;
  /// Optional checkpoint with pretrained feature-extractor weights.
  std::optional<std::filesystem::path> feature_weights;

  void validate() const;
};

/// One axial slice offered for training together with its label plane, so
/// the trainer can prove that no lesion voxel reaches it.
struct TrainingSlice {
  RGBSlice slice;
  Image label;
};

/// Slices of one case whose label plane is empty.
std::vector<TrainingSlice> healthy_training_slices(const Volume3D& ct_norm, const Volume3D& pet_norm,
                                                   const Volume3D& label, const std::string& case_id);

struct InpaintEpochLog {
  int epoch = 0;  // 1-based, continuous across phases
  int phase = 1;
  double total = 0.0;
  double valid = 0.0;
  double hole = 0.0;
  double perceptual = 0.0;
  double style = 0.0;
  double tv = 0.0;
  double lr = 0.0;
};

void write_inpaint_log_csv(const std::vector<InpaintEpochLog>& log, const std::filesystem::path& path);

/// Trained (or freshly initialised) inpainting network. Inference is
/// serialised internally, so one instance may be shared across threads.
class InpaintModel {
 public:
  InpaintModel(const InpaintNetConfig& config, std::uint64_t seed);

  const InpaintNetConfig& config() const { return net_.config(); }
  bool trained() const { return trained_; }
  void mark_trained(int phase) {
    trained_ = true;
    phase_ = phase;
  }
  int phase() const { return phase_; }
  std::uint64_t seed() const { return seed_; }

  /// Network forward passes issued through `inpaint`.
  std::uint64_t forward_count() const { return forward_count_.load(); }

  /// Fills the holes of `slice`; valid pixels are copied through unchanged.
  RGBSlice inpaint(const RGBSlice& slice, const HoleMask& holes);

  PConvUNet<float>& network() { return net_; }

  nn::Checkpoint to_checkpoint(const nlohmann::json& extra_meta = nlohmann::json::object());
  static InpaintModel from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& path, const nlohmann::json& extra_meta = nlohmann::json::object());
  static InpaintModel load(const std::filesystem::path& path);

  InpaintModel(InpaintModel&& other) noexcept;
  InpaintModel& operator=(InpaintModel&& other) noexcept;

 private:
  PConvUNet<float> net_;
  std::uint64_t seed_ = 0;
  bool trained_ = false;
  int phase_ = 0;
  std::atomic<std::uint64_t> forward_count_{0};
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

RGBSlice inpaint_slice(InpaintModel& model, const RGBSlice& slice, const HoleMask& holes);

struct InpaintTrainResult {
  InpaintModel model;
  std::vector<InpaintEpochLog> log;
};

/// Two-phase schedule. Phase 2 lowers the learning rate and, if configured,
/// freezes the encoder batch-norm layers. When `checkpoint_dir` is given,
/// phase1.ckpt and phase2.ckpt are written there.
InpaintTrainResult train_inpainter(const std::vector<TrainingSlice>& slices, const InpaintTrainConfig& config,
                                   const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

struct InpaintQualityReport {
  double psnr = 0.0;  // dB
  double mse = 0.0;
  double ssim = 0.0;
};

/// Reported PSNR for identical images.
inline constexpr double kPsnrCapDb = 99.0;

/// Images in [0, 1] and at least 11 x 11 (the SSIM window).
InpaintQualityReport quality_metrics(const Image& a, const Image& b);
/// Channel-averaged SSIM, MSE over all channels.
InpaintQualityReport quality_metrics(const RGBSlice& a, const RGBSlice& b);

/// Pads bottom/right by mirror reflection (edge pixel not repeated).
Image pad_reflect(const Image& img, Index rows, Index cols);

}  // namespace petprior::inpaint

#endif  // PETPRIOR_INPAINT_MODEL_HPP
