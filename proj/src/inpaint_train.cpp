#include <algorithm>
#include <fstream>
#include <numeric>

#include "petprior/hash.hpp"
#include "petprior/inpaint/model.hpp"

namespace petprior::inpaint {
namespace {

Index round_up(Index v, Index m) { return (v + m - 1) / m * m; }

Index reflect(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  return i < n ? i : period - i;
}

template <typename T>
Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic> pad_reflect_any(const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>& img,
                                                                  Index rows, Index cols) {
  Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic> out(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) out(r, c) = img(reflect(r, img.rows()), reflect(c, img.cols()));
  }
  return out;
}

// Tensor plane (h = cols, w = rows) shares the column-major layout of Image.
void put_plane(nn::Tensor<float>& t, Index n, Index c, const Image& img) {
  std::copy_n(img.data(), img.size(), t.data().data() + t.offset(n, c, 0, 0, 0));
}

Image get_plane(const nn::Tensor<float>& t, Index n, Index c, Index rows, Index cols) {
  const Shape s = t.shape();
  Image full(s.w, s.h);
  std::copy_n(t.data().data() + t.offset(n, c, 0, 0, 0), full.size(), full.data());
  return full.topLeftCorner(rows, cols);
}

nlohmann::json network_json(const InpaintNetConfig& c) {
  return {{"levels", c.levels}, {"base_width", c.base_width}, {"max_width", c.max_width},
          {"in_channels", c.in_channels}};
}

struct BatchLoss {
  double total = 0, valid = 0, hole = 0, perceptual = 0, style = 0, tv = 0;
};

}  // namespace

Image pad_reflect(const Image& img, Index rows, Index cols) {
  require(rows >= img.rows() && cols >= img.cols(), ErrorCode::kInvalidArgument, "pad_reflect cannot shrink");
  return pad_reflect_any<float>(img, rows, cols);
}

void InpaintTrainConfig::validate() const {
  require(epochs_phase1 >= 0 && epochs_phase2 >= 0 && epochs_phase1 + epochs_phase2 > 0, ErrorCode::kInvalidArgument,
          "inpainting epochs must be non-negative with at least one epoch in total");
  require(lr_phase1 > 0.0 && lr_phase2 > 0.0, ErrorCode::kInvalidArgument, "inpainting learning rates must be positive");
  require(lr_phase2 < lr_phase1, ErrorCode::kInvariant,
          "invariant violation: phase-2 learning rate (" + std::to_string(lr_phase2) +
              ") must be lower than phase-1 learning rate (" + std::to_string(lr_phase1) + ")");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "inpainting batch size must be >= 1");
  require(max_slices_per_epoch >= 0, ErrorCode::kInvalidArgument, "max_slices_per_epoch must be >= 0");
  network.validate();
  loss.validate();
  masks.validate();
}

std::vector<TrainingSlice> healthy_training_slices(const Volume3D& ct_norm, const Volume3D& pet_norm,
                                                   const Volume3D& label, const std::string& case_id) {
  require_same_grid(ct_norm, label, "healthy slice selection");
  const SliceStack stack = volume_to_rgb_slices(ct_norm, pet_norm, case_id);
  std::vector<TrainingSlice> out;
  for (const auto& s : stack.slices) {
    Image lab = label.plane(s.z_index);
    if ((lab != 0.0f).any()) continue;
    out.push_back({s, std::move(lab)});
  }
  return out;
}

void write_inpaint_log_csv(const std::vector<InpaintEpochLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << "epoch,phase,total,valid,hole,perceptual,style,tv,lr\n";
  out.precision(8);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.phase << ',' << e.total << ',' << e.valid << ',' << e.hole << ',' << e.perceptual
        << ',' << e.style << ',' << e.tv << ',' << e.lr << '\n';
  }
}

InpaintModel::InpaintModel(const InpaintNetConfig& config, std::uint64_t seed) : net_(config), seed_(seed) {
  net_.init(seed);
}

InpaintModel::InpaintModel(InpaintModel&& other) noexcept
    : net_(std::move(other.net_)),
      seed_(other.seed_),
      trained_(other.trained_),
      phase_(other.phase_),
      forward_count_(other.forward_count_.load()),
      mutex_(std::move(other.mutex_)) {}

InpaintModel& InpaintModel::operator=(InpaintModel&& other) noexcept {
  net_ = std::move(other.net_);
  seed_ = other.seed_;
  trained_ = other.trained_;
  phase_ = other.phase_;
  forward_count_ = other.forward_count_.load();
  mutex_ = std::move(other.mutex_);
  return *this;
}

RGBSlice InpaintModel::inpaint(const RGBSlice& slice, const HoleMask& holes) {
  const Index rows = slice.rows(), cols = slice.cols();
  require(holes.rows() == rows && holes.cols() == cols, ErrorCode::kShapeMismatch,
          "hole mask " + std::to_string(holes.rows()) + "x" + std::to_string(holes.cols()) + " does not match slice " +
              std::to_string(rows) + "x" + std::to_string(cols));
  require(((holes.mask == 0) || (holes.mask == 1)).all(), ErrorCode::kInvalidArgument, "hole mask must be binary");
  if (holes.hole_count() == 0) return slice;

  const Index stride = net_.config().total_stride();
  const Index rp = round_up(rows, stride), cp = round_up(cols, stride);
  const Shape shape{1, 3, 1, cp, rp};
  nn::Tensor<float> x(shape), m(shape);
  Image mpad = Image::Ones(rp, cp);
  mpad.topLeftCorner(rows, cols) = holes.as_float();
  for (int c = 0; c < 3; ++c) {
    put_plane(x, 0, c, pad_reflect(slice.channels[c], rp, cp) * mpad);
    put_plane(m, 0, c, mpad);
  }
  nn::Tensor<float> y;
  {
    std::lock_guard lock(*mutex_);
    y = net_.forward(x, m, false);
    ++forward_count_;
  }
  RGBSlice out = slice;
  const Image valid = holes.as_float();
  for (int c = 0; c < 3; ++c) {
    const Image pred = get_plane(y, 0, c, rows, cols).cwiseMax(0.0f).cwiseMin(1.0f);
    out.channels[c] = (valid > 0.5f).select(slice.channels[c], pred);
  }
  return out;
}

RGBSlice inpaint_slice(InpaintModel& model, const RGBSlice& slice, const HoleMask& holes) {
  return model.inpaint(slice, holes);
}

nn::Checkpoint InpaintModel::to_checkpoint(const nlohmann::json& extra_meta) {
  nn::Checkpoint ckpt;
  ckpt.meta = extra_meta;
  ckpt.meta["kind"] = "inpainter";
  ckpt.meta["network"] = network_json(net_.config());
  ckpt.meta["seed"] = seed_;
  ckpt.meta["trained"] = trained_;
  ckpt.meta["phase"] = phase_;
  nn::store_parameters(ckpt, net_.parameters());
  return ckpt;
}

InpaintModel InpaintModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  require(ckpt.meta.value("kind", "") == "inpainter", ErrorCode::kCorruptHeader,
          "checkpoint is not an inpainting model");
  const auto& n = ckpt.meta.at("network");
  InpaintNetConfig cfg;
  cfg.levels = n.at("levels").get<int>();
  cfg.base_width = n.at("base_width").get<Index>();
  cfg.max_width = n.at("max_width").get<Index>();
  cfg.in_channels = n.at("in_channels").get<Index>();
  InpaintModel model(cfg, ckpt.meta.at("seed").get<std::uint64_t>());
  nn::restore_parameters(ckpt, model.net_.parameters());
  model.trained_ = ckpt.meta.value("trained", false);
  model.phase_ = ckpt.meta.value("phase", 0);
  return model;
}

void InpaintModel::save(const std::filesystem::path& path, const nlohmann::json& extra_meta) {
  nn::save_checkpoint(to_checkpoint(extra_meta), path);
}

InpaintModel InpaintModel::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::load_checkpoint(path));
}

InpaintTrainResult train_inpainter(const std::vector<TrainingSlice>& slices, const InpaintTrainConfig& config,
                                   const std::optional<std::filesystem::path>& checkpoint_dir) {
  config.validate();
  require(!slices.empty(), ErrorCode::kEmptyInput, "inpainting training set is empty: no healthy slices");
  for (const auto& t : slices) {
    require(t.label.rows() == t.slice.rows() && t.label.cols() == t.slice.cols(), ErrorCode::kShapeMismatch,
            "label plane of case " + t.slice.case_id + " z=" + std::to_string(t.slice.z_index) +
                " does not match its slice");
    require(!(t.label != 0.0f).any(), ErrorCode::kLeakage,
            "lesion slice leaked into inpainting training set: case " + t.slice.case_id + ", z_index " +
                std::to_string(t.slice.z_index));
  }
  const Index rows = slices.front().slice.rows(), cols = slices.front().slice.cols();
  for (const auto& t : slices) {
    require(t.slice.rows() == rows && t.slice.cols() == cols, ErrorCode::kShapeMismatch,
            "inpainting training slices must share one in-plane shape");
  }

  InpaintModel model(config.network, derive_seed(config.seed, "inpainter/init"));
  FeaturePyramid<float> features = config.feature_weights
                                       ? FeaturePyramid<float>::from_checkpoint(nn::load_checkpoint(*config.feature_weights))
                                       : FeaturePyramid<float>();
  auto& net = model.network();
  nn::Adam<float> opt(net.parameters(), config.lr_phase1);

  const Index stride = config.network.total_stride();
  const Index rp = round_up(rows, stride), cp = round_up(cols, stride);
  std::vector<std::array<Image, 3>> padded;
  padded.reserve(slices.size());
  for (const auto& t : slices) {
    std::array<Image, 3> p;
    for (int c = 0; c < 3; ++c) p[c] = pad_reflect(t.slice.channels[c], rp, cp);
    padded.push_back(std::move(p));
  }

  std::vector<InpaintEpochLog> log;
  if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);
  const int total_epochs = config.epochs_phase1 + config.epochs_phase2;
  for (int epoch = 1; epoch <= total_epochs; ++epoch) {
    const int phase = epoch <= config.epochs_phase1 ? 1 : 2;
    if (phase == 2 && epoch == config.epochs_phase1 + 1) {
      opt.set_lr(config.lr_phase2);
      if (config.freeze_encoder_batchnorm_phase2) net.set_encoder_bn_frozen(true);
    }
    std::mt19937_64 rng(derive_seed(config.seed, "inpainter/epoch/" + std::to_string(epoch)));
    std::vector<std::size_t> order(slices.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    if (config.max_slices_per_epoch > 0 && order.size() > static_cast<std::size_t>(config.max_slices_per_epoch)) {
      order.resize(static_cast<std::size_t>(config.max_slices_per_epoch));
    }

    BatchLoss sum;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const Index n = static_cast<Index>(std::min(order.size() - start, static_cast<std::size_t>(config.batch_size)));
      const Shape shape{n, 3, 1, cp, rp};
      nn::Tensor<float> target(shape), mask(shape);
      for (Index i = 0; i < n; ++i) {
        const auto& img = padded[order[start + static_cast<std::size_t>(i)]];
        const Image holes = random_irregular_mask(rp, cp, config.masks, rng).as_float();
        for (int c = 0; c < 3; ++c) {
          put_plane(target, i, c, img[c]);
          put_plane(mask, i, c, holes);
        }
      }
      const nn::Tensor<float> input(shape, target.data() * mask.data());
      opt.zero_grad();
      const auto pred = net.forward(input, mask, true);
      const auto loss = inpaint_loss<float>(pred, target, mask, &features, config.loss);
      net.backward(loss.grad);
      opt.step();
      sum.total += loss.total;
      sum.valid += loss.valid;
      sum.hole += loss.hole;
      sum.perceptual += loss.perceptual;
      sum.style += loss.style;
      sum.tv += loss.tv;
      ++batches;
    }
    const double inv = 1.0 / std::max(1, batches);
    log.push_back({epoch, phase, sum.total * inv, sum.valid * inv, sum.hole * inv, sum.perceptual * inv,
                   sum.style * inv, sum.tv * inv, opt.lr()});

    const bool phase_end = epoch == config.epochs_phase1 || epoch == total_epochs;
    if (phase_end) {
      model.mark_trained(phase);
      if (checkpoint_dir) {
        nlohmann::json meta = {{"epoch", epoch}, {"train_seed", config.seed}, {"lr", opt.lr()}};
        model.save(*checkpoint_dir / ("phase" + std::to_string(phase) + ".ckpt"), meta);
      }
    }
  }
  return {std::move(model), std::move(log)};
}

}  // namespace petprior::inpaint
