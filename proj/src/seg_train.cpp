#include <fstream>
#include <set>

#include "petprior/hash.hpp"
#include "petprior/segment/loss.hpp"
#include "petprior/segment/segmenter.hpp"

namespace petprior::segment {
namespace {

nlohmann::json network_json(const UNetConfig& c) {
  return {{"levels", c.levels}, {"base_width", c.base_width}, {"max_width", c.max_width},
          {"in_channels", c.in_channels}};
}

// A training case padded to at least the patch size, in tensor layout.
struct PreparedCase {
  Tensor<float> image;  // 1 x 4 x D x H x W
  Tensor<float> label;  // 1 x 1 x D x H x W
  std::vector<Index> foreground;  // linear voxel indices
};

Tensor<float> pad_to(const Tensor<float>& t, Index d, Index h, Index w) {
  const Shape s = t.shape();
  if (s.d >= d && s.h >= h && s.w >= w) return t;
  const Shape o{s.n, s.c, std::max(s.d, d), std::max(s.h, h), std::max(s.w, w)};
  Tensor<float> out(o);
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c)
      for (Index z = 0; z < s.d; ++z)
        for (Index y = 0; y < s.h; ++y)
          for (Index x = 0; x < s.w; ++x) out.data()[out.offset(n, c, z, y, x)] = t.at(n, c, z, y, x);
  return out;
}

PreparedCase prepare(const SegCase& c, const PatchSize& p) {
  const GridSize g = c.label.grid();
  PreparedCase out;
  out.image = pad_to(c.input.to_tensor(), p.z, p.y, p.x);
  out.label = pad_to(Tensor<float>(Shape{1, 1, g.nz, g.ny, g.nx}, c.label.data()), p.z, p.y, p.x);
  for (Index i = 0; i < out.label.numel(); ++i) {
    if (out.label.data()[i] > 0.5f) out.foreground.push_back(i);
  }
  return out;
}

Tensor<float> crop(const Tensor<float>& t, Index z0, Index y0, Index x0, const PatchSize& p) {
  const Shape s = t.shape();
  Tensor<float> out(Shape{s.n, s.c, p.z, p.y, p.x});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c)
      for (Index z = 0; z < p.z; ++z)
        for (Index y = 0; y < p.y; ++y) {
          const float* src = t.data().data() + t.offset(n, c, z0 + z, y0 + y, x0);
          std::copy_n(src, p.x, out.data().data() + out.offset(n, c, z, y, 0));
        }
  return out;
}

Index pick(std::mt19937_64& rng, Index n) {
  return static_cast<Index>(std::uniform_int_distribution<long long>(0, static_cast<long long>(n) - 1)(rng));
}

std::pair<Tensor<float>, Tensor<float>> sample_patch(const PreparedCase& c, const PatchSize& p, bool foreground,
                                                     std::mt19937_64& rng) {
  const Shape s = c.image.shape();
  Index z0, y0, x0;
  if (foreground && !c.foreground.empty()) {
    const Index v = c.foreground[static_cast<std::size_t>(pick(rng, static_cast<Index>(c.foreground.size())))];
    const Index x = v % s.w, y = (v / s.w) % s.h, z = v / (s.w * s.h);
    z0 = std::clamp<Index>(z - p.z / 2, 0, s.d - p.z);
    y0 = std::clamp<Index>(y - p.y / 2, 0, s.h - p.y);
    x0 = std::clamp<Index>(x - p.x / 2, 0, s.w - p.x);
  } else {
    z0 = pick(rng, s.d - p.z + 1);
    y0 = pick(rng, s.h - p.y + 1);
    x0 = pick(rng, s.w - p.x + 1);
  }
  return {crop(c.image, z0, y0, x0, p), crop(c.label, z0, y0, x0, p)};
}

std::optional<double> dice(const Volume3D& pred, const Volume3D& gt) {
  const double inter = (pred.data() * gt.data()).sum();
  const double total = pred.data().sum() + gt.data().sum();
  if (total == 0.0) return std::nullopt;
  return 2.0 * inter / total;
}

void save_training_state(SegModel& model, nn::Adam<float>& opt, int epoch, const std::vector<SegEpochLog>& log,
                         const SegTrainConfig& config, const std::filesystem::path& path) {
  nlohmann::json jlog = nlohmann::json::array();
  for (const auto& e : log) {
    jlog.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss},
                    {"val_dice", e.val_dice ? nlohmann::json(*e.val_dice) : nlohmann::json()}});
  }
  nlohmann::json meta = {{"epoch", epoch},           {"adam_step", opt.step_count()},
                         {"lr", config.lr},          {"train_seed", config.seed},
                         {"log", jlog},              {"iterations_per_epoch", config.iterations_per_epoch},
                         {"batch_size", config.batch_size}};
  nn::Checkpoint ckpt = model.to_checkpoint(meta);
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    ckpt.put("adam.m." + std::to_string(i), opt.first_moments()[i]);
    ckpt.put("adam.v." + std::to_string(i), opt.second_moments()[i]);
  }
  nn::save_checkpoint(ckpt, path);
}

}  // namespace

void SegTrainConfig::validate() const {
  require(epochs >= 1 && iterations_per_epoch >= 1 && batch_size >= 1, ErrorCode::kInvalidArgument,
          "segmenter epochs, iterations_per_epoch and batch_size must be positive");
  require(lr > 0.0, ErrorCode::kInvalidArgument, "segmenter learning rate must be positive");
  require(patch.x >= 1 && patch.y >= 1 && patch.z >= 1, ErrorCode::kInvalidArgument, "patch size must be positive");
  network.validate();
  const Index div = network.divisor();
  require(patch.x % div == 0 && patch.y % div == 0 && patch.z % div == 0, ErrorCode::kInvalidArgument,
          "patch size must be a multiple of " + std::to_string(div) + " for a " + std::to_string(network.levels) +
              "-level network");
  require(foreground_every >= 0 && checkpoint_every >= 0 && validate_every >= 0, ErrorCode::kInvalidArgument,
          "foreground_every, checkpoint_every and validate_every must be >= 0");
}

SegModel::SegModel(const UNetConfig& config, PatchSize patch, std::uint64_t seed)
    : net_(config), patch_(patch), seed_(seed) {
  const Index div = config.divisor();
  require(patch.x % div == 0 && patch.y % div == 0 && patch.z % div == 0, ErrorCode::kInvalidArgument,
          "patch size must be a multiple of " + std::to_string(div));
  net_.init(seed);
}

nn::Checkpoint SegModel::to_checkpoint(const nlohmann::json& extra_meta) {
  nn::Checkpoint ckpt;
  ckpt.meta = extra_meta;
  ckpt.meta["kind"] = "segmenter";
  ckpt.meta["network"] = network_json(net_.config());
  ckpt.meta["patch"] = {patch_.x, patch_.y, patch_.z};
  ckpt.meta["seed"] = seed_;
  ckpt.meta["trained"] = trained_;
  nn::store_parameters(ckpt, net_.parameters());
  return ckpt;
}

SegModel SegModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  require(ckpt.meta.value("kind", "") == "segmenter", ErrorCode::kCorruptHeader, "checkpoint is not a segmenter");
  const auto& n = ckpt.meta.at("network");
  UNetConfig cfg;
  cfg.levels = n.at("levels").get<int>();
  cfg.base_width = n.at("base_width").get<Index>();
  cfg.max_width = n.at("max_width").get<Index>();
  cfg.in_channels = n.at("in_channels").get<Index>();
  const auto p = ckpt.meta.at("patch").get<std::vector<Index>>();
  require(p.size() == 3, ErrorCode::kCorruptHeader, "segmenter checkpoint has a malformed patch size");
  SegModel model(cfg, PatchSize{p[0], p[1], p[2]}, ckpt.meta.at("seed").get<std::uint64_t>());
  nn::restore_parameters(ckpt, model.net_.parameters());
  model.trained_ = ckpt.meta.value("trained", false);
  return model;
}

void SegModel::save(const std::filesystem::path& path, const nlohmann::json& extra_meta) {
  nn::save_checkpoint(to_checkpoint(extra_meta), path);
}

SegModel SegModel::load(const std::filesystem::path& path) { return from_checkpoint(nn::load_checkpoint(path)); }

void write_seg_log_csv(const std::vector<SegEpochLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out.precision(8);
  out << "epoch,train_loss,val_dice\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << e.train_loss << ',';
    if (e.val_dice) out << *e.val_dice;
    out << '\n';
  }
}

SegTrainResult train_segmenter(const std::vector<SegCase>& train, const std::vector<SegCase>& val,
                               const SegTrainConfig& config, const AugmentationConfig& aug,
                               const SegTrainOptions& options) {
  config.validate();
  aug.validate();
  require(!train.empty(), ErrorCode::kEmptyInput, "segmenter training set is empty");
  std::set<std::string> train_ids;
  for (const auto& c : train) train_ids.insert(c.case_id);
  for (const auto& c : val) {
    require(!train_ids.count(c.case_id), ErrorCode::kLeakage,
            "fold leakage: validation case " + c.case_id + " is also in the training set");
  }

  SegModel model(config.network, config.patch, derive_seed(config.seed, "segmenter/init"));
  auto params = model.network().parameters();
  nn::Adam<float> opt(params, config.lr);
  std::vector<SegEpochLog> log;
  int start_epoch = 1;

  if (options.resume_from) {
    const nn::Checkpoint ckpt = nn::load_checkpoint(*options.resume_from);
    nn::restore_parameters(ckpt, params);
    for (std::size_t i = 0; i < params.size(); ++i) {
      opt.first_moments()[i] = ckpt.get("adam.m." + std::to_string(i));
      opt.second_moments()[i] = ckpt.get("adam.v." + std::to_string(i));
    }
    opt.set_step_count(ckpt.meta.at("adam_step").get<long>());
    start_epoch = ckpt.meta.at("epoch").get<int>() + 1;
    for (const auto& e : ckpt.meta.at("log")) {
      SegEpochLog entry{e.at("epoch").get<int>(), e.at("train_loss").get<double>(), std::nullopt};
      if (!e.at("val_dice").is_null()) entry.val_dice = e.at("val_dice").get<double>();
      log.push_back(entry);
    }
  }

  std::vector<PreparedCase> prepared;
  prepared.reserve(train.size());
  for (const auto& c : train) {
    require(c.input.grid() == c.label.grid(), ErrorCode::kGridMismatch, "case " + c.case_id + ": label grid");
    prepared.push_back(prepare(c, config.patch));
  }
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

  const int last_epoch = options.stop_after_epoch > 0 ? std::min(options.stop_after_epoch, config.epochs) : config.epochs;
  const PatchSize& p = config.patch;
  for (int epoch = start_epoch; epoch <= last_epoch; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, "segmenter/epoch/" + std::to_string(epoch)));
    double loss_sum = 0.0;
    for (int it = 0; it < config.iterations_per_epoch; ++it) {
      const Shape bs{config.batch_size, 4, p.z, p.y, p.x};
      Tensor<float> x(bs), y(Shape{config.batch_size, 1, p.z, p.y, p.x});
      for (Index b = 0; b < config.batch_size; ++b) {
        const long k = static_cast<long>(it) * config.batch_size + b;
        const bool fg = config.foreground_every > 0 && k % config.foreground_every == config.foreground_every - 1;
        const auto& c = prepared[static_cast<std::size_t>(pick(rng, static_cast<Index>(prepared.size())))];
        auto [patch, label] = sample_patch(c, p, fg, rng);
        auto [ap, al] = augment(patch, label, aug, rng);
        x.sample(b) = ap.sample(0);
        y.sample(b) = al.sample(0);
      }
      opt.zero_grad();
      const auto logits = model.network().forward(x);
      const auto loss = dice_ce_loss<float>(logits, y);
      model.network().backward(loss.grad);
      opt.step();
      loss_sum += loss.total;
    }
    SegEpochLog entry{epoch, loss_sum / config.iterations_per_epoch, std::nullopt};
    if (config.validate_every > 0 && epoch % config.validate_every == 0 && !val.empty()) {
      double sum = 0.0;
      int defined = 0;
      for (const auto& c : val) {
        if (const auto d = dice(detail::predict_mask_unchecked(model, c.input, 0.5), c.label)) {
          sum += *d;
          ++defined;
        }
      }
      if (defined > 0) entry.val_dice = sum / defined;
    }
    log.push_back(entry);
    if (options.checkpoint_dir) {
      save_training_state(model, opt, epoch, log, config, *options.checkpoint_dir / "last.ckpt");
      if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
        save_training_state(model, opt, epoch, log, config,
                            *options.checkpoint_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"));
      }
    }
  }
  model.mark_trained();
  return {std::move(model), std::move(log)};
}

}  // namespace petprior::segment
