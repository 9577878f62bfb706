#ifndef PETPRIOR_SEGMENT_UNET3D_HPP
#define PETPRIOR_SEGMENT_UNET3D_HPP

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "petprior/nn/conv.hpp"
#include "petprior/nn/layers.hpp"

namespace petprior::segment {

using nn::Index;
using nn::Shape;
using nn::Tensor;

struct UNetConfig {
  int levels = 5;
  Index base_width = 32;
  Index max_width = 320;
  Index in_channels = 4;

  Index width(int level) const { return std::min<Index>(base_width << level, max_width); }
  /// Spatial dims must be multiples of this.
  Index divisor() const { return Index{1} << (levels - 1); }
  void validate() const {
    require(levels >= 1 && levels <= 7, ErrorCode::kInvalidArgument, "segmenter levels must be in [1, 7]");
    require(base_width >= 1 && max_width >= base_width, ErrorCode::kInvalidArgument,
            "segmenter widths must be positive and max_width >= base_width");
    require(in_channels >= 1, ErrorCode::kInvalidArgument, "segmenter needs at least one input channel");
  }
};

/// conv - instance norm - leaky ReLU, twice.
template <typename Scalar>
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(const std::string& name, Index in, Index out, Index first_stride)
      : c1_(name + ".conv1", in, out, nn::ConvGeometry::cubic(3, first_stride)),
        n1_(name + ".norm1", out),
        c2_(name + ".conv2", out, out, nn::ConvGeometry::cubic(3, 1)),
        n2_(name + ".norm2", out) {}

  void init(std::mt19937_64& rng) {
    c1_.init(rng, kSlope);
    c2_.init(rng, kSlope);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    return a2_.forward(n2_.forward(c2_.forward(a1_.forward(n1_.forward(c1_.forward(x))))));
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    return c1_.backward(n1_.backward(a1_.backward(c2_.backward(n2_.backward(a2_.backward(dy))))));
  }

  std::vector<nn::Parameter<Scalar>*> parameters() {
    return {&c1_.weight, &c1_.bias, &n1_.gamma, &n1_.beta, &c2_.weight, &c2_.bias, &n2_.gamma, &n2_.beta};
  }

 private:
  static constexpr double kSlope = 0.01;
  nn::Conv<Scalar> c1_;
  nn::InstanceNorm<Scalar> n1_;
  nn::LeakyRelu<Scalar> a1_{Scalar(kSlope)};
  nn::Conv<Scalar> c2_;
  nn::InstanceNorm<Scalar> n2_;
  nn::LeakyRelu<Scalar> a2_{Scalar(kSlope)};
};

/// Plain 3D U-Net with strided-conv downsampling, transposed-conv upsampling
/// and a 1x1x1 single-channel logit head.
template <typename Scalar>
class UNet3D {
 public:
  UNet3D() = default;

  explicit UNet3D(const UNetConfig& config) : config_(config) {
    config.validate();
    Index in = config.in_channels;
    for (int l = 0; l < config.levels; ++l) {
      encoders_.emplace_back("enc" + std::to_string(l), in, config.width(l), l == 0 ? 1 : 2);
      in = config.width(l);
    }
    for (int l = 0; l + 1 < config.levels; ++l) {
      ups_.emplace_back("up" + std::to_string(l), config.width(l + 1), config.width(l), std::array<Index, 3>{2, 2, 2});
      decoders_.emplace_back("dec" + std::to_string(l), 2 * config.width(l), config.width(l), 1);
    }
    head_ = nn::Conv<Scalar>("head", config.width(0), 1, nn::ConvGeometry::cubic(1, 1));
  }

  const UNetConfig& config() const { return config_; }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& e : encoders_) e.init(rng);
    for (auto& u : ups_) u.init(rng);
    for (auto& d : decoders_) d.init(rng);
    head_.init(rng);
  }

  /// x: N x C x D x H x W with D, H, W multiples of divisor(). Returns logits N x 1 x D x H x W.
  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    const Shape s = x.shape();
    const Index div = config_.divisor();
    require(s.c == config_.in_channels, ErrorCode::kShapeMismatch,
            "segmenter expects " + std::to_string(config_.in_channels) + " channels, got " + std::to_string(s.c));
    require(s.d % div == 0 && s.h % div == 0 && s.w % div == 0, ErrorCode::kShapeMismatch,
            "segmenter input " + to_string(s) + " is not divisible by " + std::to_string(div));
    const int L = config_.levels;
    skips_.assign(static_cast<std::size_t>(L), {});
    Tensor<Scalar> h = x;
    for (int l = 0; l < L; ++l) {
      h = encoders_[static_cast<std::size_t>(l)].forward(h);
      skips_[static_cast<std::size_t>(l)] = h;
    }
    for (int l = L - 2; l >= 0; --l) {
      const auto u = ups_[static_cast<std::size_t>(l)].forward(h);
      h = decoders_[static_cast<std::size_t>(l)].forward(nn::concat_channels(u, skips_[static_cast<std::size_t>(l)]));
    }
    skips_.clear();
    return head_.forward(h);
  }

  /// Accumulates parameter gradients from dL/dlogits.
  void backward(const Tensor<Scalar>& dlogits) {
    const int L = config_.levels;
    Tensor<Scalar> g = head_.backward(dlogits);
    std::vector<Tensor<Scalar>> skip_grads(static_cast<std::size_t>(L));
    for (int l = 0; l + 1 < L; ++l) {
      const auto din = decoders_[static_cast<std::size_t>(l)].backward(g);
      auto [du, dskip] = nn::split_channels(din, config_.width(l));
      skip_grads[static_cast<std::size_t>(l)] = std::move(dskip);
      g = ups_[static_cast<std::size_t>(l)].backward(du);
    }
    for (int l = L - 1; l >= 0; --l) {
      if (l < L - 1) g.data() += skip_grads[static_cast<std::size_t>(l)].data();
      g = encoders_[static_cast<std::size_t>(l)].backward(g);
    }
  }

  std::vector<nn::Parameter<Scalar>*> parameters() {
    std::vector<nn::Parameter<Scalar>*> out;
    auto append = [&out](const std::vector<nn::Parameter<Scalar>*>& ps) { out.insert(out.end(), ps.begin(), ps.end()); };
    for (auto& e : encoders_) append(e.parameters());
    for (std::size_t i = 0; i < ups_.size(); ++i) {
      append(ups_[i].parameters());
      append(decoders_[i].parameters());
    }
    append(head_.parameters());
    return out;
  }

  nn::Conv<Scalar>& head() { return head_; }

 private:
  UNetConfig config_;
  std::vector<ConvBlock<Scalar>> encoders_;
  std::vector<nn::TransposedConv<Scalar>> ups_;
  std::vector<ConvBlock<Scalar>> decoders_;
  nn::Conv<Scalar> head_;
  std::vector<Tensor<Scalar>> skips_;
};

}  // namespace petprior::segment

#endif  // PETPRIOR_SEGMENT_UNET3D_HPP
