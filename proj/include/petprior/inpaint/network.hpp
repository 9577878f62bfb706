#ifndef PETPRIOR_INPAINT_NETWORK_HPP
#define PETPRIOR_INPAINT_NETWORK_HPP

#include <algorithm>
#include <array>
#include <random>
#include <string>
#include <vector>

#include "petprior/nn/conv.hpp"
#include "petprior/nn/layers.hpp"

namespace petprior::inpaint {

using nn::Index;
using nn::Shape;
using nn::Tensor;

struct InpaintNetConfig {
  int levels = 4;
  Index base_width = 32;
  Index max_width = 512;
  Index in_channels = 3;

  Index width(int level) const { return std::min<Index>(base_width << level, max_width); }
  Index total_stride() const { return Index{1} << levels; }
  void validate() const;
};

/// Partial-convolution encoder-decoder. Every encoder stage halves the
/// resolution with a strided partial conv and carries the mask forward; each
/// decoder stage upsamples (features and mask), concatenates the matching
/// encoder output and its mask, and applies a 3x3 partial conv. The output is
/// clamped to [0, 1].
template <typename Scalar>
class PConvUNet {
 public:
  PConvUNet() = default;

  explicit PConvUNet(const InpaintNetConfig& config) : config_(config) {
    config.validate();
    const int L = config.levels;
    Index in = config.in_channels;
    for (int l = 0; l < L; ++l) {
      const Index k = l == 0 ? 7 : (l < 3 ? 5 : 3);
      const std::string name = "enc" + std::to_string(l + 1);
      Encoder e;
      e.conv = nn::PartialConv<Scalar>(name, in, config.width(l), nn::ConvGeometry::planar(k, 2));
      e.has_bn = l > 0;
      if (e.has_bn) e.bn = nn::BatchNorm<Scalar>(name + ".bn", config.width(l));
      encoders_.push_back(std::move(e));
      in = config.width(l);
    }
    // decoders_[l] produces the level-l resolution (l = 0 is full size).
    for (int l = 0; l < L; ++l) {
      const Index up_channels = config.width(l);
      const Index skip_channels = l == 0 ? config.in_channels : config.width(l - 1);
      const Index out = l == 0 ? config.in_channels : config.width(l - 1);
      const std::string name = "dec" + std::to_string(l + 1);
      Decoder d;
      d.conv = nn::PartialConv<Scalar>(name, up_channels + skip_channels, out, nn::ConvGeometry::planar(3, 1));
      d.last = l == 0;
      if (!d.last) d.bn = nn::BatchNorm<Scalar>(name + ".bn", out);
      d.skip_channels = skip_channels;
      decoders_.push_back(std::move(d));
    }
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& e : encoders_) e.conv.init(rng);
    for (auto& d : decoders_) d.conv.init(rng, 0.2);
  }

  const InpaintNetConfig& config() const { return config_; }

  /// x and mask are N x C x 1 x H x W; H and W must be multiples of the total stride.
  Tensor<Scalar> forward(const Tensor<Scalar>& x, const Tensor<Scalar>& mask, bool training) {
    const Shape s = x.shape();
    require(s.h % config_.total_stride() == 0 && s.w % config_.total_stride() == 0, ErrorCode::kShapeMismatch,
            "inpainting input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                " is not divisible by the network stride " + std::to_string(config_.total_stride()));
    require(s.c == config_.in_channels && s.d == 1, ErrorCode::kShapeMismatch,
            "inpainting input must be N x " + std::to_string(config_.in_channels) + " x 1 x H x W");
    const int L = config_.levels;
    feats_.assign(static_cast<std::size_t>(L + 1), {});
    masks_.assign(static_cast<std::size_t>(L + 1), {});
    feats_[0] = x;
    masks_[0] = mask;
    for (int l = 0; l < L; ++l) {
      Encoder& e = encoders_[static_cast<std::size_t>(l)];
      auto out = e.conv.forward(feats_[static_cast<std::size_t>(l)], masks_[static_cast<std::size_t>(l)]);
      Tensor<Scalar> h = std::move(out.features);
      if (e.has_bn) h = e.bn.forward(h, training);
      feats_[static_cast<std::size_t>(l + 1)] = e.act.forward(h);
      masks_[static_cast<std::size_t>(l + 1)] = std::move(out.mask);
    }
    Tensor<Scalar> d = feats_[static_cast<std::size_t>(L)];
    Tensor<Scalar> dm = masks_[static_cast<std::size_t>(L)];
    for (int l = L - 1; l >= 0; --l) {
      Decoder& dec = decoders_[static_cast<std::size_t>(l)];
      const auto u = nn::upsample_nearest(d, kUp);
      const auto um = nn::upsample_nearest(dm, kUp);
      auto out = dec.conv.forward(nn::concat_channels(u, feats_[static_cast<std::size_t>(l)]),
                                  nn::concat_channels(um, masks_[static_cast<std::size_t>(l)]));
      d = std::move(out.features);
      dm = std::move(out.mask);
      if (!dec.last) d = dec.act.forward(dec.bn.forward(d, training));
    }
    raw_output_ = d;
    return Tensor<Scalar>(d.shape(), d.data().cwiseMax(Scalar(0)).cwiseMin(Scalar(1)));
  }

  /// Gradient of the loss w.r.t. the clamped output; returns dL/dx.
  Tensor<Scalar> backward(const Tensor<Scalar>& dout) {
    const int L = config_.levels;
    Tensor<Scalar> g(dout.shape(),
                     ((raw_output_.data() >= Scalar(0)) && (raw_output_.data() <= Scalar(1))).select(dout.data(), Scalar(0)));
    std::vector<Tensor<Scalar>> skip_grad(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) {
      Decoder& dec = decoders_[static_cast<std::size_t>(l)];
      if (!dec.last) g = dec.bn.backward(dec.act.backward(g));
      const auto din = dec.conv.backward(g);
      auto [du, dskip] = nn::split_channels(din, din.shape().c - dec.skip_channels);
      skip_grad[static_cast<std::size_t>(l)] = std::move(dskip);
      g = nn::upsample_nearest_backward(du, kUp);
    }
    for (int l = L - 1; l >= 0; --l) {
      Encoder& e = encoders_[static_cast<std::size_t>(l)];
      if (l < L - 1) g.data() += skip_grad[static_cast<std::size_t>(l + 1)].data();
      Tensor<Scalar> h = e.act.backward(g);
      if (e.has_bn) h = e.bn.backward(h);
      g = e.conv.backward(h);
    }
    g.data() += skip_grad[0].data();
    return g;
  }

  void set_encoder_bn_frozen(bool frozen) {
    for (auto& e : encoders_) {
      if (e.has_bn) e.bn.set_frozen(frozen);
    }
  }

  std::vector<nn::Parameter<Scalar>*> parameters() {
    std::vector<nn::Parameter<Scalar>*> out;
    auto append = [&out](std::vector<nn::Parameter<Scalar>*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
    for (auto& e : encoders_) {
      append(e.conv.parameters());
      if (e.has_bn) append(e.bn.parameters());
    }
    for (auto& d : decoders_) {
      append(d.conv.parameters());
      if (!d.last) append(d.bn.parameters());
    }
    return out;
  }

  /// Mask after the deepest encoder stage, for hole-shrinkage checks.
  const Tensor<Scalar>& encoder_mask(int level) const { return masks_[static_cast<std::size_t>(level)]; }

 private:
  static constexpr std::array<Index, 3> kUp{1, 2, 2};

  struct Encoder {
    nn::PartialConv<Scalar> conv;
    nn::BatchNorm<Scalar> bn;
    nn::LeakyRelu<Scalar> act{Scalar(0)};
    bool has_bn = false;
  };
  struct Decoder {
    nn::PartialConv<Scalar> conv;
    nn::BatchNorm<Scalar> bn;
    nn::LeakyRelu<Scalar> act{Scalar(0.2)};
    bool last = false;
    Index skip_channels = 0;
  };

  InpaintNetConfig config_;
  std::vector<Encoder> encoders_;
  std::vector<Decoder> decoders_;
  std::vector<Tensor<Scalar>> feats_;
  std::vector<Tensor<Scalar>> masks_;
  Tensor<Scalar> raw_output_;
};

inline void InpaintNetConfig::validate() const {
  require(levels >= 1 && levels <= 8, ErrorCode::kInvalidArgument, "inpainting network levels must be in [1, 8]");
  require(base_width >= 1 && max_width >= base_width, ErrorCode::kInvalidArgument,
          "inpainting network widths must be positive and max_width >= base_width");
  require(in_channels == 3, ErrorCode::kInvalidArgument, "inpainting network takes 3-channel RGB slices");
}

}  // namespace petprior::inpaint

#endif  // PETPRIOR_INPAINT_NETWORK_HPP
