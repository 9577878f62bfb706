#ifndef PETPRIOR_INPAINT_LOSS_HPP
#define PETPRIOR_INPAINT_LOSS_HPP

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "petprior/nn/checkpoint.hpp"
#include "petprior/nn/conv.hpp"
#include "petprior/nn/layers.hpp"

namespace petprior::inpaint {

using nn::Index;
using nn::Shape;
using nn::Tensor;

/// Fixed convolutional feature pyramid used by the perceptual and style terms.
/// Weights are drawn from a fixed seed unless loaded from a checkpoint; they
/// are never trained.
template <typename Scalar>
class FeaturePyramid {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5eed'feedULL;

  explicit FeaturePyramid(std::uint64_t seed = kDefaultSeed) {
    const Index widths[] = {3, 8, 16, 32};
    std::mt19937_64 rng(seed);
    for (int l = 0; l < 3; ++l) {
      convs_.emplace_back("feat" + std::to_string(l + 1), widths[l], widths[l + 1],
                          nn::ConvGeometry::planar(3, l == 0 ? 1 : 2));
      convs_.back().init(rng);
      acts_.emplace_back(Scalar(0));
    }
  }

  static FeaturePyramid from_checkpoint(const nn::Checkpoint& ckpt) {
    FeaturePyramid<float> f32;
    nn::restore_parameters(ckpt, f32.parameters());
    FeaturePyramid out;
    auto dst = out.parameters();
    auto src = f32.parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value.template cast<Scalar>();
    return out;
  }

  std::vector<Tensor<Scalar>> forward(const Tensor<Scalar>& x) {
    std::vector<Tensor<Scalar>> feats;
    Tensor<Scalar> h = x;
    for (std::size_t l = 0; l < convs_.size(); ++l) {
      h = acts_[l].forward(convs_[l].forward(h));
      feats.push_back(h);
    }
    return feats;
  }

  /// grads[l] is dL/d(feature l) from the most recent forward.
  Tensor<Scalar> backward(const std::vector<Tensor<Scalar>>& grads) {
    Tensor<Scalar> g = grads.back();
    for (std::size_t l = convs_.size(); l-- > 0;) {
      g = convs_[l].backward(acts_[l].backward(g));
      if (l > 0) g.data() += grads[l - 1].data();
    }
    return g;
  }

  std::vector<nn::Parameter<Scalar>*> parameters() {
    std::vector<nn::Parameter<Scalar>*> out;
    for (auto& c : convs_) {
      for (auto* p : c.parameters()) out.push_back(p);
    }
    return out;
  }

 private:
  std::vector<nn::Conv<Scalar>> convs_;
  std::vector<nn::LeakyRelu<Scalar>> acts_;
};

struct InpaintLossWeights {
  double valid = 1.0;
  double hole = 6.0;
  double perceptual = 0.05;
  double style = 120.0;
  double tv = 0.1;

  void validate() const {
    const double all[] = {valid, hole, perceptual, style, tv};
    bool any = false;
    for (double v : all) {
      require(v >= 0.0 && std::isfinite(v), ErrorCode::kInvalidArgument, "inpainting loss weights must be >= 0");
      any = any || v > 0.0;
    }
    require(any, ErrorCode::kInvalidArgument, "at least one inpainting loss weight must be positive");
  }
};

template <typename Scalar>
struct InpaintLoss {
  Scalar total{};
  Scalar valid{};
  Scalar hole{};
  Scalar perceptual{};
  Scalar style{};
  Scalar tv{};
  Tensor<Scalar> grad;  // dL/dprediction
};

namespace detail {

template <typename Scalar>
Scalar sign(Scalar v) {
  return static_cast<Scalar>((v > Scalar(0)) - (v < Scalar(0)));
}

/// Per-sample Gram matrices F F^T / (C * P), stacked as N x C x 1 x 1 x C.
template <typename Scalar>
Tensor<Scalar> gram(const Tensor<Scalar>& f) {
  const Shape s = f.shape();
  Tensor<Scalar> g(Shape{s.n, s.c, 1, 1, s.c});
  const Scalar norm = Scalar(1) / static_cast<Scalar>(s.c * s.spatial());
  for (Index n = 0; n < s.n; ++n) g.sample(n).noalias() = f.sample(n) * f.sample(n).transpose() * norm;
  return g;
}

/// 3x3 dilation of the hole region (mask == 0) in each H x W plane.
template <typename Scalar>
std::vector<unsigned char> dilated_holes(const Tensor<Scalar>& mask) {
  const Shape s = mask.shape();
  std::vector<unsigned char> out(static_cast<std::size_t>(mask.numel()), 0);
  const Index planes = s.n * s.c * s.d;
  for (Index p = 0; p < planes; ++p) {
    const Index base = p * s.h * s.w;
    for (Index y = 0; y < s.h; ++y) {
      for (Index x = 0; x < s.w; ++x) {
        if (mask.data()[base + y * s.w + x] != Scalar(0)) continue;
        for (Index dy = -1; dy <= 1; ++dy) {
          for (Index dx = -1; dx <= 1; ++dx) {
            const Index yy = y + dy, xx = x + dx;
            if (yy >= 0 && yy < s.h && xx >= 0 && xx < s.w) out[static_cast<std::size_t>(base + yy * s.w + xx)] = 1;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// Composite inpainting loss and its gradient with respect to `pred`.
///
/// The valid and hole terms are mean absolute errors over the valid and hole
/// elements respectively. The perceptual and style terms compare features of
/// the composited image against those of the target; the style term uses
/// normalised Gram matrices. Total variation is measured on the composite,
/// over neighbour pairs that both lie in the 1-pixel dilation of the hole.
/// `mask` is 1 on valid pixels and 0 in holes, with the same shape as `pred`.
template <typename Scalar>
InpaintLoss<Scalar> inpaint_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const Tensor<Scalar>& mask,
                                 FeaturePyramid<Scalar>* features, const InpaintLossWeights& w = {}) {
  w.validate();
  const Shape s = pred.shape();
  require(target.shape() == s && mask.shape() == s, ErrorCode::kShapeMismatch,
          "inpainting loss: prediction, target and mask shapes differ");
  using Array = typename Tensor<Scalar>::Array;
  const Array& M = mask.data();
  const Array hole = Scalar(1) - M;
  const Array diff = pred.data() - target.data();
  const Scalar n_valid = std::max(Scalar(1), M.sum());
  const Scalar n_hole = std::max(Scalar(1), hole.sum());

  InpaintLoss<Scalar> r;
  r.valid = (M * diff.abs()).sum() / n_valid;
  r.hole = (hole * diff.abs()).sum() / n_hole;
  const Array sgn = diff.unaryExpr([](Scalar v) { return detail::sign(v); });
  Array grad = sgn * (M * Scalar(w.valid) / n_valid + hole * Scalar(w.hole) / n_hole);

  const Tensor<Scalar> comp(s, M * target.data() + hole * pred.data());
  Array dcomp = Array::Zero(comp.numel());

  if (w.perceptual != 0.0 || w.style != 0.0) {
    require(features != nullptr, ErrorCode::kInvalidArgument,
            "a feature extractor is required when perceptual or style weights are nonzero");
    const auto ft = features->forward(target);
    const auto fc = features->forward(comp);
    std::vector<Tensor<Scalar>> dfeat;
    for (std::size_t l = 0; l < fc.size(); ++l) {
      const Shape fs = fc[l].shape();
      const Array fd = fc[l].data() - ft[l].data();
      const Scalar numel = static_cast<Scalar>(fd.size());
      r.perceptual += fd.abs().sum() / numel;
      Tensor<Scalar> df(fs, fd.unaryExpr([](Scalar v) { return detail::sign(v); }) * (Scalar(w.perceptual) / numel));

      const auto gc = detail::gram(fc[l]);
      const auto gt = detail::gram(ft[l]);
      const Array gd = gc.data() - gt.data();
      const Scalar gnum = static_cast<Scalar>(gd.size());
      r.style += gd.abs().sum() / gnum;
      const Tensor<Scalar> dg(gc.shape(), gd.unaryExpr([](Scalar v) { return detail::sign(v); }) * (Scalar(w.style) / gnum));
      const Scalar norm = Scalar(1) / static_cast<Scalar>(fs.c * fs.spatial());
      for (Index n = 0; n < fs.n; ++n) {
        const auto G = dg.sample(n);
        df.sample(n).noalias() += (G + G.transpose()) * fc[l].sample(n) * norm;
      }
      dfeat.push_back(std::move(df));
    }
    dcomp += features->backward(dfeat).data();
  }

  // Total variation over the dilated hole region.
  const auto region = detail::dilated_holes(mask);
  Scalar tv_h{}, tv_v{};
  Index n_h = 0, n_v = 0;
  const Index planes = s.n * s.c * s.d;
  auto in_region = [&](Index i) { return region[static_cast<std::size_t>(i)] != 0; };
  for (Index p = 0; p < planes; ++p) {
    const Index base = p * s.h * s.w;
    for (Index y = 0; y < s.h; ++y) {
      for (Index x = 0; x < s.w; ++x) {
        const Index i = base + y * s.w + x;
        if (!in_region(i)) continue;
        if (x + 1 < s.w && in_region(i + 1)) {
          tv_h += std::abs(comp.data()[i + 1] - comp.data()[i]);
          ++n_h;
        }
        if (y + 1 < s.h && in_region(i + s.w)) {
          tv_v += std::abs(comp.data()[i + s.w] - comp.data()[i]);
          ++n_v;
        }
      }
    }
  }
  const Scalar ch = n_h ? Scalar(w.tv) / static_cast<Scalar>(n_h) : Scalar(0);
  const Scalar cv = n_v ? Scalar(w.tv) / static_cast<Scalar>(n_v) : Scalar(0);
  r.tv = (n_h ? tv_h / static_cast<Scalar>(n_h) : Scalar(0)) + (n_v ? tv_v / static_cast<Scalar>(n_v) : Scalar(0));
  if (w.tv != 0.0) {
    for (Index p = 0; p < planes; ++p) {
      const Index base = p * s.h * s.w;
      for (Index y = 0; y < s.h; ++y) {
        for (Index x = 0; x < s.w; ++x) {
          const Index i = base + y * s.w + x;
          if (!in_region(i)) continue;
          if (x + 1 < s.w && in_region(i + 1)) {
            const Scalar g = detail::sign(comp.data()[i + 1] - comp.data()[i]) * ch;
            dcomp[i + 1] += g;
            dcomp[i] -= g;
          }
          if (y + 1 < s.h && in_region(i + s.w)) {
            const Scalar g = detail::sign(comp.data()[i + s.w] - comp.data()[i]) * cv;
            dcomp[i + s.w] += g;
            dcomp[i] -= g;
          }
        }
      }
    }
  }

  grad += hole * dcomp;
  r.total = Scalar(w.valid) * r.valid + Scalar(w.hole) * r.hole + Scalar(w.perceptual) * r.perceptual +
            Scalar(w.style) * r.style + Scalar(w.tv) * r.tv;
  r.grad = Tensor<Scalar>(s, std::move(grad));
  return r;
}

}  // namespace petprior::inpaint

#endif  // PETPRIOR_INPAINT_LOSS_HPP
