#ifndef PETPRIOR_GRADCHECK_HPP
#define PETPRIOR_GRADCHECK_HPP

#include <algorithm>
#include <random>

#include "petprior/inpaint/loss.hpp"
#include "petprior/segment/loss.hpp"

namespace petprior::testing {

using nn::Index;
using nn::Shape;
using nn::Tensor;

/// Central differences of a scalar function of x.
template <typename F>
Tensor<double> numerical_gradient(Tensor<double> x, F&& f, double eps = 1e-6) {
  Tensor<double> g(x.shape());
  for (Index i = 0; i < x.numel(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + eps;
    const double up = f(x);
    x.data()[i] = keep - eps;
    const double down = f(x);
    x.data()[i] = keep;
    g.data()[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(const Tensor<double>& a, const Tensor<double>& b) {
  const double scale = std::max(a.data().matrix().norm(), b.data().matrix().norm());
  if (scale == 0.0) return 0.0;
  return (a.data() - b.data()).matrix().norm() / scale;
}

inline Tensor<double> uniform_tensor(Shape s, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(s);
  for (Index i = 0; i < t.numel(); ++i) t.data()[i] = u(rng);
  return t;
}

/// Random 0/1 hole mask (1 = valid) broadcast over channels, with holes in
/// blocks so the dilated TV region is non-trivial.
inline Tensor<double> block_hole_mask(Shape s, std::mt19937_64& rng) {
  Tensor<double> m = Tensor<double>::constant(s, 1.0);
  std::uniform_int_distribution<Index> ry(0, s.h - 3), rx(0, s.w - 3);
  for (Index n = 0; n < s.n; ++n) {
    for (int k = 0; k < 2; ++k) {
      const Index y0 = ry(rng), x0 = rx(rng);
      for (Index c = 0; c < s.c; ++c)
        for (Index y = y0; y < y0 + 3; ++y)
          for (Index x = x0; x < x0 + 3; ++x) m.at(n, c, 0, y, x) = 0.0;
    }
  }
  return m;
}

/// Analytic vs numerical gradient of the full inpainting loss w.r.t. pred.
inline double inpaint_loss_gradient_error(std::uint64_t seed, Shape s = Shape{1, 3, 1, 8, 8}) {
  std::mt19937_64 rng(seed);
  const auto pred = uniform_tensor(s, rng, 0.05, 0.95);
  const auto target = uniform_tensor(s, rng, 0.05, 0.95);
  const auto mask = block_hole_mask(s, rng);
  inpaint::FeaturePyramid<double> features(seed + 1);
  const inpaint::InpaintLossWeights w;
  const auto analytic = inpaint::inpaint_loss(pred, target, mask, &features, w).grad;
  const auto numeric = numerical_gradient(pred, [&](const Tensor<double>& p) {
    return inpaint::inpaint_loss(p, target, mask, &features, w).total;
  });
  return relative_error(analytic, numeric);
}

inline double dice_ce_gradient_error(std::uint64_t seed, Shape s = Shape{1, 1, 4, 4, 4}) {
  std::mt19937_64 rng(seed);
  const auto logits = uniform_tensor(s, rng, -3.0, 3.0);
  Tensor<double> target(s);
  std::bernoulli_distribution b(0.4);
  for (Index i = 0; i < target.numel(); ++i) target.data()[i] = b(rng) ? 1.0 : 0.0;
  const auto analytic = segment::dice_ce_loss(logits, target).grad;
  const auto numeric =
      numerical_gradient(logits, [&](const Tensor<double>& z) { return segment::dice_ce_loss(z, target).total; });
  return relative_error(analytic, numeric);
}

}  // namespace petprior::testing

#endif  // PETPRIOR_GRADCHECK_HPP
