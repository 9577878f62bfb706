#ifndef PETPRIOR_PCONV_ORACLE_HPP
#define PETPRIOR_PCONV_ORACLE_HPP

#include <algorithm>
#include <random>

#include "petprior/nn/conv.hpp"

namespace petprior::testing {

using nn::Index;
using nn::Shape;
using nn::Tensor;

/// Direct-loop planar convolution (zero padding), written independently of im2col.
inline Tensor<double> direct_conv2d(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                                    Index stride, Index pad) {
  const Shape s = x.shape();
  const Index cout = w.shape().n, k = w.shape().h;
  const Index oh = (s.h + 2 * pad - k) / stride + 1, ow = (s.w + 2 * pad - k) / stride + 1;
  Tensor<double> y(Shape{s.n, cout, 1, oh, ow});
  for (Index n = 0; n < s.n; ++n)
    for (Index co = 0; co < cout; ++co)
      for (Index oy = 0; oy < oh; ++oy)
        for (Index ox = 0; ox < ow; ++ox) {
          double acc = b.data()[co];
          for (Index ci = 0; ci < s.c; ++ci)
            for (Index ky = 0; ky < k; ++ky)
              for (Index kx = 0; kx < k; ++kx) {
                const Index iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                if (iy < 0 || ix < 0 || iy >= s.h || ix >= s.w) continue;
                acc += w.at(co, ci, 0, ky, kx) * x.at(n, ci, 0, iy, ix);
              }
          y.at(n, co, 0, oy, ox) = acc;
        }
  return y;
}

/// Largest |partial conv - convolution| over `trials` random layers with an all-ones mask.
/// Random kernel (1/3/5/7), stride (1/2), channel counts and bias.
inline double pconv_all_ones_max_diff(int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Index k = std::array<Index, 4>{1, 3, 5, 7}[std::uniform_int_distribution<int>(0, 3)(rng)];
    const Index stride = std::uniform_int_distribution<Index>(1, 2)(rng);
    const Index cin = std::uniform_int_distribution<Index>(1, 4)(rng);
    const Index cout = std::uniform_int_distribution<Index>(1, 4)(rng);
    const Index h = std::uniform_int_distribution<Index>(k, 12)(rng), w = std::uniform_int_distribution<Index>(k, 12)(rng);
    nn::PartialConv<double> layer("p", cin, cout, nn::ConvGeometry::planar(k, stride));
    for (Index i = 0; i < layer.weight.value.numel(); ++i) layer.weight.value.data()[i] = normal(rng);
    for (Index i = 0; i < layer.bias.value.numel(); ++i) layer.bias.value.data()[i] = normal(rng);
    Tensor<double> x(Shape{2, cin, 1, h, w});
    for (Index i = 0; i < x.numel(); ++i) x.data()[i] = normal(rng);
    const auto out = layer.forward(x, Tensor<double>::constant(x.shape(), 1.0));
    const auto ref = direct_conv2d(x, layer.weight.value, layer.bias.value, stride, k / 2);
    if (!(out.features.shape() == ref.shape())) return 1e9;
    if (!(out.mask.data() == 1.0).all()) return 1e9;
    worst = std::max(worst, (out.features.data() - ref.data()).abs().maxCoeff());
  }
  return worst;
}

/// 5x5 single-channel input, 3x3 kernel, one masked pixel at `hole`. Returns
/// max |layer - hand evaluation| where the hand evaluation sums valid in-image
/// taps and rescales by 9 / (9 - holes in window); padding taps count as valid.
inline double pconv_single_hole_error(Index hole_y, Index hole_x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nn::PartialConv<double> layer("p", 1, 1, nn::ConvGeometry::planar(3, 1));
  for (Index i = 0; i < 9; ++i) layer.weight.value.data()[i] = u(rng);
  layer.bias.value.data()[0] = 0.25;
  Tensor<double> x(Shape{1, 1, 1, 5, 5});
  for (Index i = 0; i < 25; ++i) x.data()[i] = u(rng);
  Tensor<double> m = Tensor<double>::constant(x.shape(), 1.0);
  m.at(0, 0, 0, hole_y, hole_x) = 0.0;
  const auto out = layer.forward(x, m);
  double worst = 0.0;
  for (Index oy = 0; oy < 5; ++oy) {
    for (Index ox = 0; ox < 5; ++ox) {
      double acc = 0.0;
      int holes = 0;
      for (Index ky = 0; ky < 3; ++ky) {
        for (Index kx = 0; kx < 3; ++kx) {
          const Index iy = oy + ky - 1, ix = ox + kx - 1;
          if (iy < 0 || ix < 0 || iy >= 5 || ix >= 5) continue;
          if (iy == hole_y && ix == hole_x) {
            ++holes;
            continue;
          }
          acc += layer.weight.value.at(0, 0, 0, ky, kx) * x.at(0, 0, 0, iy, ix);
        }
      }
      const double expected = acc * 9.0 / (9.0 - holes) + 0.25;
      worst = std::max(worst, std::abs(out.features.at(0, 0, 0, oy, ox) - expected));
      if (out.mask.at(0, 0, 0, oy, ox) != 1.0) return 1e9;
    }
  }
  return worst;
}

}  // namespace petprior::testing

#endif  // PETPRIOR_PCONV_ORACLE_HPP
