#ifndef PETPRIOR_NN_CONV_HPP
#define PETPRIOR_NN_CONV_HPP

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "petprior/nn/tensor.hpp"

namespace petprior::nn {

/// Kernel, stride and zero padding per axis (d, h, w).
struct ConvGeometry {
  std::array<Index, 3> kernel{1, 3, 3};
  std::array<Index, 3> stride{1, 1, 1};
  std::array<Index, 3> padding{0, 1, 1};

  static ConvGeometry planar(Index k, Index stride = 1) { return {{1, k, k}, {1, stride, stride}, {0, k / 2, k / 2}}; }
  static ConvGeometry cubic(Index k, Index stride = 1) { return {{k, k, k}, {stride, stride, stride}, {k / 2, k / 2, k / 2}}; }

  Index kvol() const { return kernel[0] * kernel[1] * kernel[2]; }
  bool pointwise() const {
    return kvol() == 1 && stride == std::array<Index, 3>{1, 1, 1} && padding == std::array<Index, 3>{0, 0, 0};
  }
  Index out_dim(Index in, int axis) const {
    const auto a = static_cast<std::size_t>(axis);
    return (in + 2 * padding[a] - kernel[a]) / stride[a] + 1;
  }
  Shape output_shape(const Shape& in, Index out_channels) const {
    return Shape{in.n, out_channels, out_dim(in.d, 0), out_dim(in.h, 1), out_dim(in.w, 2)};
  }
};

namespace detail {

/// Unfolds one sample (C x D x H x W) into a (C*kvol) x (Do*Ho*Wo) matrix.
template <typename Scalar>
void im2col(const Scalar* in, const Shape& s, const ConvGeometry& g, const Shape& o, Scalar* cols) {
  const Index P = o.spatial();
  const auto [kd, kh, kw] = g.kernel;
  const auto [sd, sh, sw] = g.stride;
  const auto [pd, ph, pw] = g.padding;
  Index row = 0;
  for (Index ci = 0; ci < s.c; ++ci) {
    for (Index a = 0; a < kd; ++a) {
      for (Index b = 0; b < kh; ++b) {
        for (Index e = 0; e < kw; ++e, ++row) {
          Scalar* dst = cols + row * P;
          for (Index z = 0; z < o.d; ++z) {
            const Index iz = z * sd - pd + a;
            for (Index y = 0; y < o.h; ++y) {
              Scalar* drow = dst + (z * o.h + y) * o.w;
              const Index iy = y * sh - ph + b;
              if (iz < 0 || iz >= s.d || iy < 0 || iy >= s.h) {
                std::fill(drow, drow + o.w, Scalar(0));
                continue;
              }
              const Scalar* src = in + ((ci * s.d + iz) * s.h + iy) * s.w;
              for (Index x = 0; x < o.w; ++x) {
                const Index ix = x * sw - pw + e;
                drow[x] = (ix >= 0 && ix < s.w) ? src[ix] : Scalar(0);
              }
            }
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters-adds columns back into a sample.
template <typename Scalar>
void col2im(const Scalar* cols, const Shape& s, const ConvGeometry& g, const Shape& o, Scalar* out) {
  const Index P = o.spatial();
  const auto [kd, kh, kw] = g.kernel;
  const auto [sd, sh, sw] = g.stride;
  const auto [pd, ph, pw] = g.padding;
  Index row = 0;
  for (Index ci = 0; ci < s.c; ++ci) {
    for (Index a = 0; a < kd; ++a) {
      for (Index b = 0; b < kh; ++b) {
        for (Index e = 0; e < kw; ++e, ++row) {
          const Scalar* src = cols + row * P;
          for (Index z = 0; z < o.d; ++z) {
            const Index iz = z * sd - pd + a;
            if (iz < 0 || iz >= s.d) continue;
            for (Index y = 0; y < o.h; ++y) {
              const Index iy = y * sh - ph + b;
              if (iy < 0 || iy >= s.h) continue;
              const Scalar* srow = src + (z * o.h + y) * o.w;
              Scalar* dst = out + ((ci * s.d + iz) * s.h + iy) * s.w;
              for (Index x = 0; x < o.w; ++x) {
                const Index ix = x * sw - pw + e;
                if (ix >= 0 && ix < s.w) dst[ix] += srow[x];
              }
            }
          }
        }
      }
    }
  }
}

template <typename Scalar>
using ColMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
ColMatrix<Scalar> unfold(const Tensor<Scalar>& x, Index n, const ConvGeometry& g, const Shape& o) {
  const Shape s = x.shape();
  if (g.pointwise()) return x.sample(n);
  ColMatrix<Scalar> cols(s.c * g.kvol(), o.spatial());
  im2col(x.data().data() + n * s.c * s.spatial(), s, g, o, cols.data());
  return cols;
}

}  // namespace detail

/// Plain convolution of x with weights (Cout, Cin, kd, kh, kw) and bias (Cout).
template <typename Scalar>
Tensor<Scalar> conv_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                            const Tensor<Scalar>& bias, const ConvGeometry& g) {
  const Shape s = x.shape();
  const Index cout = weight.shape().n;
  require(weight.shape().c == s.c, ErrorCode::kShapeMismatch,
          "conv: input has " + std::to_string(s.c) + " channels, weights expect " +
              std::to_string(weight.shape().c));
  const Shape o = g.output_shape(s, cout);
  Tensor<Scalar> y(o);
  const auto w = typename Tensor<Scalar>::ConstMatrixMap(weight.data().data(), cout, s.c * g.kvol());
  for (Index n = 0; n < s.n; ++n) {
    const auto cols = detail::unfold(x, n, g, o);
    auto out = y.sample(n);
    out.noalias() = w * cols;
    out.colwise() += bias.data().matrix();
  }
  return y;
}

template <typename Scalar>
class Conv {
 public:
  Conv() = default;
  Conv(const std::string& name, Index in_channels, Index out_channels, ConvGeometry geometry)
      : weight(name + ".weight", Shape{out_channels, in_channels, geometry.kernel[0], geometry.kernel[1], geometry.kernel[2]}),
        bias(name + ".bias", Shape{1, out_channels}),
        geometry_(geometry) {}

  void init(std::mt19937_64& rng, double negative_slope = 0.0) {
    kaiming_normal(weight.value, weight.value.shape().c * geometry_.kvol(), rng, negative_slope);
    bias.value.set_zero();
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    input_ = x;
    return conv_forward(x, weight.value, bias.value, geometry_);
  }

  /// Accumulates weight/bias gradients and returns dL/dx.
  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const Shape s = input_.shape();
    const Shape o = dy.shape();
    const Index cout = o.c;
    const Index k = s.c * geometry_.kvol();
    auto w = typename Tensor<Scalar>::MatrixMap(weight.value.data().data(), cout, k);
    auto dw = typename Tensor<Scalar>::MatrixMap(weight.grad.data().data(), cout, k);
    Tensor<Scalar> dx(s);
    for (Index n = 0; n < s.n; ++n) {
      const auto g = dy.sample(n);
      bias.grad.data().matrix() += g.rowwise().sum();
      const auto cols = detail::unfold(input_, n, geometry_, o);
      dw.noalias() += g * cols.transpose();
      if (geometry_.pointwise()) {
        dx.sample(n).noalias() = w.transpose() * g;
      } else {
        detail::ColMatrix<Scalar> dcols = w.transpose() * g;
        detail::col2im(dcols.data(), s, geometry_, o, dx.data().data() + n * s.c * s.spatial());
      }
    }
    return dx;
  }

  std::vector<Parameter<Scalar>*> parameters() { return {&weight, &bias}; }
  const ConvGeometry& geometry() const { return geometry_; }
  void release() { input_ = Tensor<Scalar>(); }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

 private:
  ConvGeometry geometry_;
  Tensor<Scalar> input_;
};

/// Partial convolution with a multi-channel validity mask (same shape as the
/// input). Per output location, with M the window mask and K = kvol * Cin:
///   sum(M) > 0:  y = W . (X * M) * K / (sum(M) + P) + b,  mask_out = 1
///   sum(M) = 0:  y = 0,                                     mask_out = 0
/// P counts window entries that fall in the zero padding; they are treated as
/// valid zeros rather than holes. mask_out is broadcast to all output channels.
template <typename Scalar>
class PartialConv {
 public:
  struct Output {
    Tensor<Scalar> features;
    Tensor<Scalar> mask;
  };

  PartialConv() = default;
  PartialConv(const std::string& name, Index in_channels, Index out_channels, ConvGeometry geometry)
      : weight(name + ".weight", Shape{out_channels, in_channels, geometry.kernel[0], geometry.kernel[1], geometry.kernel[2]}),
        bias(name + ".bias", Shape{1, out_channels}),
        geometry_(geometry) {}

  void init(std::mt19937_64& rng, double negative_slope = 0.0) {
    kaiming_normal(weight.value, weight.value.shape().c * geometry_.kvol(), rng, negative_slope);
    bias.value.set_zero();
  }

  Index window_ones_count() const { return weight.value.shape().c * geometry_.kvol(); }

  Output forward(const Tensor<Scalar>& x, const Tensor<Scalar>& mask) {
    const Shape s = x.shape();
    require(mask.shape() == s, ErrorCode::kShapeMismatch,
            "partial conv: mask " + to_string(mask.shape()) + " vs features " + to_string(s));
    const Index cout = weight.value.shape().n;
    require(weight.value.shape().c == s.c, ErrorCode::kShapeMismatch, "partial conv: channel mismatch");
    const Shape o = geometry_.output_shape(s, cout);

    masked_input_ = Tensor<Scalar>(s, x.data() * mask.data());
    input_mask_ = mask;
    ratio_ = Tensor<Scalar>(Shape{s.n, 1, o.d, o.h, o.w});

    // Window sums of the mask: channel-summed mask convolved with ones.
    const ConvGeometry& g = geometry_;
    Tensor<Scalar> mask_sum_in(Shape{s.n, 1, s.d, s.h, s.w});
    for (Index n = 0; n < s.n; ++n) mask_sum_in.sample(n) = mask.sample(n).colwise().sum();
    const Scalar full = static_cast<Scalar>(window_ones_count());
    // Zero padding counts as valid, so an all-ones mask reduces to plain convolution.
    const Tensor<Scalar> ones = Tensor<Scalar>::constant(Shape{1, 1, s.d, s.h, s.w}, Scalar(1));
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> padded =
        (Scalar(g.kvol()) - detail::unfold(ones, 0, g, o).colwise().sum().array()).matrix() * Scalar(s.c);

    Output out{Tensor<Scalar>(o), Tensor<Scalar>(o)};
    const auto w = typename Tensor<Scalar>::ConstMatrixMap(weight.value.data().data(), cout, s.c * g.kvol());
    for (Index n = 0; n < s.n; ++n) {
      const auto mcols = detail::unfold(mask_sum_in, n, g, o);
      const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> msum = mcols.colwise().sum();
      auto ratio = ratio_.sample(n);
      for (Index p = 0; p < o.spatial(); ++p) {
        ratio(0, p) = msum(p) > Scalar(0) ? full / (msum(p) + padded(p)) : Scalar(0);
      }

      const auto cols = detail::unfold(masked_input_, n, g, o);
      auto y = out.features.sample(n);
      y.noalias() = w * cols;
      for (Index p = 0; p < o.spatial(); ++p) {
        if (ratio(0, p) > Scalar(0)) {
          y.col(p) = y.col(p) * ratio(0, p) + bias.value.data().matrix();
          out.mask.sample(n).col(p).setOnes();
        } else {
          y.col(p).setZero();
        }
      }
    }
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const Shape s = masked_input_.shape();
    const Shape o = dy.shape();
    const Index cout = o.c;
    const Index k = s.c * geometry_.kvol();
    auto w = typename Tensor<Scalar>::MatrixMap(weight.value.data().data(), cout, k);
    auto dw = typename Tensor<Scalar>::MatrixMap(weight.grad.data().data(), cout, k);
    Tensor<Scalar> dx(s);
    for (Index n = 0; n < s.n; ++n) {
      const auto ratio = ratio_.sample(n);
      typename Tensor<Scalar>::Matrix g = dy.sample(n);
      for (Index p = 0; p < o.spatial(); ++p) {
        if (ratio(0, p) > Scalar(0)) {
          bias.grad.data().matrix() += g.col(p);
          g.col(p) *= ratio(0, p);
        } else {
          g.col(p).setZero();
        }
      }
      const auto cols = detail::unfold(masked_input_, n, geometry_, o);
      dw.noalias() += g * cols.transpose();
      if (geometry_.pointwise()) {
        dx.sample(n).noalias() = w.transpose() * g;
      } else {
        detail::ColMatrix<Scalar> dcols = w.transpose() * g;
        detail::col2im(dcols.data(), s, geometry_, o, dx.data().data() + n * s.c * s.spatial());
      }
    }
    dx.data() *= input_mask_.data();
    return dx;
  }

  std::vector<Parameter<Scalar>*> parameters() { return {&weight, &bias}; }
  const ConvGeometry& geometry() const { return geometry_; }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

 private:
  ConvGeometry geometry_;
  Tensor<Scalar> masked_input_;
  Tensor<Scalar> input_mask_;
  Tensor<Scalar> ratio_;
};

/// Transposed convolution with kernel == stride (no overlap), used for 2x
/// upsampling in the segmentation decoder. Weights hold one Cout x Cin matrix
/// per kernel offset.
template <typename Scalar>
class TransposedConv {
 public:
  TransposedConv() = default;
  TransposedConv(const std::string& name, Index in_channels, Index out_channels, std::array<Index, 3> factor)
      : weight(name + ".weight", Shape{factor[0] * factor[1] * factor[2], out_channels, 1, 1, in_channels}),
        bias(name + ".bias", Shape{1, out_channels}),
        factor_(factor) {}

  void init(std::mt19937_64& rng) {
    kaiming_normal(weight.value, weight.value.shape().w, rng);
    bias.value.set_zero();
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    input_ = x;
    const Shape s = x.shape();
    const Index cout = weight.value.shape().c;
    const auto [fd, fh, fw] = factor_;
    const Shape o{s.n, cout, s.d * fd, s.h * fh, s.w * fw};
    Tensor<Scalar> y(o);
    typename Tensor<Scalar>::Matrix part(cout, s.spatial());
    for (Index n = 0; n < s.n; ++n) {
      Index k = 0;
      for (Index a = 0; a < fd; ++a)
        for (Index b = 0; b < fh; ++b)
          for (Index e = 0; e < fw; ++e, ++k) {
            part.noalias() = kernel(k) * x.sample(n);
            part.colwise() += bias.value.data().matrix();
            for (Index c = 0; c < cout; ++c)
              for (Index z = 0; z < s.d; ++z)
                for (Index yy = 0; yy < s.h; ++yy)
                  for (Index xx = 0; xx < s.w; ++xx)
                    y.at(n, c, z * fd + a, yy * fh + b, xx * fw + e) = part(c, (z * s.h + yy) * s.w + xx);
          }
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const Shape s = input_.shape();
    const Index cout = weight.value.shape().c;
    const auto [fd, fh, fw] = factor_;
    Tensor<Scalar> dx(s);
    typename Tensor<Scalar>::Matrix part(cout, s.spatial());
    for (Index n = 0; n < s.n; ++n) {
      Index k = 0;
      for (Index a = 0; a < fd; ++a)
        for (Index b = 0; b < fh; ++b)
          for (Index e = 0; e < fw; ++e, ++k) {
            for (Index c = 0; c < cout; ++c)
              for (Index z = 0; z < s.d; ++z)
                for (Index yy = 0; yy < s.h; ++yy)
                  for (Index xx = 0; xx < s.w; ++xx)
                    part(c, (z * s.h + yy) * s.w + xx) = dy.at(n, c, z * fd + a, yy * fh + b, xx * fw + e);
            bias.grad.data().matrix() += part.rowwise().sum();
            kernel_grad(k).noalias() += part * input_.sample(n).transpose();
            dx.sample(n).noalias() += kernel(k).transpose() * part;
          }
    }
    return dx;
  }

  std::vector<Parameter<Scalar>*> parameters() { return {&weight, &bias}; }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

 private:
  typename Tensor<Scalar>::MatrixMap kernel(Index k) {
    const Index cout = weight.value.shape().c, cin = weight.value.shape().w;
    return typename Tensor<Scalar>::MatrixMap(weight.value.data().data() + k * cout * cin, cout, cin);
  }
  typename Tensor<Scalar>::MatrixMap kernel_grad(Index k) {
    const Index cout = weight.value.shape().c, cin = weight.value.shape().w;
    return typename Tensor<Scalar>::MatrixMap(weight.grad.data().data() + k * cout * cin, cout, cin);
  }

  std::array<Index, 3> factor_{2, 2, 2};
  Tensor<Scalar> input_;
};

}  // namespace petprior::nn

#endif  // PETPRIOR_NN_CONV_HPP
