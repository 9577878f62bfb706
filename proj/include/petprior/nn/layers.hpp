#ifndef PETPRIOR_NN_LAYERS_HPP
#define PETPRIOR_NN_LAYERS_HPP

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "petprior/nn/tensor.hpp"

namespace petprior::nn {

/// Per-channel batch normalization over N and all spatial positions.
/// `frozen` switches to running statistics and fixes the affine terms.
template <typename Scalar>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(const std::string& name, Index channels)
      : gamma(name + ".gamma", Shape{1, channels}),
        beta(name + ".beta", Shape{1, channels}),
        running_mean(name + ".running_mean", Shape{1, channels}, true),
        running_var(name + ".running_var", Shape{1, channels}, true) {
    gamma.value.data().setOnes();
    running_var.value.data().setOnes();
  }

  void set_frozen(bool frozen) {
    frozen_ = frozen;
    gamma.trainable = !frozen;
    beta.trainable = !frozen;
  }
  bool frozen() const { return frozen_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training) {
    const Shape s = x.shape();
    const Index channels = s.c;
    const Index m = s.n * s.spatial();
    use_batch_stats_ = training && !frozen_;
    mean_.resize(channels);
    inv_std_.resize(channels);
    if (use_batch_stats_) {
      mean_.setZero();
      Eigen::Array<Scalar, Eigen::Dynamic, 1> var = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(channels);
      for (Index n = 0; n < s.n; ++n) mean_ += x.sample(n).rowwise().sum().array();
      mean_ /= static_cast<Scalar>(m);
      for (Index n = 0; n < s.n; ++n)
        var += (x.sample(n).array().colwise() - mean_).square().rowwise().sum();
      var /= static_cast<Scalar>(m);
      inv_std_ = (var + kEps).rsqrt();
      const Scalar unbias = m > 1 ? static_cast<Scalar>(m) / static_cast<Scalar>(m - 1) : Scalar(1);
      running_mean.value.data() = (1 - kMomentum) * running_mean.value.data() + kMomentum * mean_;
      running_var.value.data() = (1 - kMomentum) * running_var.value.data() + kMomentum * var * unbias;
    } else {
      mean_ = running_mean.value.data();
      inv_std_ = (running_var.value.data() + kEps).rsqrt();
    }
    xhat_ = Tensor<Scalar>(s);
    Tensor<Scalar> y(s);
    for (Index n = 0; n < s.n; ++n) {
      auto xh = xhat_.sample(n);
      xh = ((x.sample(n).array().colwise() - mean_).colwise() * inv_std_).matrix();
      y.sample(n) = ((xh.array().colwise() * gamma.value.data()).colwise() + beta.value.data()).matrix();
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const Shape s = dy.shape();
    const Index channels = s.c;
    const auto m = static_cast<Scalar>(s.n * s.spatial());
    Eigen::Array<Scalar, Eigen::Dynamic, 1> sum_dy = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(channels);
    Eigen::Array<Scalar, Eigen::Dynamic, 1> sum_dy_xhat = sum_dy;
    for (Index n = 0; n < s.n; ++n) {
      sum_dy += dy.sample(n).rowwise().sum().array();
      sum_dy_xhat += (dy.sample(n).array() * xhat_.sample(n).array()).rowwise().sum();
    }
    if (gamma.trainable) {
      gamma.grad.data() += sum_dy_xhat;
      beta.grad.data() += sum_dy;
    }
    Tensor<Scalar> dx(s);
    const auto g = gamma.value.data();
    for (Index n = 0; n < s.n; ++n) {
      if (use_batch_stats_) {
        auto t = (dy.sample(n).array() * m).colwise() - sum_dy;
        auto u = xhat_.sample(n).array().colwise() * sum_dy_xhat;
        dx.sample(n) = ((t - u).colwise() * (g * inv_std_ / m)).matrix();
      } else {
        dx.sample(n) = (dy.sample(n).array().colwise() * (g * inv_std_)).matrix();
      }
    }
    return dx;
  }

  std::vector<Parameter<Scalar>*> parameters() { return {&gamma, &beta, &running_mean, &running_var}; }

  Parameter<Scalar> gamma;
  Parameter<Scalar> beta;
  Parameter<Scalar> running_mean;
  Parameter<Scalar> running_var;

 private:
  static constexpr Scalar kEps = Scalar(1e-5);
  static constexpr Scalar kMomentum = Scalar(0.1);
  bool frozen_ = false;
  bool use_batch_stats_ = true;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> mean_;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> inv_std_;
  Tensor<Scalar> xhat_;
};

/// Per-sample, per-channel normalization over spatial positions with affine.
template <typename Scalar>
class InstanceNorm {
 public:
  InstanceNorm() = default;
  InstanceNorm(const std::string& name, Index channels)
      : gamma(name + ".gamma", Shape{1, channels}), beta(name + ".beta", Shape{1, channels}) {
    gamma.value.data().setOnes();
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    const Shape s = x.shape();
    const auto m = static_cast<Scalar>(s.spatial());
    xhat_ = Tensor<Scalar>(s);
    inv_std_.resize(s.n, s.c);
    Tensor<Scalar> y(s);
    for (Index n = 0; n < s.n; ++n) {
      const auto xs = x.sample(n).array();
      const Eigen::Array<Scalar, Eigen::Dynamic, 1> mean = xs.rowwise().sum() / m;
      const Eigen::Array<Scalar, Eigen::Dynamic, 1> var = (xs.colwise() - mean).square().rowwise().sum() / m;
      const Eigen::Array<Scalar, Eigen::Dynamic, 1> inv = (var + kEps).rsqrt();
      inv_std_.row(n) = inv.transpose();
      auto xh = xhat_.sample(n);
      xh = ((xs.colwise() - mean).colwise() * inv).matrix();
      y.sample(n) = ((xh.array().colwise() * gamma.value.data()).colwise() + beta.value.data()).matrix();
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) {
    const Shape s = dy.shape();
    const auto m = static_cast<Scalar>(s.spatial());
    Tensor<Scalar> dx(s);
    const auto g = gamma.value.data();
    for (Index n = 0; n < s.n; ++n) {
      const auto d = dy.sample(n).array();
      const auto xh = xhat_.sample(n).array();
      const Eigen::Array<Scalar, Eigen::Dynamic, 1> sum_dy = d.rowwise().sum();
      const Eigen::Array<Scalar, Eigen::Dynamic, 1> sum_dy_xhat = (d * xh).rowwise().sum();
      gamma.grad.data() += sum_dy_xhat;
      beta.grad.data() += sum_dy;
      const Eigen::Array<Scalar, Eigen::Dynamic, 1> scale = g * inv_std_.row(n).transpose() / m;
      dx.sample(n) = ((((d * m).colwise() - sum_dy) - (xh.colwise() * sum_dy_xhat)).colwise() * scale).matrix();
    }
    return dx;
  }

  std::vector<Parameter<Scalar>*> parameters() { return {&gamma, &beta}; }

  Parameter<Scalar> gamma;
  Parameter<Scalar> beta;

 private:
  static constexpr Scalar kEps = Scalar(1e-5);
  Tensor<Scalar> xhat_;
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> inv_std_;
};

/// max(x, 0) + slope * min(x, 0); slope 0 is ReLU.
template <typename Scalar>
class LeakyRelu {
 public:
  explicit LeakyRelu(Scalar slope = Scalar(0)) : slope_(slope) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x) {
    input_ = x;
    return Tensor<Scalar>(x.shape(), (x.data() > Scalar(0)).select(x.data(), slope_ * x.data()));
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy) const {
    return Tensor<Scalar>(dy.shape(), (input_.data() > Scalar(0)).select(dy.data(), slope_ * dy.data()));
  }

 private:
  Scalar slope_;
  Tensor<Scalar> input_;
};

/// Nearest-neighbour upsampling by integer factors (d, h, w).
template <typename Scalar>
Tensor<Scalar> upsample_nearest(const Tensor<Scalar>& x, std::array<Index, 3> f) {
  const Shape s = x.shape();
  const Shape o{s.n, s.c, s.d * f[0], s.h * f[1], s.w * f[2]};
  Tensor<Scalar> y(o);
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c)
      for (Index z = 0; z < o.d; ++z)
        for (Index yy = 0; yy < o.h; ++yy)
          for (Index xx = 0; xx < o.w; ++xx) y.at(n, c, z, yy, xx) = x.at(n, c, z / f[0], yy / f[1], xx / f[2]);
  return y;
}

/// Adjoint of upsample_nearest.
template <typename Scalar>
Tensor<Scalar> upsample_nearest_backward(const Tensor<Scalar>& dy, std::array<Index, 3> f) {
  const Shape o = dy.shape();
  const Shape s{o.n, o.c, o.d / f[0], o.h / f[1], o.w / f[2]};
  Tensor<Scalar> dx(s);
  for (Index n = 0; n < o.n; ++n)
    for (Index c = 0; c < o.c; ++c)
      for (Index z = 0; z < o.d; ++z)
        for (Index yy = 0; yy < o.h; ++yy)
          for (Index xx = 0; xx < o.w; ++xx) dx.at(n, c, z / f[0], yy / f[1], xx / f[2]) += dy.at(n, c, z, yy, xx);
  return dx;
}

/// Adam with bias correction. Only trainable, non-buffer parameters move.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter<Scalar>*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->grad.set_zero();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto step_size = static_cast<Scalar>(lr_ / bc1);
    const auto b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    const auto inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
    const auto eps = static_cast<Scalar>(eps_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter<Scalar>& p = *params_[i];
      if (p.buffer || !p.trainable) continue;
      auto& m = m_[i].data();
      auto& v = v_[i].data();
      const auto& g = p.grad.data();
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g.square();
      p.value.data() -= step_size * m / (v.sqrt() * inv_sqrt_bc2 + eps);
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  std::vector<Tensor<Scalar>>& first_moments() { return m_; }
  std::vector<Tensor<Scalar>>& second_moments() { return v_; }
  const std::vector<Parameter<Scalar>*>& params() const { return params_; }

 private:
  std::vector<Parameter<Scalar>*> params_;
  std::vector<Tensor<Scalar>> m_;
  std::vector<Tensor<Scalar>> v_;
  double lr_ = 1e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace petprior::nn

#endif  // PETPRIOR_NN_LAYERS_HPP
