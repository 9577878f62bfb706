#ifndef PETPRIOR_NN_TENSOR_HPP
#define PETPRIOR_NN_TENSOR_HPP

#include <Eigen/Dense>

#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "petprior/error.hpp"

namespace petprior::nn {

using Index = Eigen::Index;

/// N x C x D x H x W, W fastest. 2D data uses D = 1.
struct Shape {
  Index n = 0;
  Index c = 0;
  Index d = 1;
  Index h = 1;
  Index w = 1;

  Index spatial() const { return d * h * w; }
  Index numel() const { return n * c * spatial(); }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << "[" << s.n << ", " << s.c << ", " << s.d << ", " << s.h << ", " << s.w << "]";
  return os.str();
}

template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape), data_(Array::Zero(shape.numel())) {}
  Tensor(Shape shape, Array data) : shape_(shape), data_(std::move(data)) {
    require(data_.size() == shape_.numel(), ErrorCode::kShapeMismatch,
            "tensor data does not match shape " + to_string(shape_));
  }

  static Tensor constant(Shape shape, Scalar value) { return Tensor(shape, Array::Constant(shape.numel(), value)); }

  const Shape& shape() const { return shape_; }
  Array& data() { return data_; }
  const Array& data() const { return data_; }
  Index numel() const { return shape_.numel(); }

  /// Sample n viewed as C x (D*H*W).
  MatrixMap sample(Index n) {
    return MatrixMap(data_.data() + n * shape_.c * shape_.spatial(), shape_.c, shape_.spatial());
  }
  ConstMatrixMap sample(Index n) const {
    return ConstMatrixMap(data_.data() + n * shape_.c * shape_.spatial(), shape_.c, shape_.spatial());
  }

  Index offset(Index n, Index c, Index z, Index y, Index x) const {
    return (((n * shape_.c + c) * shape_.d + z) * shape_.h + y) * shape_.w + x;
  }
  Scalar& at(Index n, Index c, Index z, Index y, Index x) { return data_[offset(n, c, z, y, x)]; }
  Scalar at(Index n, Index c, Index z, Index y, Index x) const { return data_[offset(n, c, z, y, x)]; }

  void set_zero() { data_.setZero(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

 private:
  Shape shape_;
  Array data_;
};

/// Trainable (or frozen) state owned by a layer.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  bool trainable = true;
  /// Buffers (running statistics) are saved but never receive gradients.
  bool buffer = false;

  Parameter() = default;
  Parameter(std::string n, Shape shape, bool is_buffer = false)
      : name(std::move(n)), value(shape), grad(shape), trainable(!is_buffer), buffer(is_buffer) {}
};

template <typename Scalar>
void kaiming_normal(Tensor<Scalar>& t, Index fan_in, std::mt19937_64& rng, double negative_slope = 0.0) {
  const double gain = std::sqrt(2.0 / (1.0 + negative_slope * negative_slope));
  std::normal_distribution<double> dist(0.0, gain / std::sqrt(static_cast<double>(fan_in)));
  for (Index i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<Scalar>(dist(rng));
}

/// Channel concatenation of two tensors with equal N and spatial extent.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  require(sa.n == sb.n && sa.d == sb.d && sa.h == sb.h && sa.w == sb.w, ErrorCode::kShapeMismatch,
          "concat: " + to_string(sa) + " vs " + to_string(sb));
  Tensor<Scalar> out(Shape{sa.n, sa.c + sb.c, sa.d, sa.h, sa.w});
  for (Index n = 0; n < sa.n; ++n) {
    auto o = out.sample(n);
    o.topRows(sa.c) = a.sample(n);
    o.bottomRows(sb.c) = b.sample(n);
  }
  return out;
}

/// Inverse of concat_channels for gradients: returns (first c_first channels, rest).
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> split_channels(const Tensor<Scalar>& t, Index c_first) {
  const Shape s = t.shape();
  Tensor<Scalar> a(Shape{s.n, c_first, s.d, s.h, s.w});
  Tensor<Scalar> b(Shape{s.n, s.c - c_first, s.d, s.h, s.w});
  for (Index n = 0; n < s.n; ++n) {
    a.sample(n) = t.sample(n).topRows(c_first);
    b.sample(n) = t.sample(n).bottomRows(s.c - c_first);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace petprior::nn

#endif  // PETPRIOR_NN_TENSOR_HPP
