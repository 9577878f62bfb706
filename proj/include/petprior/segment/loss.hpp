#ifndef PETPRIOR_SEGMENT_LOSS_HPP
#define PETPRIOR_SEGMENT_LOSS_HPP

#include <cmath>

#include "petprior/nn/tensor.hpp"

namespace petprior::segment {

template <typename Scalar>
struct DiceCeLoss {
  Scalar total{};
  Scalar dice{};
  Scalar ce{};
  nn::Tensor<Scalar> grad;  // dL/dlogits
};

template <typename Scalar>
typename nn::Tensor<Scalar>::Array sigmoid(const typename nn::Tensor<Scalar>::Array& z) {
  return z.unaryExpr([](Scalar v) {
    if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (Scalar(1) + e);
  });
}

/// Soft Dice over the whole tensor plus mean binary cross-entropy on logits,
/// equally weighted.
template <typename Scalar>
DiceCeLoss<Scalar> dice_ce_loss(const nn::Tensor<Scalar>& logits, const nn::Tensor<Scalar>& target,
                                Scalar smooth = Scalar(1e-5)) {
  require(logits.shape() == target.shape(), ErrorCode::kShapeMismatch,
          "dice_ce_loss: logits " + nn::to_string(logits.shape()) + " vs target " + nn::to_string(target.shape()));
  const auto& z = logits.data();
  const auto& g = target.data();
  require(((g == Scalar(0)) || (g == Scalar(1))).all(), ErrorCode::kInvalidArgument,
          "dice_ce_loss: target must be binary");
  using Array = typename nn::Tensor<Scalar>::Array;
  const Array p = sigmoid<Scalar>(z);
  const Scalar n = static_cast<Scalar>(z.size());
  const Scalar inter = (p * g).sum();
  const Scalar denom = p.sum() + g.sum() + smooth;
  const Scalar numer = Scalar(2) * inter + smooth;

  DiceCeLoss<Scalar> r;
  r.dice = Scalar(1) - numer / denom;
  const Array ce = z.cwiseMax(Scalar(0)) - z * g + (-z.abs()).exp().log1p();
  r.ce = ce.sum() / n;
  r.total = r.dice + r.ce;

  const Array ddice_dp = -(Scalar(2) * g * denom - numer) / (denom * denom);
  r.grad = nn::Tensor<Scalar>(logits.shape(), ddice_dp * p * (Scalar(1) - p) + (p - g) / n);
  return r;
}

}  // namespace petprior::segment

#endif  // PETPRIOR_SEGMENT_LOSS_HPP
