#include <cmath>

#include "petprior/inpaint/model.hpp"

namespace petprior::inpaint {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

using ImageD = Eigen::ArrayXXd;

Eigen::ArrayXd gaussian_kernel() {
  Eigen::ArrayXd k(kWindow);
  const int half = kWindow / 2;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - half;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
  }
  return k / k.sum();
}

// Separable filtering keeping only windows that fit entirely inside.
ImageD filter_valid(const ImageD& img, const Eigen::ArrayXd& k) {
  const Index r = img.rows() - kWindow + 1, c = img.cols() - kWindow + 1;
  ImageD tmp = ImageD::Zero(r, img.cols());
  for (int i = 0; i < kWindow; ++i) tmp += k[i] * img.middleRows(i, r);
  ImageD out = ImageD::Zero(r, c);
  for (int i = 0; i < kWindow; ++i) out += k[i] * tmp.middleCols(i, c);
  return out;
}

void check_pair(const Image& a, const Image& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kShapeMismatch,
          "quality metrics: images differ in shape");
  require(a.rows() >= kWindow && a.cols() >= kWindow, ErrorCode::kShapeMismatch,
          "quality metrics: images must be at least 11x11");
}

double ssim(const Image& a32, const Image& b32) {
  const ImageD a = a32.cast<double>(), b = b32.cast<double>();
  const auto k = gaussian_kernel();
  const ImageD mu_a = filter_valid(a, k), mu_b = filter_valid(b, k);
  const ImageD var_a = filter_valid(a * a, k) - mu_a.square();
  const ImageD var_b = filter_valid(b * b, k) - mu_b.square();
  const ImageD cov = filter_valid(a * b, k) - mu_a * mu_b;
  const ImageD num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
  const ImageD den = (mu_a.square() + mu_b.square() + kC1) * (var_a + var_b + kC2);
  return (num / den).mean();
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

}  // namespace

InpaintQualityReport quality_metrics(const Image& a, const Image& b) {
  check_pair(a, b);
  InpaintQualityReport r;
  r.mse = (a.cast<double>() - b.cast<double>()).square().mean();
  r.psnr = psnr_from_mse(r.mse);
  r.ssim = ssim(a, b);
  return r;
}

InpaintQualityReport quality_metrics(const RGBSlice& a, const RGBSlice& b) {
  InpaintQualityReport r;
  for (int c = 0; c < 3; ++c) {
    check_pair(a.channels[c], b.channels[c]);
    r.mse += (a.channels[c].cast<double>() - b.channels[c].cast<double>()).square().mean() / 3.0;
    r.ssim += ssim(a.channels[c], b.channels[c]) / 3.0;
  }
  r.psnr = psnr_from_mse(r.mse);
  return r;
}

}  // namespace petprior::inpaint
