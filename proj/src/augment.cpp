#include "petprior/segment/augment.hpp"

#include <cmath>
#include <numbers>

namespace petprior::segment {
namespace {

Eigen::ArrayXf gaussian_smooth_1d_kernel(double sigma) {
  const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  Eigen::ArrayXf k(2 * half + 1);
  for (int i = -half; i <= half; ++i) k[i + half] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
  return k / k.sum();
}

// Separable Gaussian on a D x H x W field, edges clamped.
Eigen::ArrayXf smooth3d(const Eigen::ArrayXf& f, Index d, Index h, Index w, double sigma) {
  const Eigen::ArrayXf k = gaussian_smooth_1d_kernel(sigma);
  const Index half = (k.size() - 1) / 2;
  Eigen::ArrayXf a = f, b(f.size());
  const Index dims[3] = {w, h, d};
  const Index strides[3] = {1, w, w * h};
  for (int axis = 0; axis < 3; ++axis) {
    const Index n = dims[axis], st = strides[axis];
    for (Index i = 0; i < f.size(); ++i) {
      const Index pos = (i / st) % n;
      float acc = 0.0f;
      for (Index t = -half; t <= half; ++t) {
        const Index q = std::clamp<Index>(pos + t, 0, n - 1);
        acc += k[t + half] * a[i + (q - pos) * st];
      }
      b[i] = acc;
    }
    std::swap(a, b);
  }
  return a;
}

template <typename Sampler>
Tensor<float> resample(const SpatialTransform& t, const Tensor<float>& x, Sampler sample) {
  const Shape s = x.shape();
  Tensor<float> y(s);
  const Eigen::Vector3d center((s.w - 1) / 2.0, (s.h - 1) / 2.0, (s.d - 1) / 2.0);
  const bool has_disp = t.displacement.size() > 0;
  for (Index z = 0; z < s.d; ++z) {
    for (Index yy = 0; yy < s.h; ++yy) {
      for (Index xx = 0; xx < s.w; ++xx) {
        const Index v = (z * s.h + yy) * s.w + xx;
        Eigen::Vector3d src = t.matrix * (Eigen::Vector3d(xx, yy, z) - center) + center;
        if (has_disp) src += t.displacement.col(v).cast<double>().matrix();
        for (Index n = 0; n < s.n; ++n) {
          for (Index c = 0; c < s.c; ++c) {
            const float* plane = x.data().data() + x.offset(n, c, 0, 0, 0);
            y.data()[y.offset(n, c, 0, 0, 0) + v] = sample(plane, s, src);
          }
        }
      }
    }
  }
  return y;
}

float trilinear(const float* vol, const Shape& s, const Eigen::Vector3d& p) {
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const Index x0 = static_cast<Index>(fx), y0 = static_cast<Index>(fy), z0 = static_cast<Index>(fz);
  const double tx = p.x() - fx, ty = p.y() - fy, tz = p.z() - fz;
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const double wgt = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
        if (wgt == 0.0) continue;
        const Index x = x0 + dx, y = y0 + dy, z = z0 + dz;
        if (x < 0 || y < 0 || z < 0 || x >= s.w || y >= s.h || z >= s.d) continue;
        acc += wgt * vol[(z * s.h + y) * s.w + x];
      }
    }
  }
  return static_cast<float>(acc);
}

float nearest(const float* vol, const Shape& s, const Eigen::Vector3d& p) {
  const Index x = static_cast<Index>(std::lround(p.x())), y = static_cast<Index>(std::lround(p.y())),
              z = static_cast<Index>(std::lround(p.z()));
  if (x < 0 || y < 0 || z < 0 || x >= s.w || y >= s.h || z >= s.d) return 0.0f;
  return vol[(z * s.h + y) * s.w + x];
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool fires(std::mt19937_64& rng, double p) { return p > 0.0 && uniform(rng, 0.0, 1.0) < p; }

}  // namespace

AugmentationConfig AugmentationConfig::none() {
  AugmentationConfig c;
  c.p_rotation = c.p_scale = c.p_elastic = c.p_gamma = 0.0;
  return c;
}

void AugmentationConfig::validate() const {
  for (double p : {p_rotation, p_scale, p_elastic, p_gamma}) {
    require(p >= 0.0 && p <= 1.0, ErrorCode::kInvalidArgument, "augmentation probabilities must be in [0, 1]");
  }
  require(rotation_range_deg >= 0.0, ErrorCode::kInvalidArgument, "rotation range must be >= 0");
  require(scale_range.first > 0.0 && scale_range.first <= scale_range.second, ErrorCode::kInvalidArgument,
          "scale range must be positive and ordered");
  require(elastic_alpha_range.first >= 0.0 && elastic_alpha_range.first <= elastic_alpha_range.second,
          ErrorCode::kInvalidArgument, "elastic alpha range must be non-negative and ordered");
  require(elastic_sigma_range.first > 0.0 && elastic_sigma_range.first <= elastic_sigma_range.second,
          ErrorCode::kInvalidArgument, "elastic sigma range must be positive and ordered");
  require(gamma_range.first > 0.0 && gamma_range.first <= gamma_range.second, ErrorCode::kInvalidArgument,
          "gamma range must be positive and ordered");
  require(gamma_channels >= 0, ErrorCode::kInvalidArgument, "gamma_channels must be >= 0");
}

SpatialTransform SpatialTransform::rotation(int axis, double radians) {
  SpatialTransform t;
  const Eigen::Vector3d axes[3] = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ()};
  t.matrix = Eigen::AngleAxisd(radians, axes[axis]).toRotationMatrix();
  return t;
}

bool SpatialTransform::is_identity() const {
  return matrix == Eigen::Matrix3d::Identity() && displacement.size() == 0;
}

Tensor<float> SpatialTransform::apply_linear(const Tensor<float>& x) const {
  if (is_identity()) return x;
  return resample(*this, x, trilinear);
}

Tensor<float> SpatialTransform::apply_nearest(const Tensor<float>& x) const {
  if (is_identity()) return x;
  return resample(*this, x, nearest);
}

SpatialTransform sample_spatial_transform(const Shape& shape, const AugmentationConfig& config, std::mt19937_64& rng) {
  config.validate();
  SpatialTransform t;
  if (fires(rng, config.p_rotation)) {
    const double r = config.rotation_range_deg * std::numbers::pi / 180.0;
    for (int axis = 0; axis < 3; ++axis) {
      // Axial-only volumes (D == 1) rotate in-plane only.
      if (shape.d == 1 && axis != 2) continue;
      t.matrix = SpatialTransform::rotation(axis, uniform(rng, -r, r)).matrix * t.matrix;
    }
  }
  if (fires(rng, config.p_scale)) {
    t.matrix /= uniform(rng, config.scale_range.first, config.scale_range.second);
  }
  if (fires(rng, config.p_elastic)) {
    const double alpha = uniform(rng, config.elastic_alpha_range.first, config.elastic_alpha_range.second);
    const double sigma = uniform(rng, config.elastic_sigma_range.first, config.elastic_sigma_range.second);
    const Index nvox = shape.spatial();
    t.displacement.resize(3, nvox);
    std::uniform_real_distribution<float> noise(-1.0f, 1.0f);
    for (int a = 0; a < 3; ++a) {
      Eigen::ArrayXf f(nvox);
      for (Index i = 0; i < nvox; ++i) f[i] = noise(rng);
      f = smooth3d(f, shape.d, shape.h, shape.w, sigma);
      const float peak = f.abs().maxCoeff();
      if (peak > 0.0f) f *= static_cast<float>(alpha) / peak;
      t.displacement.row(a) = f.transpose();
    }
  }
  return t;
}

void apply_gamma(Tensor<float>& x, Index channels, double gamma) {
  const Shape s = x.shape();
  for (Index n = 0; n < s.n; ++n) {
    for (Index c = 0; c < std::min(channels, s.c); ++c) {
      auto v = x.data().segment(x.offset(n, c, 0, 0, 0), s.spatial());
      const float lo = v.minCoeff(), hi = v.maxCoeff();
      if (hi <= lo) continue;
      const float range = hi - lo;
      v = ((v - lo) / range).pow(static_cast<float>(gamma)) * range + lo;
    }
  }
}

std::pair<Tensor<float>, Tensor<float>> augment(const Tensor<float>& patch, const Tensor<float>& label,
                                                const AugmentationConfig& config, std::mt19937_64& rng) {
  const Shape s = patch.shape();
  const Shape ls = label.shape();
  require(ls.n == s.n && ls.d == s.d && ls.h == s.h && ls.w == s.w, ErrorCode::kShapeMismatch,
          "augment: label " + nn::to_string(ls) + " does not match patch " + nn::to_string(s));
  const SpatialTransform t = sample_spatial_transform(s, config, rng);
  Tensor<float> out = t.apply_linear(patch);
  Tensor<float> lab = t.apply_nearest(label);
  if (fires(rng, config.p_gamma)) {
    apply_gamma(out, config.gamma_channels, uniform(rng, config.gamma_range.first, config.gamma_range.second));
  }
  return {std::move(out), std::move(lab)};
}

}  // namespace petprior::segment
