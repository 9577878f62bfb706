#include <cmath>

#include "petprior/segment/loss.hpp"
#include "petprior/segment/segmenter.hpp"

namespace petprior::segment {
namespace {

// Window origins covering [0, n) with step at most half a patch.
std::vector<Index> window_starts(Index n, Index p) {
  if (n <= p) return {0};
  const Index steps = static_cast<Index>(std::ceil(static_cast<double>(n - p) / (0.5 * p))) + 1;
  std::vector<Index> out;
  for (Index i = 0; i < steps; ++i) {
    out.push_back(static_cast<Index>(std::lround(static_cast<double>(i) * (n - p) / static_cast<double>(steps - 1))));
  }
  return out;
}

// Separable Gaussian importance map, sigma = patch / 8 per axis, peak 1.
Eigen::ArrayXf gaussian_map(const PatchSize& p) {
  auto axis = [](Index n) {
    Eigen::ArrayXd w(n);
    const double c = (n - 1) / 2.0, sigma = n / 8.0;
    for (Index i = 0; i < n; ++i) w[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
    return w;
  };
  const Eigen::ArrayXd wx = axis(p.x), wy = axis(p.y), wz = axis(p.z);
  Eigen::ArrayXf out(p.x * p.y * p.z);
  for (Index z = 0; z < p.z; ++z)
    for (Index y = 0; y < p.y; ++y)
      for (Index x = 0; x < p.x; ++x) out[(z * p.y + y) * p.x + x] = static_cast<float>(wz[z] * wy[y] * wx[x]);
  out /= out.maxCoeff();
  const float floor = (out > 0.0f).select(out, 1.0f).minCoeff();
  return out.max(floor);
}

Volume3D probability_unchecked(SegModel& model, const SegInput& input) {
  input.validate();
  const GridSize g = input.grid();
  const PatchSize p = model.patch();
  const Index D = std::max(g.nz, p.z), H = std::max(g.ny, p.y), W = std::max(g.nx, p.x);
  const Tensor<float> full = input.to_tensor();
  Tensor<float> padded(Shape{1, 4, D, H, W});
  for (Index c = 0; c < 4; ++c)
    for (Index z = 0; z < g.nz; ++z)
      for (Index y = 0; y < g.ny; ++y)
        std::copy_n(full.data().data() + full.offset(0, c, z, y, 0), g.nx,
                    padded.data().data() + padded.offset(0, c, z, y, 0));

  const Eigen::ArrayXf weight = gaussian_map(p);
  Eigen::ArrayXf acc = Eigen::ArrayXf::Zero(D * H * W), norm = Eigen::ArrayXf::Zero(D * H * W);
  Tensor<float> window(Shape{1, 4, p.z, p.y, p.x});
  for (Index z0 : window_starts(D, p.z)) {
    for (Index y0 : window_starts(H, p.y)) {
      for (Index x0 : window_starts(W, p.x)) {
        for (Index c = 0; c < 4; ++c)
          for (Index z = 0; z < p.z; ++z)
            for (Index y = 0; y < p.y; ++y)
              std::copy_n(padded.data().data() + padded.offset(0, c, z0 + z, y0 + y, x0), p.x,
                          window.data().data() + window.offset(0, c, z, y, 0));
        const auto logits = model.network().forward(window);
        const Eigen::ArrayXf prob = sigmoid<float>(logits.data());
        for (Index z = 0; z < p.z; ++z)
          for (Index y = 0; y < p.y; ++y)
            for (Index x = 0; x < p.x; ++x) {
              const Index src = (z * p.y + y) * p.x + x;
              const Index dst = ((z0 + z) * H + y0 + y) * W + x0 + x;
              acc[dst] += weight[src] * prob[src];
              norm[dst] += weight[src];
            }
      }
    }
  }
  Eigen::ArrayXf out(g.count());
  for (Index z = 0; z < g.nz; ++z)
    for (Index y = 0; y < g.ny; ++y)
      for (Index x = 0; x < g.nx; ++x) {
        const Index i = (z * H + y) * W + x;
        out[(z * g.ny + y) * g.nx + x] = acc[i] / norm[i];
      }
  return input.channels[0].with_data<float>(std::move(out), Modality::kNormalized);
}

}  // namespace

Volume3D predict_probability(SegModel& model, const SegInput& input) {
  require(model.trained(), ErrorCode::kUntrained, "segmenter network is untrained");
  return probability_unchecked(model, input);
}

namespace detail {
Volume3D predict_mask_unchecked(SegModel& model, const SegInput& input, double threshold) {
  const Volume3D prob = probability_unchecked(model, input);
  const float t = static_cast<float>(threshold);
  Eigen::ArrayXf mask = (prob.data() > t).cast<float>();
  return prob.with_data<float>(std::move(mask), Modality::kLabel);
}
}  // namespace detail

Volume3D predict_mask(SegModel& model, const SegInput& input, double threshold) {
  require(model.trained(), ErrorCode::kUntrained, "segmenter network is untrained");
  return detail::predict_mask_unchecked(model, input, threshold);
}

}  // namespace petprior::segment
