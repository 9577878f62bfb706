#include "petprior/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

namespace petprior {
namespace {

constexpr double kTargetSpread = 0.05;
constexpr double kAcceptTolerance = 0.02;

bool inside(const Primitive& p, double dr, double dc) {
  const double c = std::cos(p.angle), s = std::sin(p.angle);
  const double u = c * dr + s * dc;
  const double v = -s * dr + c * dc;
  switch (p.kind) {
    case PrimitiveKind::kCircle: return dr * dr + dc * dc <= p.a * p.a;
    case PrimitiveKind::kSquare: return std::abs(u) <= p.a && std::abs(v) <= p.a;
    case PrimitiveKind::kEllipse: return (u * u) / (p.a * p.a) + (v * v) / (p.b * p.b) <= 1.0;
  }
  return false;
}

double extent(const Primitive& p) {
  switch (p.kind) {
    case PrimitiveKind::kCircle: return p.a;
    case PrimitiveKind::kSquare: return p.a * std::numbers::sqrt2;
    case PrimitiveKind::kEllipse: return std::max(p.a, p.b);
  }
  return 0.0;
}

void burn(BinaryImage& mask, const Primitive& p) {
  const double e = extent(p);
  const Index r0 = std::max<Index>(0, static_cast<Index>(std::floor(p.row - e)));
  const Index r1 = std::min<Index>(mask.rows() - 1, static_cast<Index>(std::ceil(p.row + e)));
  const Index c0 = std::max<Index>(0, static_cast<Index>(std::floor(p.col - e)));
  const Index c1 = std::min<Index>(mask.cols() - 1, static_cast<Index>(std::ceil(p.col + e)));
  for (Index c = c0; c <= c1; ++c) {
    for (Index r = r0; r <= r1; ++r) {
      if (inside(p, static_cast<double>(r) - p.row, static_cast<double>(c) - p.col)) mask(r, c) = 0;
    }
  }
}

Primitive draw_primitive(Index rows, Index cols, const MaskGenConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double area_fraction = config.primitive_size_range.first +
                               unit(rng) * (config.primitive_size_range.second - config.primitive_size_range.first);
  const double area = area_fraction * static_cast<double>(rows * cols);
  Primitive p;
  p.kind = static_cast<PrimitiveKind>(std::uniform_int_distribution<int>(0, 2)(rng));
  p.row = unit(rng) * static_cast<double>(rows);
  p.col = unit(rng) * static_cast<double>(cols);
  p.angle = unit(rng) * std::numbers::pi;
  switch (p.kind) {
    case PrimitiveKind::kCircle:
      p.a = p.b = std::sqrt(area / std::numbers::pi);
      break;
    case PrimitiveKind::kSquare:
      p.a = p.b = std::sqrt(area) / 2.0;
      break;
    case PrimitiveKind::kEllipse: {
      const double aspect = 1.0 + 2.0 * unit(rng);
      p.a = std::sqrt(area * aspect / std::numbers::pi);
      p.b = p.a / aspect;
      break;
    }
  }
  return p;
}

}  // namespace

void MaskGenConfig::validate() const {
  const auto [lo, hi] = target_fraction_range;
  require(0.0 < lo && lo < hi && hi < 1.0, ErrorCode::kInvalidArgument,
          "mask target fraction range must satisfy 0 < low < high < 1");
  require(primitive_count_range.first >= 0 && primitive_count_range.first <= primitive_count_range.second,
          ErrorCode::kInvalidArgument, "primitive count range must be non-negative and ordered");
  require(primitive_size_range.first > 0.0 && primitive_size_range.first <= primitive_size_range.second,
          ErrorCode::kInvalidArgument, "primitive size range must be positive and ordered");
  require(max_attempts > 0, ErrorCode::kInvalidArgument, "max_attempts must be positive");
}

BinaryImage rasterize_primitives(const std::vector<Primitive>& primitives, Index rows, Index cols) {
  BinaryImage mask = BinaryImage::Ones(rows, cols);
  for (const auto& p : primitives) burn(mask, p);
  return mask;
}

HoleMask random_irregular_mask(Index rows, Index cols, const MaskGenConfig& config,
                               std::mt19937_64& rng) {
  require(rows >= 32 && cols >= 32, ErrorCode::kInvalidArgument,
          "irregular masks need at least 32x32 pixels");
  config.validate();
  if (config.primitive_count_range.second == 0) return HoleMask::all_valid(rows, cols);

  const auto [lo, hi] = config.target_fraction_range;
  const double target = std::uniform_real_distribution<double>(
      std::max(0.0, lo - kTargetSpread), std::min(1.0, hi + kTargetSpread))(rng);
  std::uniform_int_distribution<int> count_dist(config.primitive_count_range.first,
                                                config.primitive_count_range.second);
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    HoleMask m;
    const int n = count_dist(rng);
    for (int i = 0; i < n; ++i) m.primitives.push_back(draw_primitive(rows, cols, config, rng));
    m.mask = rasterize_primitives(m.primitives, rows, cols);
    if (std::abs(m.corruption_fraction() - target) <= kAcceptTolerance) return m;
  }
  fail(ErrorCode::kUnreachable,
       "mask corruption target " + std::to_string(target) + " unreachable with configured primitives after " +
           std::to_string(config.max_attempts) + " attempts");
}

std::pair<double, double> Region::centroid() const {
  double r = 0.0, c = 0.0;
  for (const auto& [pr, pc] : pixels) {
    r += static_cast<double>(pr);
    c += static_cast<double>(pc);
  }
  const auto n = static_cast<double>(std::max<std::size_t>(1, pixels.size()));
  return {r / n, c / n};
}

CandidateRegions threshold_components(const Image& plane, double threshold_suv) {
  require(threshold_suv > 0.0, ErrorCode::kInvalidArgument, "PET threshold must be positive");
  CandidateRegions out;
  out.threshold_suv = threshold_suv;
  const auto thr = static_cast<float>(threshold_suv);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(plane.rows(), plane.cols(), false);
  std::deque<std::pair<Index, Index>> queue;
  for (Index c = 0; c < plane.cols(); ++c) {
    for (Index r = 0; r < plane.rows(); ++r) {
      if (seen(r, c) || !(plane(r, c) >= thr)) continue;
      Region region;
      seen(r, c) = true;
      queue.emplace_back(r, c);
      while (!queue.empty()) {
        const auto [qr, qc] = queue.front();
        queue.pop_front();
        region.pixels.emplace_back(qr, qc);
        for (Index dc = -1; dc <= 1; ++dc) {
          for (Index dr = -1; dr <= 1; ++dr) {
            const Index nr = qr + dr, nc = qc + dc;
            if (nr < 0 || nc < 0 || nr >= plane.rows() || nc >= plane.cols()) continue;
            if (seen(nr, nc) || !(plane(nr, nc) >= thr)) continue;
            seen(nr, nc) = true;
            queue.emplace_back(nr, nc);
          }
        }
      }
      out.regions.push_back(std::move(region));
    }
  }
  return out;
}

std::vector<CandidateRegions> pet_candidate_regions(const Volume3D& pet_suv, double threshold_suv) {
  require(pet_suv.modality() == Modality::kPetSuv, ErrorCode::kInvalidArgument,
          "candidate regions need PET in SUV units");
  require(threshold_suv > 0.0, ErrorCode::kInvalidArgument, "PET threshold must be positive");
  std::vector<CandidateRegions> out;
  out.reserve(static_cast<std::size_t>(pet_suv.grid().nz));
  for (Index z = 0; z < pet_suv.grid().nz; ++z) {
    out.push_back(threshold_components(pet_suv.plane(z), threshold_suv));
  }
  return out;
}

HoleMask candidate_hole_mask(const CandidateRegions& regions, Index rows, Index cols, double radius_px) {
  require(radius_px >= 0.0, ErrorCode::kInvalidArgument, "hole radius must be non-negative");
  HoleMask m = HoleMask::all_valid(rows, cols);
  for (const auto& region : regions.regions) {
    const auto [cr, cc] = region.centroid();
    const auto row = static_cast<double>(std::lround(cr));
    const auto col = static_cast<double>(std::lround(cc));
    require(row >= 0 && col >= 0 && row < static_cast<double>(rows) && col < static_cast<double>(cols),
            ErrorCode::kInvalidArgument, "candidate centroid outside the image");
    Primitive disk{PrimitiveKind::kCircle, row, col, radius_px, radius_px, 0.0};
    burn(m.mask, disk);
    m.primitives.push_back(disk);
  }
  return m;
}

}  // namespace petprior
