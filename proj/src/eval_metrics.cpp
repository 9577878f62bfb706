#include <deque>

#include "petprior/eval/metrics.hpp"

namespace petprior::eval {
namespace {

void check_pair(const Volume3D& pred, const Volume3D& gt) {
  require_same_grid(pred, gt, "metric");
  for (const Volume3D* v : {&pred, &gt}) {
    require(((v->data() == 0.0f) || (v->data() == 1.0f)).all(), ErrorCode::kInvalidArgument,
            "metrics need binary masks");
  }
}

// Volume of components of `a` with no voxel in `b`.
double missed_component_volume(const Volume3D& a, const Volume3D& b) {
  int count = 0;
  const auto labels = label_components(a, &count);
  std::vector<char> touches(static_cast<std::size_t>(count) + 1, 0);
  std::vector<Index> sizes(static_cast<std::size_t>(count) + 1, 0);
  for (Index i = 0; i < a.data().size(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l == 0) continue;
    ++sizes[static_cast<std::size_t>(l)];
    if (b.data()[i] != 0.0f) touches[static_cast<std::size_t>(l)] = 1;
  }
  Index voxels = 0;
  for (int l = 1; l <= count; ++l) {
    if (!touches[static_cast<std::size_t>(l)]) voxels += sizes[static_cast<std::size_t>(l)];
  }
  return static_cast<double>(voxels) * a.voxel_volume_mm3() * 1e-6;
}

double voxel_difference_volume(const Volume3D& a, const Volume3D& b) {
  const Index n = ((a.data() != 0.0f) && (b.data() == 0.0f)).count();
  return static_cast<double>(n) * a.voxel_volume_mm3() * 1e-6;
}

}  // namespace

std::string_view to_string(VolumeMode mode) {
  return mode == VolumeMode::kComponent ? "component" : "voxelwise";
}

VolumeMode volume_mode_from_string(std::string_view name) {
  if (name == "component") return VolumeMode::kComponent;
  if (name == "voxelwise") return VolumeMode::kVoxelwise;
  fail(ErrorCode::kInvalidArgument, "unknown volume mode '" + std::string(name) + "' (component|voxelwise)");
}

std::vector<int> label_components(const Volume3D& mask, int* count) {
  const GridSize g = mask.grid();
  std::vector<int> labels(static_cast<std::size_t>(g.count()), 0);
  int next = 0;
  std::deque<Index> queue;
  for (Index start = 0; start < g.count(); ++start) {
    if (mask.data()[start] == 0.0f || labels[static_cast<std::size_t>(start)] != 0) continue;
    labels[static_cast<std::size_t>(start)] = ++next;
    queue.push_back(start);
    while (!queue.empty()) {
      const Index v = queue.front();
      queue.pop_front();
      const Index x = v % g.nx, y = (v / g.nx) % g.ny, z = v / g.plane_count();
      for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
            if (manhattan == 0 || manhattan > 2) continue;
            const Index xx = x + dx, yy = y + dy, zz = z + dz;
            if (xx < 0 || yy < 0 || zz < 0 || xx >= g.nx || yy >= g.ny || zz >= g.nz) continue;
            const Index u = mask.index(xx, yy, zz);
            if (mask.data()[u] == 0.0f || labels[static_cast<std::size_t>(u)] != 0) continue;
            labels[static_cast<std::size_t>(u)] = next;
            queue.push_back(u);
          }
        }
      }
    }
  }
  if (count) *count = next;
  return labels;
}

std::optional<double> dice_score(const Volume3D& pred, const Volume3D& gt) {
  check_pair(pred, gt);
  const double p = pred.data().sum(), g = gt.data().sum();
  if (p + g == 0.0) return std::nullopt;
  const double inter = (pred.data() * gt.data()).sum();
  return 2.0 * inter / (p + g);
}

double fp_volume_liters(const Volume3D& pred, const Volume3D& gt, VolumeMode mode) {
  check_pair(pred, gt);
  return mode == VolumeMode::kComponent ? missed_component_volume(pred, gt) : voxel_difference_volume(pred, gt);
}

double fn_volume_liters(const Volume3D& pred, const Volume3D& gt, VolumeMode mode) {
  return fp_volume_liters(gt, pred, mode);
}

EvalRecord evaluate_case(const std::string& case_id, TumorClass tumor_class, int fold, const Volume3D& pred,
                         const Volume3D& gt, VolumeMode mode) {
  EvalRecord r;
  r.case_id = case_id;
  r.tumor_class = tumor_class;
  r.fold = fold;
  r.fpv_liters = fp_volume_liters(pred, gt, mode);
  if (tumor_class != TumorClass::kNegative) {
    r.dice = dice_score(pred, gt);
    r.fnv_liters = fn_volume_liters(pred, gt, mode);
  }
  return r;
}

}  // namespace petprior::eval
