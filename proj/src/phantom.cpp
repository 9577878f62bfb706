#include "petprior/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <cstdio>
#include <fstream>
#include <vector>

#include "petprior/hash.hpp"
#include "petprior/manifest.hpp"
#include "petprior/nifti.hpp"

namespace petprior {
namespace {

constexpr double kAirHu = -1000.0;
constexpr double kBodyHu = 20.0;
constexpr double kBoneHu = 760.0;
constexpr double kLesionHu = 45.0;
constexpr double kCtNoiseHu = 8.0;
constexpr double kPetNoise = 0.04;   // relative
constexpr double kPetNoiseClamp = 0.15;
constexpr int kPlacementAttempts = 500;

struct Ellipsoid {
  Eigen::Vector3d center;
  Eigen::Vector3d radii;

  double level(double x, double y, double z) const {
    const Eigen::Vector3d d = (Eigen::Vector3d(x, y, z) - center).cwiseQuotient(radii);
    return d.squaredNorm();
  }
  bool contains(double x, double y, double z) const { return level(x, y, z) <= 1.0; }
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
  const GridSize g = spec.grid_size;
  require(g.nx >= 16 && g.ny >= 16 && g.nz >= 16, ErrorCode::kInvalidArgument,
          "phantom grid must be at least 16 voxels per axis, got " + to_string(g));
  require(spec.n_lesions >= 0 && spec.n_organs >= 0, ErrorCode::kInvalidArgument,
          "phantom organ and lesion counts must be non-negative");
  require(spec.lesion_suv_range.first <= spec.lesion_suv_range.second, ErrorCode::kInvalidArgument,
          "lesion SUV range must be ordered");
  require(spec.lesion_suv_range.first > kHotOrganSuv * (1.0 + kPetNoiseClamp),
          ErrorCode::kInvalidArgument,
          "lesion SUV minimum must exceed the brightest background SUV " +
              std::to_string(kHotOrganSuv * (1.0 + kPetNoiseClamp)));
  require(spec.lesion_radius_range.first > 0.0 &&
              spec.lesion_radius_range.first <= spec.lesion_radius_range.second,
          ErrorCode::kInvalidArgument, "lesion radius range must be positive and ordered");

  std::mt19937_64 rng(spec.seed);
  const Eigen::Vector3d center((g.nx - 1) / 2.0, (g.ny - 1) / 2.0, (g.nz - 1) / 2.0);
  const Ellipsoid body{center, Eigen::Vector3d(0.44 * g.nx, 0.38 * g.ny, 0.55 * g.nz)};
  const Ellipsoid bone_inner{center, body.radii.cwiseProduct(Eigen::Vector3d(0.9, 0.9, 10.0))};
  const Ellipsoid interior{center, body.radii * 0.82};

  std::vector<Ellipsoid> organs;
  std::vector<double> organ_suv, organ_hu;
  for (int i = 0; i < spec.n_organs; ++i) {
    const Eigen::Vector3d radii(uniform(rng, 0.08, 0.14) * g.nx, uniform(rng, 0.08, 0.14) * g.ny,
                                uniform(rng, 0.08, 0.16) * g.nz);
    Eigen::Vector3d c;
    for (int k = 0; k < 3; ++k) c[k] = center[k] + uniform(rng, -0.5, 0.5) * interior.radii[k];
    organs.push_back({c, radii});
    organ_suv.push_back(i == 0 ? kHotOrganSuv : uniform(rng, 1.2, kOrganSuvMax));
    organ_hu.push_back(uniform(rng, 30.0, 90.0));
  }

  const double max_radius = spec.lesion_radius_range.second;
  require(2.0 * max_radius + 2.0 < static_cast<double>(std::min({g.nx, g.ny, g.nz})),
          ErrorCode::kUnreachable, "lesion ellipsoids cannot fit inside grid " + to_string(g));

  std::vector<Ellipsoid> lesions;
  std::vector<double> lesion_suv;
  for (int i = 0; i < spec.n_lesions; ++i) {
    const Eigen::Vector3d radii(uniform(rng, spec.lesion_radius_range.first, max_radius),
                                uniform(rng, spec.lesion_radius_range.first, max_radius),
                                uniform(rng, spec.lesion_radius_range.first, max_radius));
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      Eigen::Vector3d c;
      for (int k = 0; k < 3; ++k) c[k] = center[k] + uniform(rng, -1.0, 1.0) * interior.radii[k];
      // Bounding box inside the grid and all box corners inside the interior.
      bool ok = true;
      for (int k = 0; k < 3 && ok; ++k) {
        const double dim = static_cast<double>(k == 0 ? g.nx : (k == 1 ? g.ny : g.nz));
        ok = c[k] - radii[k] >= 0.0 && c[k] + radii[k] <= dim - 1.0;
      }
      for (int corner = 0; corner < 8 && ok; ++corner) {
        const Eigen::Vector3d p(c[0] + ((corner & 1) ? radii[0] : -radii[0]),
                                c[1] + ((corner & 2) ? radii[1] : -radii[1]),
                                c[2] + ((corner & 4) ? radii[2] : -radii[2]));
        ok = interior.contains(p[0], p[1], p[2]);
      }
      if (ok && !organs.empty()) {
        const Ellipsoid& hot = organs.front();
        const Eigen::Vector3d gap = (c - hot.center).cwiseAbs() - radii - hot.radii;
        ok = (gap.array() > 1.0).any();
      }
      if (ok) {
        lesions.push_back({c, radii});
        lesion_suv.push_back(uniform(rng, spec.lesion_suv_range.first, spec.lesion_suv_range.second));
        placed = true;
      }
    }
    require(placed, ErrorCode::kUnreachable,
            "could not place lesion " + std::to_string(i) + " inside the phantom body");
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::ArrayXf ct(g.count()), pet(g.count()), label(g.count());
  for (Index z = 0; z < g.nz; ++z) {
    for (Index y = 0; y < g.ny; ++y) {
      for (Index x = 0; x < g.nx; ++x) {
        const Index i = x + g.nx * (y + g.ny * z);
        const double fx = static_cast<double>(x), fy = static_cast<double>(y), fz = static_cast<double>(z);
        const double ct_noise = kCtNoiseHu * noise(rng);
        const double pet_noise = std::clamp(kPetNoise * noise(rng), -kPetNoiseClamp, kPetNoiseClamp);
        double hu = kAirHu;
        double suv = 0.0;
        double lab = 0.0;
        if (body.contains(fx, fy, fz)) {
          hu = kBodyHu;
          suv = kBodySuv;
          if (!bone_inner.contains(fx, fy, fz)) {
            hu = kBoneHu;
            suv = 0.8;
          }
          for (std::size_t k = 0; k < organs.size(); ++k) {
            if (organs[k].contains(fx, fy, fz)) {
              hu = organ_hu[k];
              suv = organ_suv[k];
            }
          }
          for (std::size_t k = 0; k < lesions.size(); ++k) {
            if (lesions[k].contains(fx, fy, fz)) {
              hu = kLesionHu;
              suv = lesion_suv[k];
              lab = 1.0;
            }
          }
          hu += ct_noise;
          suv *= 1.0 + pet_noise;
          if (lab > 0.0) suv = std::max(suv, spec.lesion_suv_range.first);
        }
        ct[i] = static_cast<float>(std::clamp(hu, -1000.0, 800.0));
        pet[i] = static_cast<float>(suv);
        label[i] = static_cast<float>(lab);
      }
    }
  }

  const Origin origin = Origin::Zero();
  return Phantom{Volume3D(g, spec.spacing, origin, Modality::kCtHu, std::move(ct)),
                 Volume3D(g, spec.spacing, origin, Modality::kPetSuv, std::move(pet)),
                 Volume3D(g, spec.spacing, origin, Modality::kLabel, std::move(label))};
}

std::vector<std::string> write_phantom_dataset(const std::filesystem::path& dir, int n_cases, std::uint64_t seed,
                                               const PhantomSpec& base) {
  require(n_cases >= 1, ErrorCode::kInvalidArgument, "phantom dataset needs at least one case");
  std::filesystem::create_directories(dir);
  std::vector<std::string> ids;
  std::ofstream classes(dir / "classes.csv");
  require(classes.good(), ErrorCode::kIo, "cannot write " + (dir / "classes.csv").string());
  classes << "case_id,tumor_class\n";
  for (int i = 0; i < n_cases; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "case_%03d", i);
    const TumorClass cls = kAllTumorClasses[i % 4];
    PhantomSpec spec = base;
    spec.seed = derive_seed(seed, std::string("phantom/") + id);
    if (cls == TumorClass::kNegative) spec.n_lesions = 0;
    const Phantom p = generate_phantom(spec);
    save_volume(p.ct, dir / (std::string(id) + "_ct.nii.gz"));
    save_volume(p.pet, dir / (std::string(id) + "_pet.nii.gz"));
    save_volume(p.label, dir / (std::string(id) + "_label.nii.gz"));
    classes << id << ',' << to_string(cls) << '\n';
    ids.emplace_back(id);
  }
  return ids;
}

}  // namespace petprior
