#ifndef PETPRIOR_PHANTOM_HPP
#define PETPRIOR_PHANTOM_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>
#include <utility>

#include "petprior/volume.hpp"

namespace petprior {

/// Synthetic PET-CT case: an ellipsoidal body with soft-tissue pseudo-organs,
/// a bone shell, and hyperintense ellipsoidal lesions.
struct PhantomSpec {
  GridSize grid_size{48, 48, 48};
  Spacing spacing{2.0, 2.0, 3.0};
  int n_organs = 3;
  int n_lesions = 2;
  std::pair<double, double> lesion_suv_range{5.0, 10.0};
  /// Lesion semi-axis range in voxels.
  std::pair<double, double> lesion_radius_range{2.5, 5.0};
  std::uint64_t seed = 0;
};

struct Phantom {
  Volume3D ct;
  Volume3D pet;
  Volume3D label;
};

/// Background SUV levels. The first organ is a physiologically hot organ
/// (bladder-like) that exceeds the conventional 2.5 SUV cutoff while staying
/// below every lesion.
inline constexpr double kBodySuv = 1.0;
inline constexpr double kOrganSuvMax = 2.0;
inline constexpr double kHotOrganSuv = 3.2;

/// Deterministic for a fixed spec. Lesions are placed inside the body;
/// if one cannot be placed within a bounded number of attempts an
/// ErrorCode::kUnreachable error is raised.
Phantom generate_phantom(const PhantomSpec& spec);

/// Writes `case_NNN_{ct,pet,label}.nii.gz` and `classes.csv` into `dir`.
/// Classes cycle NEGATIVE, LUNG_CANCER, LYMPHOMA, MELANOMA; negative cases
/// carry no lesions. Case i uses seed derive_seed(seed, "phantom/<id>").
std::vector<std::string> write_phantom_dataset(const std::filesystem::path& dir, int n_cases, std::uint64_t seed,
                                               const PhantomSpec& base = {});

}  // namespace petprior

#endif  // PETPRIOR_PHANTOM_HPP
