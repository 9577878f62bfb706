#ifndef PETPRIOR_PRIOR_HPP
#define PETPRIOR_PRIOR_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "petprior/inpaint/model.hpp"
#include "petprior/manifest.hpp"
#include "petprior/maskgen.hpp"
#include "petprior/volume.hpp"

namespace petprior {

/// Signed residual volumes (original - inpainted) on the source grid.
struct PriorPair {
  Volume3D residual_ct;
  Volume3D residual_pet;
};

struct PriorOptions {
  double threshold_suv = kDefaultPetThresholdSuv;
  double radius_px = kDefaultHoleRadiusPx;
};

/// Slices without PET candidates are left at exactly zero and never reach
/// the network.
PriorPair compute_prior(const Volume3D& ct_hu, const Volume3D& pet_suv, inpaint::InpaintModel& model,
                        const PriorOptions& options = {});

struct PriorCacheStats {
  int computed = 0;
  int reused = 0;
};

/// Writes `<case>_res_ct.nii.gz` and `<case>_res_pet.nii.gz` into `out_dir`
/// and returns the manifest with residual paths filled in.
///
/// `out_dir/prior_cache.json` records the checkpoint hash and prior options
/// plus a content hash per residual file. A case whose recorded files still
/// hash correctly is skipped; a cache made with a different checkpoint or
/// options raises kStaleCache.
std::vector<CaseRecord> precompute_priors(const std::vector<CaseRecord>& manifest, const std::filesystem::path& out_dir,
                                          inpaint::InpaintModel& model, const std::string& checkpoint_hash,
                                          const PriorOptions& options = {}, PriorCacheStats* stats = nullptr);

}  // namespace petprior

#endif  // PETPRIOR_PRIOR_HPP
