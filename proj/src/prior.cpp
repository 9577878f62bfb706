#include "petprior/prior.hpp"

#include <fstream>

#include "json.hpp"
#include "petprior/hash.hpp"
#include "petprior/nifti.hpp"
#include "petprior/preprocess.hpp"
#include "petprior/slicer.hpp"

namespace petprior {
namespace {

constexpr const char* kCacheFile = "prior_cache.json";

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kCorruptHeader, "corrupt prior cache " + path.string());
  }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

PriorPair compute_prior(const Volume3D& ct_hu, const Volume3D& pet_suv, inpaint::InpaintModel& model,
                        const PriorOptions& options) {
  require(ct_hu.modality() == Modality::kCtHu, ErrorCode::kInvalidArgument, "compute_prior expects CT in HU");
  require(pet_suv.modality() == Modality::kPetSuv, ErrorCode::kInvalidArgument, "compute_prior expects PET in SUV");
  require_same_grid(ct_hu, pet_suv, "compute_prior");
  require(model.trained(), ErrorCode::kUntrained, "compute_prior needs a trained inpainting network");

  const Volume3D ct_norm = clip_scale_normalize(ct_hu, ClipScaleParams::ct());
  const Volume3D pet_norm = clip_scale_normalize(pet_suv, ClipScaleParams::pet());
  const SliceStack stack = volume_to_rgb_slices(ct_norm, pet_norm);
  const auto candidates = pet_candidate_regions(pet_suv, options.threshold_suv);

  const GridSize g = ct_hu.grid();
  std::vector<Image> res_ct(static_cast<std::size_t>(g.nz), Image::Zero(g.nx, g.ny));
  std::vector<Image> res_pet = res_ct;
  for (Index z = 0; z < g.nz; ++z) {
    const auto& regions = candidates[static_cast<std::size_t>(z)];
    if (regions.regions.empty()) continue;
    const HoleMask holes = candidate_hole_mask(regions, g.nx, g.ny, options.radius_px);
    const RGBSlice& original = stack.slices[static_cast<std::size_t>(z)];
    const RGBSlice filled = model.inpaint(original, holes);
    ResidualPlanes r = split_residual_channels(original, filled);
    res_ct[static_cast<std::size_t>(z)] = std::move(r.ct);
    res_pet[static_cast<std::size_t>(z)] = std::move(r.pet);
  }
  PriorPair out{stack_to_volume(res_ct, ct_hu, Modality::kResidualCt),
                stack_to_volume(res_pet, ct_hu, Modality::kResidualPet)};
  out.residual_ct.check_invariants();
  out.residual_pet.check_invariants();
  return out;
}

std::vector<CaseRecord> precompute_priors(const std::vector<CaseRecord>& manifest, const std::filesystem::path& out_dir,
                                          inpaint::InpaintModel& model, const std::string& checkpoint_hash,
                                          const PriorOptions& options, PriorCacheStats* stats) {
  std::filesystem::create_directories(out_dir);
  const auto cache_path = out_dir / kCacheFile;
  nlohmann::json cache;
  if (std::filesystem::exists(cache_path)) {
    cache = read_json(cache_path);
    const std::string old_hash = cache.value("checkpoint_hash", "");
    require(old_hash == checkpoint_hash, ErrorCode::kStaleCache,
            "prior cache in " + out_dir.string() + " was built with checkpoint " + old_hash + ", current is " +
                checkpoint_hash + "; rerun with --force");
    require(cache.value("threshold_suv", -1.0) == options.threshold_suv &&
                cache.value("radius_px", -1.0) == options.radius_px,
            ErrorCode::kStaleCache,
            "prior cache in " + out_dir.string() + " was built with different threshold/radius; rerun with --force");
  } else {
    cache = {{"checkpoint_hash", checkpoint_hash},
             {"threshold_suv", options.threshold_suv},
             {"radius_px", options.radius_px},
             {"cases", nlohmann::json::object()}};
  }

  PriorCacheStats local;
  std::vector<CaseRecord> updated = manifest;
  for (auto& rec : updated) {
    const auto ct_path = out_dir / (rec.case_id + "_res_ct.nii.gz");
    const auto pet_path = out_dir / (rec.case_id + "_res_pet.nii.gz");
    auto& entry = cache["cases"][rec.case_id];
    const bool cached = entry.is_object() && std::filesystem::exists(ct_path) && std::filesystem::exists(pet_path) &&
                        entry.value("res_ct_sha256", "") == sha256_file(ct_path) &&
                        entry.value("res_pet_sha256", "") == sha256_file(pet_path);
    if (cached) {
      ++local.reused;
    } else {
      const CaseVolumes vols = load_case(rec);
      const PriorPair prior = compute_prior(vols.ct, vols.pet, model, options);
      save_volume(prior.residual_ct, ct_path);
      save_volume(prior.residual_pet, pet_path);
      entry = {{"res_ct_sha256", sha256_file(ct_path)}, {"res_pet_sha256", sha256_file(pet_path)}};
      write_json(cache, cache_path);
      ++local.computed;
    }
    rec.residual_ct_path = ct_path;
    rec.residual_pet_path = pet_path;
  }
  write_json(cache, cache_path);
  if (stats) *stats = local;
  return updated;
}

}  // namespace petprior
