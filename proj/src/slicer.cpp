#include "petprior/slicer.hpp"

namespace petprior {

RGBSlice make_rgb_slice(const Image& ct, const Image& pet, Index z_index, std::string case_id) {
  require(ct.rows() == pet.rows() && ct.cols() == pet.cols(), ErrorCode::kShapeMismatch,
          "CT and PET planes differ in shape");
  require((ct >= 0.0f).all() && (ct <= 1.0f).all() && (pet >= 0.0f).all() && (pet <= 1.0f).all(),
          ErrorCode::kRange, "RGB slice values must lie in [0, 1]");
  return RGBSlice{{ct, pet, ct}, z_index, std::move(case_id)};
}

SliceStack volume_to_rgb_slices(const Volume3D& ct_norm, const Volume3D& pet_norm,
                                const std::string& case_id) {
  require(ct_norm.modality() == Modality::kNormalized && pet_norm.modality() == Modality::kNormalized,
          ErrorCode::kInvalidArgument, "slicing expects normalized CT and PET volumes");
  require_same_grid(ct_norm, pet_norm, "volume_to_rgb_slices");
  SliceStack stack;
  stack.grid_shape = ct_norm.grid();
  stack.spacing = ct_norm.spacing();
  stack.origin = ct_norm.origin();
  stack.slices.reserve(static_cast<std::size_t>(ct_norm.grid().nz));
  for (Index z = 0; z < ct_norm.grid().nz; ++z) {
    stack.slices.push_back(make_rgb_slice(ct_norm.plane(z), pet_norm.plane(z), z, case_id));
  }
  return stack;
}

ResidualPlanes split_residual_channels(const RGBSlice& original, const RGBSlice& inpainted) {
  require(original.rows() == inpainted.rows() && original.cols() == inpainted.cols(),
          ErrorCode::kShapeMismatch, "residual: slice shapes differ");
  require(original.z_index == inpainted.z_index, ErrorCode::kShapeMismatch,
          "residual: slices come from different z positions");
  return ResidualPlanes{original.channels[0] - inpainted.channels[0],
                        original.channels[1] - inpainted.channels[1]};
}

Volume3D stack_to_volume(std::span<const Image> planes, const Volume3D& like, Modality modality) {
  const GridSize g = like.grid();
  require(static_cast<Index>(planes.size()) == g.nz, ErrorCode::kShapeMismatch,
          "plane count " + std::to_string(planes.size()) + " does not match nz=" + std::to_string(g.nz));
  Eigen::ArrayXf data(g.count());
  for (Index z = 0; z < g.nz; ++z) {
    const Image& p = planes[static_cast<std::size_t>(z)];
    require(p.rows() == g.nx && p.cols() == g.ny, ErrorCode::kShapeMismatch,
            "plane " + std::to_string(z) + " shape does not match template");
    data.segment(z * g.plane_count(), g.plane_count()) = p.reshaped();
  }
  return Volume3D(g, like.spacing(), like.origin(), modality, std::move(data));
}

}  // namespace petprior
