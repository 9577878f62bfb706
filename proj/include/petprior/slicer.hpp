#ifndef PETPRIOR_SLICER_HPP
#define PETPRIOR_SLICER_HPP

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "petprior/volume.hpp"

namespace petprior {

/// 2D plane, nx rows by ny columns (x fastest in memory, like Volume planes).
using Image = Eigen::ArrayXXf;

/// Three-channel axial slice in [0, 1], channel order [CT, PET, CT].
struct RGBSlice {
  std::array<Image, 3> channels;
  Index z_index = 0;
  std::string case_id;

  Index rows() const { return channels[0].rows(); }
  Index cols() const { return channels[0].cols(); }
};

/// Builds the [CT, PET, CT] stacking from two normalized planes.
RGBSlice make_rgb_slice(const Image& ct, const Image& pet, Index z_index, std::string case_id = {});

struct SliceStack {
  std::vector<RGBSlice> slices;
  GridSize grid_shape;
  Spacing spacing = Spacing::Ones();
  Origin origin = Origin::Zero();
};

SliceStack volume_to_rgb_slices(const Volume3D& ct_norm, const Volume3D& pet_norm,
                                const std::string& case_id = {});

struct ResidualPlanes {
  Image ct;
  Image pet;
};

/// original - inpainted; CT residual from channel 0, PET residual from channel 1.
ResidualPlanes split_residual_channels(const RGBSlice& original, const RGBSlice& inpainted);

Volume3D stack_to_volume(std::span<const Image> planes, const Volume3D& like, Modality modality);

}  // namespace petprior

#endif  // PETPRIOR_SLICER_HPP
