#ifndef PETPRIOR_NIFTI_HPP
#define PETPRIOR_NIFTI_HPP

#include <filesystem>

#include "petprior/volume.hpp"

namespace petprior {

/// Reads a single-channel NIfTI-1 volume (.nii or .nii.gz). Integer and
/// floating datatypes are accepted; scl_slope/scl_inter are applied when set.
/// The array is permuted/flipped to the closest canonical (RAS) orientation so
/// that axis 2 is axial.
Volume3D load_volume(const std::filesystem::path& path, Modality modality);

/// Writes float32 data (uint8 for labels) with an axis-aligned sform/qform
/// built from spacing and origin. Modality invariants are checked first.
void save_volume(const Volume3D& vol, const std::filesystem::path& path);

}  // namespace petprior

#endif  // PETPRIOR_NIFTI_HPP
