#include "petprior/volume.hpp"

namespace petprior {

std::string_view to_string(Modality modality) {
  switch (modality) {
    case Modality::kCtHu: return "CT_HU";
    case Modality::kPetSuv: return "PET_SUV";
    case Modality::kResidualCt: return "RESIDUAL_CT";
    case Modality::kResidualPet: return "RESIDUAL_PET";
    case Modality::kLabel: return "LABEL";
    case Modality::kNormalized: return "NORMALIZED";
  }
  return "UNKNOWN";
}

Modality modality_from_string(std::string_view name) {
  for (Modality m : {Modality::kCtHu, Modality::kPetSuv, Modality::kResidualCt,
                     Modality::kResidualPet, Modality::kLabel, Modality::kNormalized}) {
    if (to_string(m) == name) return m;
  }
  fail(ErrorCode::kInvalidArgument, "unknown modality '" + std::string(name) + "'");
}

}  // namespace petprior
