#include <set>

#include "petprior/nifti.hpp"
#include "petprior/segment/segmenter.hpp"

namespace petprior::segment {

void SegInput::validate() const {
  static constexpr const char* kNames[4] = {"PET", "CT", "residual-PET", "residual-CT"};
  for (std::size_t c = 0; c < 4; ++c) {
    require(source[c] == kExpectedSource[c], ErrorCode::kChannelOrder,
            "segmenter channel " + std::to_string(c) + " must be " + kNames[c] + ", got " +
                std::string(to_string(source[c])));
  }
  require(channels[2].modality() == Modality::kResidualPet && channels[3].modality() == Modality::kResidualCt,
          ErrorCode::kChannelOrder, "segmenter channels 2-3 must be residual-PET then residual-CT");
  for (std::size_t c = 1; c < 4; ++c) require_same_grid(channels[0], channels[c], "segmenter input");
}

Tensor<float> SegInput::to_tensor() const {
  const GridSize g = grid();
  Tensor<float> t(Shape{1, 4, g.nz, g.ny, g.nx});
  for (Index c = 0; c < 4; ++c) t.data().segment(c * g.count(), g.count()) = channels[static_cast<std::size_t>(c)].data();
  return t;
}

SegInput make_seg_input(const Volume3D& pet_suv, const Volume3D& ct_hu, const Volume3D& residual_pet,
                        const Volume3D& residual_ct, const ZScoreOptions& zscore) {
  SegInput in;
  in.source = {pet_suv.modality(), ct_hu.modality(), residual_pet.modality(), residual_ct.modality()};
  in.channels = {pet_suv, ct_hu, residual_pet, residual_ct};
  in.validate();
  in.channels[0] = zscore_normalize(pet_suv, fit_zscore_params(pet_suv, zscore));
  in.channels[1] = zscore_normalize(ct_hu, fit_zscore_params(ct_hu, zscore));
  in.channels[2] = passthrough_residual(residual_pet);
  in.channels[3] = passthrough_residual(residual_ct);
  return in;
}

SegInput build_seg_input(const CaseRecord& record) {
  require(record.residual_ct_path.has_value() && record.residual_pet_path.has_value(), ErrorCode::kMissingResidual,
          "case " + record.case_id + " has no residual volumes; run compute-priors first");
  for (const auto& p : {*record.residual_ct_path, *record.residual_pet_path}) {
    require(std::filesystem::exists(p), ErrorCode::kMissingResidual,
            "case " + record.case_id + ": residual file missing: " + p.string());
  }
  const Volume3D ct = load_volume(record.ct_path, Modality::kCtHu);
  const Volume3D pet = load_volume(record.pet_path, Modality::kPetSuv);
  const Volume3D res_ct = load_volume(*record.residual_ct_path, Modality::kResidualCt);
  const Volume3D res_pet = load_volume(*record.residual_pet_path, Modality::kResidualPet);
  return make_seg_input(pet, ct, res_pet, res_ct);
}

SegCase load_seg_case(const CaseRecord& record) {
  SegCase c{record.case_id, build_seg_input(record), load_volume(record.label_path, Modality::kLabel)};
  require_same_grid(c.input.channels[0], c.label, "case " + record.case_id + " label");
  c.label.check_invariants();
  return c;
}

FoldSplit split_folds(const std::vector<CaseRecord>& manifest, int val_fold, int test_fold) {
  require(val_fold != test_fold, ErrorCode::kInvalidArgument, "validation and test folds must differ");
  FoldSplit split;
  for (const auto& rec : manifest) {
    if (rec.fold == val_fold) {
      split.val.push_back(rec);
    } else if (rec.fold == test_fold) {
      split.test.push_back(rec);
    } else {
      split.train.push_back(rec);
    }
  }
  std::set<std::string> seen;
  for (const auto* group : {&split.train, &split.val, &split.test}) {
    for (const auto& rec : *group) {
      require(seen.insert(rec.case_id).second, ErrorCode::kLeakage,
              "fold leakage: case " + rec.case_id + " appears in more than one split");
    }
  }
  return split;
}

}  // namespace petprior::segment
