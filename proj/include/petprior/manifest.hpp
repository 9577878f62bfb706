#ifndef PETPRIOR_MANIFEST_HPP
#define PETPRIOR_MANIFEST_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "petprior/volume.hpp"

namespace petprior {

enum class TumorClass { kNegative, kLungCancer, kLymphoma, kMelanoma };

inline constexpr TumorClass kAllTumorClasses[] = {TumorClass::kNegative, TumorClass::kLungCancer,
                                                  TumorClass::kLymphoma, TumorClass::kMelanoma};

std::string_view to_string(TumorClass c);
TumorClass tumor_class_from_string(std::string_view name);

struct CaseRecord {
  std::string case_id;
  std::filesystem::path ct_path;
  std::filesystem::path pet_path;
  std::filesystem::path label_path;
  TumorClass tumor_class = TumorClass::kNegative;
  int fold = 0;
  std::optional<std::filesystem::path> residual_ct_path;
  std::optional<std::filesystem::path> residual_pet_path;
};

struct CaseVolumes {
  Volume3D ct;
  Volume3D pet;
  Volume3D label;
};

/// Scans `root_dir` for `<id>_ct.nii[.gz]`, `<id>_pet.nii[.gz]` and
/// `<id>_label.nii[.gz]` triples. Tumor classes come from an optional
/// `classes.csv` (`case_id,tumor_class`); a case absent from it is NEGATIVE
/// when its label is empty and an error otherwise.
///
/// Folds are assigned by stratified round-robin: cases are grouped by class
/// (sorted by id within a class) and dealt to folds with one rotating pointer
/// shared across classes, so per-class and overall fold sizes differ by at
/// most one.
std::vector<CaseRecord> build_manifest(const std::filesystem::path& root_dir, int n_folds);

/// Round-robin fold assignment on already-classified records (in place).
void assign_folds(std::vector<CaseRecord>& cases, int n_folds);

void save_manifest(const std::vector<CaseRecord>& cases, const std::filesystem::path& path);
std::vector<CaseRecord> load_manifest(const std::filesystem::path& path);

/// Loads CT, PET and label and checks the same-grid and negative-case
/// invariants.
CaseVolumes load_case(const CaseRecord& record);

}  // namespace petprior

#endif  // PETPRIOR_MANIFEST_HPP
