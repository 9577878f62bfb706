#include "petprior/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "petprior/nifti.hpp"

namespace petprior {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(TumorClass c) {
  switch (c) {
    case TumorClass::kNegative: return "NEGATIVE";
    case TumorClass::kLungCancer: return "LUNG_CANCER";
    case TumorClass::kLymphoma: return "LYMPHOMA";
    case TumorClass::kMelanoma: return "MELANOMA";
  }
  return "UNKNOWN";
}

TumorClass tumor_class_from_string(std::string_view name) {
  for (TumorClass c : kAllTumorClasses) {
    if (to_string(c) == name) return c;
  }
  fail(ErrorCode::kInvalidArgument, "unknown tumor class '" + std::string(name) + "'");
}

namespace {

struct FileTriple {
  std::optional<fs::path> ct, pet, label;
};

/// Splits "<id>_<role>.nii[.gz]" into (id, role).
std::optional<std::pair<std::string, std::string>> parse_name(const std::string& name) {
  std::string stem;
  if (name.size() > 7 && name.ends_with(".nii.gz")) {
    stem = name.substr(0, name.size() - 7);
  } else if (name.size() > 4 && name.ends_with(".nii")) {
    stem = name.substr(0, name.size() - 4);
  } else {
    return std::nullopt;
  }
  for (const char* role : {"_ct", "_pet", "_label"}) {
    const std::string r(role);
    if (stem.size() > r.size() && stem.ends_with(r)) {
      return std::make_pair(stem.substr(0, stem.size() - r.size()), r.substr(1));
    }
  }
  return std::nullopt;
}

std::map<std::string, TumorClass> read_classes(const fs::path& csv) {
  std::map<std::string, TumorClass> out;
  if (!fs::exists(csv)) return out;
  std::ifstream in(csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("case_id", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorCode::kInvalidArgument,
            "malformed line in " + csv.string() + ": " + line);
    out[line.substr(0, comma)] = tumor_class_from_string(line.substr(comma + 1));
  }
  return out;
}

std::string path_string(const std::optional<fs::path>& p) { return p ? p->string() : std::string(); }

}  // namespace

void assign_folds(std::vector<CaseRecord>& cases, int n_folds) {
  require(n_folds >= 1, ErrorCode::kInvalidArgument, "n_folds must be >= 1");
  std::sort(cases.begin(), cases.end(), [](const CaseRecord& a, const CaseRecord& b) {
    return a.case_id < b.case_id;
  });
  int pointer = 0;
  for (TumorClass c : kAllTumorClasses) {
    for (auto& rec : cases) {
      if (rec.tumor_class != c) continue;
      rec.fold = pointer;
      pointer = (pointer + 1) % n_folds;
    }
  }
}

std::vector<CaseRecord> build_manifest(const fs::path& root_dir, int n_folds) {
  require(fs::is_directory(root_dir), ErrorCode::kMissingFile,
          "dataset directory not found: " + root_dir.string());
  std::map<std::string, FileTriple> triples;
  std::vector<fs::path> entries;
  for (const auto& entry : fs::directory_iterator(root_dir)) {
    if (entry.is_regular_file()) entries.push_back(entry.path());
  }
  std::sort(entries.begin(), entries.end());
  std::set<std::string> duplicates;
  for (const auto& path : entries) {
    const auto parsed = parse_name(path.filename().string());
    if (!parsed) continue;
    auto& t = triples[parsed->first];
    auto& slot = parsed->second == "ct" ? t.ct : (parsed->second == "pet" ? t.pet : t.label);
    if (slot) duplicates.insert(parsed->first);
    slot = path;
  }
  if (!duplicates.empty()) {
    std::string ids;
    for (const auto& id : duplicates) ids += (ids.empty() ? "" : ", ") + id;
    fail(ErrorCode::kDuplicate, "duplicate case ids: " + ids);
  }
  std::string unpaired;
  for (const auto& [id, t] : triples) {
    if (!t.ct || !t.pet || !t.label) {
      std::string missing;
      if (!t.ct) missing += " ct";
      if (!t.pet) missing += " pet";
      if (!t.label) missing += " label";
      unpaired += (unpaired.empty() ? "" : "; ") + id + " (missing" + missing + ")";
    }
  }
  require(unpaired.empty(), ErrorCode::kUnpaired, "unpaired files: " + unpaired);
  require(!triples.empty(), ErrorCode::kEmptyInput, "no cases found in " + root_dir.string());

  const auto classes = read_classes(root_dir / "classes.csv");
  std::vector<CaseRecord> cases;
  for (const auto& [id, t] : triples) {
    CaseRecord rec;
    rec.case_id = id;
    rec.ct_path = *t.ct;
    rec.pet_path = *t.pet;
    rec.label_path = *t.label;
    if (auto it = classes.find(id); it != classes.end()) {
      rec.tumor_class = it->second;
    } else {
      const Volume3D label = load_volume(rec.label_path, Modality::kLabel);
      require(label.data().sum() == 0.0f, ErrorCode::kInvalidArgument,
              "case " + id + " has tumor voxels but no entry in classes.csv");
      rec.tumor_class = TumorClass::kNegative;
    }
    cases.push_back(std::move(rec));
  }
  assign_folds(cases, n_folds);
  return cases;
}

void save_manifest(const std::vector<CaseRecord>& cases, const fs::path& path) {
  json arr = json::array();
  for (const auto& c : cases) {
    json j = {{"case_id", c.case_id},
              {"ct_path", c.ct_path.string()},
              {"pet_path", c.pet_path.string()},
              {"label_path", c.label_path.string()},
              {"tumor_class", std::string(to_string(c.tumor_class))},
              {"fold", c.fold}};
    if (c.residual_ct_path) j["residual_ct_path"] = path_string(c.residual_ct_path);
    if (c.residual_pet_path) j["residual_pet_path"] = path_string(c.residual_pet_path);
    arr.push_back(std::move(j));
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    require(out.good(), ErrorCode::kIo, "cannot write manifest " + path.string());
    out << json{{"cases", arr}}.dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

std::vector<CaseRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, "manifest not found: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, "malformed manifest " + path.string() + ": " + e.what());
  }
  std::vector<CaseRecord> cases;
  std::set<std::string> seen;
  try {
    for (const auto& j : doc.at("cases")) {
      CaseRecord c;
      c.case_id = j.at("case_id").get<std::string>();
      require(seen.insert(c.case_id).second, ErrorCode::kDuplicate,
              "duplicate case id in manifest: " + c.case_id);
      c.ct_path = j.at("ct_path").get<std::string>();
      c.pet_path = j.at("pet_path").get<std::string>();
      c.label_path = j.at("label_path").get<std::string>();
      c.tumor_class = tumor_class_from_string(j.at("tumor_class").get<std::string>());
      c.fold = j.at("fold").get<int>();
      if (j.contains("residual_ct_path")) c.residual_ct_path = j["residual_ct_path"].get<std::string>();
      if (j.contains("residual_pet_path")) c.residual_pet_path = j["residual_pet_path"].get<std::string>();
      cases.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, "malformed manifest " + path.string() + ": " + e.what());
  }
  return cases;
}

CaseVolumes load_case(const CaseRecord& record) {
  CaseVolumes v{load_volume(record.ct_path, Modality::kCtHu),
                load_volume(record.pet_path, Modality::kPetSuv),
                load_volume(record.label_path, Modality::kLabel)};
  require_same_grid(v.ct, v.pet, "case " + record.case_id + " CT/PET");
  require_same_grid(v.ct, v.label, "case " + record.case_id + " CT/label");
  v.label.check_invariants();
  if (record.tumor_class == TumorClass::kNegative) {
    require(v.label.data().sum() == 0.0f, ErrorCode::kInvariant,
            "NEGATIVE case " + record.case_id + " has a non-empty label");
  }
  return v;
}

}  // namespace petprior
