#include "petprior/pipeline/config.hpp"

#include <fstream>
#include <limits>
#include <sstream>

namespace petprior::pipeline {
namespace {

using nlohmann::json;

enum class Kind { kObject, kInt, kUInt64, kNumber, kBool, kString, kChoice, kRange2, kInt3 };

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Field {
  std::string key;
  Kind kind = Kind::kNumber;
  json def;
  double lo = -kInf;
  double hi = kInf;
  bool lo_open = false;  // exclusive lower bound
  std::vector<std::string> choices;
  std::vector<Field> children;
};

Field obj(std::string key, std::vector<Field> children) {
  Field f;
  f.key = std::move(key);
  f.kind = Kind::kObject;
  f.children = std::move(children);
  return f;
}
Field num(std::string key, double def, double lo, double hi, bool lo_open = false) {
  return {std::move(key), Kind::kNumber, def, lo, hi, lo_open, {}, {}};
}
Field integer(std::string key, long long def, double lo, double hi = kInf) {
  return {std::move(key), Kind::kInt, def, lo, hi, false, {}, {}};
}
Field boolean(std::string key, bool def) { return {std::move(key), Kind::kBool, def, -kInf, kInf, false, {}, {}}; }
Field str(std::string key, std::string def) {
  return {std::move(key), Kind::kString, std::move(def), -kInf, kInf, false, {}, {}};
}
Field choice(std::string key, std::string def, std::vector<std::string> options) {
  return {std::move(key), Kind::kChoice, std::move(def), -kInf, kInf, false, std::move(options), {}};
}
Field range2(std::string key, double a, double b, double lo, double hi, bool lo_open = false) {
  return {std::move(key), Kind::kRange2, json::array({a, b}), lo, hi, lo_open, {}, {}};
}
Field int3(std::string key, long long a, long long b, long long c, double lo) {
  return {std::move(key), Kind::kInt3, json::array({a, b, c}), lo, kInf, false, {}, {}};
}

const Field& schema() {
  static const Field root = obj(
      "",
      {
          {"seed", Kind::kUInt64, 0, 0, kInf, false, {}, {}},
          obj("data", {str("manifest", ""), str("data_dir", ""), integer("n_folds", 4, 2, 1000),
                       integer("val_fold", 0, 0, 999), integer("test_fold", 1, 0, 999)}),
          obj("inpaint",
              {integer("epochs_phase1", 150, 0), integer("epochs_phase2", 150, 0),
               num("lr_phase1", 1e-4, 0.0, 1.0, true), num("lr_phase2", 5e-5, 0.0, 1.0, true),
               boolean("freeze_encoder_batchnorm_phase2", true), integer("batch_size", 8, 1, 4096),
               integer("max_slices_per_epoch", 0, 0), integer("levels", 4, 1, 8), integer("base_width", 32, 1, 1024),
               integer("max_width", 512, 1, 4096), str("feature_weights", ""),
               num("threshold_suv", 2.5, 0.0, 100.0, true), num("radius_px", 17.0, 0.0, 1000.0, true),
               obj("loss", {num("valid", 1.0, 0.0, kInf), num("hole", 6.0, 0.0, kInf), num("perceptual", 0.05, 0.0, kInf),
                            num("style", 120.0, 0.0, kInf), num("tv", 0.1, 0.0, kInf)}),
               obj("masks", {range2("target_fraction_range", 0.25, 0.30, 0.0, 1.0),
                             range2("primitive_count_range", 5, 12, 0, 1000),
                             range2("primitive_size_range", 0.01, 0.08, 0.0, 1.0, true),
                             integer("max_attempts", 400, 1, 1e6)})}),
          obj("segment",
              {integer("epochs", 1000, 1), integer("iterations_per_epoch", 250, 1), integer("batch_size", 2, 1, 1024),
               num("lr", 1e-4, 0.0, 1.0, true), choice("optimizer", "adam", {"adam"}),
               int3("patch_size", 128, 128, 64, 1), integer("levels", 5, 1, 7), integer("base_width", 32, 1, 1024),
               integer("max_width", 320, 1, 4096), integer("foreground_every", 2, 0), integer("checkpoint_every", 50, 0),
               integer("validate_every", 1, 0),
               obj("augmentation",
                   {num("p_rotation", 0.2, 0.0, 1.0), num("rotation_range_deg", 30.0, 0.0, 180.0),
                    num("p_scale", 0.2, 0.0, 1.0), range2("scale_range", 0.7, 1.4, 0.0, 10.0, true),
                    num("p_elastic", 0.2, 0.0, 1.0), range2("elastic_alpha_range", 0.0, 3.0, 0.0, 100.0),
                    range2("elastic_sigma_range", 5.0, 8.0, 0.0, 100.0, true), num("p_gamma", 0.3, 0.0, 1.0),
                    range2("gamma_range", 0.7, 1.5, 0.0, 10.0, true)})}),
          obj("eval", {choice("mode", "component", {"component", "voxelwise"}), choice("split", "test", {"test", "all"})}),
      });
  return root;
}

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

std::string bounds_text(const Field& f) {
  std::ostringstream os;
  os << (f.lo_open ? "(" : "[") << f.lo << ", " << f.hi << "]";
  return os.str();
}

bool in_bounds(const Field& f, double v) {
  return (f.lo_open ? v > f.lo : v >= f.lo) && v <= f.hi;
}

// Returns true and leaves `out` set when `v` is acceptable for `f`.
bool check_leaf(const Field& f, const json& v, const std::string& path, std::vector<std::string>& errors) {
  auto type_error = [&](const char* expected) {
    errors.push_back(path + ": expected " + expected + ", got " + std::string(v.type_name()));
    return false;
  };
  auto range_error = [&]() {
    errors.push_back(path + ": value " + v.dump() + " out of range " + bounds_text(f));
    return false;
  };
  switch (f.kind) {
    case Kind::kInt:
      if (!v.is_number_integer()) return type_error("integer");
      return in_bounds(f, v.get<double>()) || range_error();
    case Kind::kUInt64:
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        return type_error("non-negative integer");
      }
      return true;
    case Kind::kNumber:
      if (!v.is_number()) return type_error("number");
      return in_bounds(f, v.get<double>()) || range_error();
    case Kind::kBool:
      return v.is_boolean() || type_error("boolean");
    case Kind::kString:
      return v.is_string() || type_error("string");
    case Kind::kChoice: {
      if (!v.is_string()) return type_error("string");
      for (const auto& c : f.choices) {
        if (v.get<std::string>() == c) return true;
      }
      std::string options;
      for (const auto& c : f.choices) options += (options.empty() ? "" : "|") + c;
      errors.push_back(path + ": '" + v.get<std::string>() + "' is not one of " + options);
      return false;
    }
    case Kind::kRange2: {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        return type_error("[low, high] number pair");
      }
      const double a = v[0].get<double>(), b = v[1].get<double>();
      if (!in_bounds(f, a) || !in_bounds(f, b)) return range_error();
      if (a > b) {
        errors.push_back(path + ": low bound exceeds high bound");
        return false;
      }
      return true;
    }
    case Kind::kInt3: {
      if (!v.is_array() || v.size() != 3) return type_error("[x, y, z] integer triple");
      for (const auto& e : v) {
        if (!e.is_number_integer()) return type_error("[x, y, z] integer triple");
        if (!in_bounds(f, e.get<double>())) return range_error();
      }
      return true;
    }
    case Kind::kObject:
      break;
  }
  return false;
}

json walk(const Field& node, const json* input, const std::string& path, std::vector<std::string>& errors) {
  json out = json::object();
  if (input && !input->is_null() && !input->is_object()) {
    errors.push_back((path.empty() ? "config" : path) + ": expected object, got " + std::string(input->type_name()));
    input = nullptr;
  }
  if (input && input->is_object()) {
    for (const auto& [key, value] : input->items()) {
      bool known = false;
      for (const auto& c : node.children) known = known || c.key == key;
      if (!known) errors.push_back("unknown key '" + join_path(path, key) + "'");
    }
  }
  for (const auto& child : node.children) {
    const std::string child_path = join_path(path, child.key);
    const json* value = (input && input->is_object() && input->contains(child.key)) ? &input->at(child.key) : nullptr;
    if (child.kind == Kind::kObject) {
      out[child.key] = walk(child, value, child_path, errors);
    } else if (value && check_leaf(child, *value, child_path, errors)) {
      out[child.key] = *value;
    } else {
      out[child.key] = child.def;
    }
  }
  return out;
}

template <typename Fn>
void collect(std::vector<std::string>& errors, const std::string& section, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    errors.push_back(section + ": " + e.what());
  }
}

std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = std::to_string(errors.size()) + " config error(s): ";
  for (std::size_t i = 0; i < errors.size(); ++i) msg += (i ? "; " : "") + errors[i];
  return msg;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : Error(ErrorCode::kConfig, join_errors(errors)), errors_(std::move(errors)) {}

json default_config_json() {
  std::vector<std::string> errors;
  return walk(schema(), nullptr, "", errors);
}

PipelineConfig validate_config(const json& config) {
  std::vector<std::string> errors;
  const json r = walk(schema(), &config, "", errors);

  PipelineConfig pc;
  pc.resolved = r;
  pc.seed = r.at("seed").get<std::uint64_t>();

  const json& d = r.at("data");
  pc.data.manifest = d.at("manifest").get<std::string>();
  pc.data.data_dir = d.at("data_dir").get<std::string>();
  pc.data.n_folds = d.at("n_folds").get<int>();
  pc.data.val_fold = d.at("val_fold").get<int>();
  pc.data.test_fold = d.at("test_fold").get<int>();
  if (pc.data.val_fold >= pc.data.n_folds || pc.data.test_fold >= pc.data.n_folds) {
    errors.push_back("data: val_fold and test_fold must be < n_folds");
  }
  if (pc.data.val_fold == pc.data.test_fold) errors.push_back("data: val_fold and test_fold must differ");

  const json& in = r.at("inpaint");
  auto& ic = pc.inpaint;
  ic.epochs_phase1 = in.at("epochs_phase1").get<int>();
  ic.epochs_phase2 = in.at("epochs_phase2").get<int>();
  ic.lr_phase1 = in.at("lr_phase1").get<double>();
  ic.lr_phase2 = in.at("lr_phase2").get<double>();
  ic.freeze_encoder_batchnorm_phase2 = in.at("freeze_encoder_batchnorm_phase2").get<bool>();
  ic.batch_size = in.at("batch_size").get<int>();
  ic.max_slices_per_epoch = in.at("max_slices_per_epoch").get<int>();
  ic.network.levels = in.at("levels").get<int>();
  ic.network.base_width = in.at("base_width").get<Index>();
  ic.network.max_width = in.at("max_width").get<Index>();
  if (const auto fw = in.at("feature_weights").get<std::string>(); !fw.empty()) ic.feature_weights = fw;
  const json& lw = in.at("loss");
  ic.loss = {lw.at("valid").get<double>(), lw.at("hole").get<double>(), lw.at("perceptual").get<double>(),
             lw.at("style").get<double>(), lw.at("tv").get<double>()};
  const json& mk = in.at("masks");
  ic.masks.target_fraction_range = {mk.at("target_fraction_range")[0].get<double>(),
                                    mk.at("target_fraction_range")[1].get<double>()};
  ic.masks.primitive_count_range = {static_cast<int>(mk.at("primitive_count_range")[0].get<double>()),
                                    static_cast<int>(mk.at("primitive_count_range")[1].get<double>())};
  ic.masks.primitive_size_range = {mk.at("primitive_size_range")[0].get<double>(),
                                   mk.at("primitive_size_range")[1].get<double>()};
  ic.masks.max_attempts = mk.at("max_attempts").get<int>();
  pc.prior.threshold_suv = in.at("threshold_suv").get<double>();
  pc.prior.radius_px = in.at("radius_px").get<double>();

  const json& sg = r.at("segment");
  auto& sc = pc.segment;
  sc.epochs = sg.at("epochs").get<int>();
  sc.iterations_per_epoch = sg.at("iterations_per_epoch").get<int>();
  sc.batch_size = sg.at("batch_size").get<int>();
  sc.lr = sg.at("lr").get<double>();
  const auto patch = sg.at("patch_size").get<std::vector<Index>>();
  sc.patch = {patch[0], patch[1], patch[2]};
  sc.network.levels = sg.at("levels").get<int>();
  sc.network.base_width = sg.at("base_width").get<Index>();
  sc.network.max_width = sg.at("max_width").get<Index>();
  sc.foreground_every = sg.at("foreground_every").get<int>();
  sc.checkpoint_every = sg.at("checkpoint_every").get<int>();
  sc.validate_every = sg.at("validate_every").get<int>();
  const json& au = sg.at("augmentation");
  auto& ac = pc.augmentation;
  auto pair_of = [](const json& j) { return std::pair<double, double>{j[0].get<double>(), j[1].get<double>()}; };
  ac.p_rotation = au.at("p_rotation").get<double>();
  ac.rotation_range_deg = au.at("rotation_range_deg").get<double>();
  ac.p_scale = au.at("p_scale").get<double>();
  ac.scale_range = pair_of(au.at("scale_range"));
  ac.p_elastic = au.at("p_elastic").get<double>();
  ac.elastic_alpha_range = pair_of(au.at("elastic_alpha_range"));
  ac.elastic_sigma_range = pair_of(au.at("elastic_sigma_range"));
  ac.p_gamma = au.at("p_gamma").get<double>();
  ac.gamma_range = pair_of(au.at("gamma_range"));

  pc.eval_mode = eval::volume_mode_from_string(r.at("eval").at("mode").get<std::string>());
  pc.eval_split = r.at("eval").at("split").get<std::string>() == "all" ? EvalSplit::kAll : EvalSplit::kTest;

  collect(errors, "inpaint", [&] { ic.validate(); });
  collect(errors, "segment", [&] { sc.validate(); });
  collect(errors, "segment.augmentation", [&] { ac.validate(); });
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return pc;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, "config not found: " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  return validate_config(j);
}

}  // namespace petprior::pipeline
