// Command-line front end for the two-stage pipeline.

#include <cstring>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "petprior/hash.hpp"
#include "petprior/nifti.hpp"
#include "petprior/phantom.hpp"
#include "petprior/pipeline/pipeline.hpp"
#include "petprior/prior.hpp"

namespace {

using namespace petprior;
using nlohmann::json;

struct CommonFlags {
  std::string config;
  std::string run_dir = "run";
  std::optional<std::uint64_t> seed;
  std::optional<double> pet_threshold;
  std::string data_dir;
  int workers = 1;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Pipeline config (JSON)");
  cmd->add_option("--run-dir", f.run_dir, "Run directory")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Override the root seed");
  cmd->add_option("--data-dir", f.data_dir, "Override data.data_dir");
  cmd->add_option("--pet-threshold", f.pet_threshold, "Override the candidate PET threshold (SUV)");
  cmd->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_flag("--force", f.force, "Rerun stages that already completed");
}

pipeline::PipelineConfig resolve_config(const CommonFlags& f) {
  json j = json::object();
  if (!f.config.empty()) j = pipeline::load_config(f.config).resolved;
  if (f.seed) j["seed"] = *f.seed;
  if (!f.data_dir.empty()) j["data"]["data_dir"] = f.data_dir;
  if (f.pet_threshold) j["inpaint"]["threshold_suv"] = *f.pet_threshold;
  return pipeline::validate_config(j);
}

int run_stages(const CommonFlags& f, const std::vector<pipeline::Stage>& stages) {
  pipeline::PipelineOptions opts;
  opts.force = f.force;
  opts.workers = f.workers;
  opts.log = [](const std::string& m) { std::cerr << m << '\n'; };
  pipeline::Pipeline p(resolve_config(f), f.run_dir, opts);
  for (auto s : stages) {
    const auto r = p.run(s);
    std::cout << json{{"stage", pipeline::to_string(s)}, {"status", r.skipped ? "skipped" : "ok"}, {"summary", r.summary}}
                     .dump()
              << '\n';
  }
  return 0;
}

void emit_error(const std::string& code, const std::string& message, const json& extra = json::object()) {
  json j = {{"error", code}, {"message", message}};
  j.update(extra);
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PET-CT lesion segmentation with inpainting priors"};
  app.require_subcommand(1);

  // phantom
  std::string ph_out, ph_id = "phantom";
  int ph_cases = 0, ph_size = 48;
  std::uint64_t ph_seed = 0;
  auto* phantom = app.add_subcommand("phantom", "Generate synthetic PET/CT/label volumes");
  phantom->add_option("--out", ph_out, "Output directory")->required();
  phantom->add_option("--cases", ph_cases, "Write a dataset of N cases plus classes.csv");
  phantom->add_option("--id", ph_id, "Case id in single-case mode")->capture_default_str();
  phantom->add_option("--seed", ph_seed, "Seed")->capture_default_str();
  phantom->add_option("--size", ph_size, "Cubic grid size")->check(CLI::Range(16, 512))->capture_default_str();

  // pipeline stages
  CommonFlags flags;
  std::vector<std::pair<CLI::App*, pipeline::Stage>> stage_cmds;
  for (auto s : pipeline::kAllStages) {
    auto* cmd = app.add_subcommand(std::string(pipeline::to_string(s)), "Run the " + std::string(pipeline::to_string(s)) + " stage");
    add_common(cmd, flags);
    stage_cmds.emplace_back(cmd, s);
  }
  auto* run_all = app.add_subcommand("run-all", "Run every stage in order");
  add_common(run_all, flags);

  // standalone evaluation
  std::string ev_pred, ev_manifest, ev_mode = "component", ev_out;
  CLI::App* evaluate = stage_cmds.back().first;
  evaluate->add_option("--pred-dir", ev_pred, "Directory of <case>_pred.nii.gz");
  evaluate->add_option("--gt-manifest", ev_manifest, "Manifest JSON with label paths");
  evaluate->add_option("--mode", ev_mode, "component|voxelwise")->capture_default_str();
  evaluate->add_option("--out", ev_out, "Report directory");

  // single-case inpainting
  std::string in_ckpt, in_ct, in_pet, in_out;
  double in_threshold = kDefaultPetThresholdSuv, in_radius = kDefaultHoleRadiusPx;
  auto* inpaint_cmd = app.add_subcommand("inpaint", "Compute residual priors for one case");
  inpaint_cmd->add_option("--checkpoint", in_ckpt, "Inpainter checkpoint")->required();
  inpaint_cmd->add_option("--ct", in_ct, "CT volume (HU)")->required();
  inpaint_cmd->add_option("--pet", in_pet, "PET volume (SUV)")->required();
  inpaint_cmd->add_option("--out-dir", in_out, "Output directory")->required();
  inpaint_cmd->add_option("--pet-threshold", in_threshold, "Candidate threshold (SUV)")->capture_default_str();
  inpaint_cmd->add_option("--radius", in_radius, "Hole radius (px)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) emit_error("usage", e.what());
    return app.exit(e, std::cout, std::cerr);
  }

  try {
    if (phantom->parsed()) {
      PhantomSpec spec;
      spec.grid_size = {ph_size, ph_size, ph_size};
      if (ph_cases > 0) {
        const auto ids = write_phantom_dataset(ph_out, ph_cases, ph_seed, spec);
        std::cout << json{{"cases", ids}, {"dir", ph_out}}.dump() << '\n';
      } else {
        spec.seed = ph_seed;
        const Phantom p = generate_phantom(spec);
        std::filesystem::create_directories(ph_out);
        const std::filesystem::path out(ph_out);
        save_volume(p.ct, out / (ph_id + "_ct.nii.gz"));
        save_volume(p.pet, out / (ph_id + "_pet.nii.gz"));
        save_volume(p.label, out / (ph_id + "_label.nii.gz"));
        std::cout << json{{"case", ph_id}, {"dir", ph_out}}.dump() << '\n';
      }
      return 0;
    }
    if (inpaint_cmd->parsed()) {
      auto model = inpaint::InpaintModel::load(in_ckpt);
      const auto ct = load_volume(in_ct, Modality::kCtHu);
      const auto pet = load_volume(in_pet, Modality::kPetSuv);
      const PriorPair prior = compute_prior(ct, pet, model, {in_threshold, in_radius});
      std::filesystem::create_directories(in_out);
      std::string stem = std::filesystem::path(in_ct).filename().string();
      for (const char* suffix : {".nii.gz", ".nii"}) {
        if (stem.size() > std::strlen(suffix) && stem.ends_with(suffix)) {
          stem.resize(stem.size() - std::strlen(suffix));
          break;
        }
      }
      if (stem.ends_with("_ct")) stem.resize(stem.size() - 3);
      const std::filesystem::path out(in_out);
      save_volume(prior.residual_ct, out / (stem + "_res_ct.nii.gz"));
      save_volume(prior.residual_pet, out / (stem + "_res_pet.nii.gz"));
      std::cout << json{{"case", stem}, {"forward_passes", model.forward_count()}}.dump() << '\n';
      return 0;
    }
    if (evaluate->parsed() && !ev_pred.empty()) {
      if (ev_manifest.empty() || ev_out.empty()) {
        emit_error("usage", "--pred-dir needs --gt-manifest and --out");
        return 2;
      }
      const auto report = pipeline::evaluate_predictions(load_manifest(ev_manifest), ev_pred,
                                                         eval::volume_mode_from_string(ev_mode), ev_out, -1, -1, false,
                                                         flags.workers);
      const auto& pos = report[eval::ReportGroup::kPositive];
      std::cout << json{{"report", (std::filesystem::path(ev_out) / "report.csv").string()},
                        {"positive_dice", pos.dice ? json(*pos.dice) : json()}}
                       .dump()
                << '\n';
      return 0;
    }
    if (run_all->parsed()) {
      return run_stages(flags, {std::begin(pipeline::kAllStages), std::end(pipeline::kAllStages)});
    }
    for (auto& [cmd, stage] : stage_cmds) {
      if (cmd->parsed()) return run_stages(flags, {stage});
    }
  } catch (const pipeline::ConfigError& e) {
    emit_error(std::string(to_string(e.code())), e.what(), {{"errors", e.errors()}});
    return 2;
  } catch (const Error& e) {
    emit_error(std::string(to_string(e.code())), e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 3;
  }
  return 0;
}
