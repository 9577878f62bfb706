#include "petprior/pipeline/pipeline.hpp"

#include <fstream>
#include <future>
#include <set>

#include "petprior/hash.hpp"
#include "petprior/nifti.hpp"
#include "petprior/preprocess.hpp"

namespace petprior::pipeline {
namespace {

constexpr const char* kDoneMarker = ".done";

void write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

std::string split_name(int fold, int val_fold, int test_fold) {
  if (fold == test_fold) return "test";
  if (fold == val_fold) return "val";
  return "train";
}

std::filesystem::path prediction_path(const std::filesystem::path& dir, const std::string& case_id) {
  return dir / (case_id + "_pred.nii.gz");
}

// Runs fn(i) for i in [0, n) on up to `workers` threads, rethrowing the first failure.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> tasks;
  for (int w = 0; w < std::min<int>(workers, static_cast<int>(n)); ++w) {
    tasks.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    }));
  }
  for (auto& t : tasks) t.get();
}

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kTrainInpainter: return "train-inpainter";
    case Stage::kComputePriors: return "compute-priors";
    case Stage::kTrainSeg: return "train-seg";
    case Stage::kPredict: return "predict";
    case Stage::kEvaluate: return "evaluate";
  }
  return {};
}

Stage stage_from_string(std::string_view name) {
  for (Stage s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  fail(ErrorCode::kInvalidArgument, "unknown stage '" + std::string(name) + "'");
}

Pipeline::Pipeline(PipelineConfig config, std::filesystem::path run_dir, PipelineOptions options)
    : config_(std::move(config)), run_dir_(std::move(run_dir)), options_(std::move(options)) {
  std::filesystem::create_directories(run_dir_);
  write_text(run_dir_ / "config.resolved.json", config_.resolved.dump(2) + "\n");
}

std::uint64_t Pipeline::stage_seed(Stage stage) const { return derive_seed(config_.seed, to_string(stage)); }

std::filesystem::path Pipeline::stage_dir(Stage stage) const {
  switch (stage) {
    case Stage::kTrainInpainter: return run_dir_ / "inpainter";
    case Stage::kComputePriors: return run_dir_ / "priors";
    case Stage::kTrainSeg: return run_dir_ / "segmenter";
    case Stage::kPredict: return run_dir_ / "predictions";
    case Stage::kEvaluate: return run_dir_ / "eval";
  }
  return run_dir_;
}

bool Pipeline::done(Stage stage) const { return std::filesystem::exists(stage_dir(stage) / kDoneMarker); }

void Pipeline::mark_done(Stage stage, const std::string& summary) const {
  write_text(stage_dir(stage) / kDoneMarker, nlohmann::json{{"stage", to_string(stage)}, {"summary", summary}}.dump() + "\n");
}

void Pipeline::require_artifact(const std::filesystem::path& path, Stage producer) const {
  require(std::filesystem::exists(path), ErrorCode::kDependency,
          "missing " + path.string() + "; run stage '" + std::string(to_string(producer)) + "' first");
}

void Pipeline::say(const std::string& msg) const {
  if (options_.log) options_.log(msg);
}

std::vector<CaseRecord> Pipeline::manifest() {
  const auto path = run_dir_ / "manifest.json";
  if (std::filesystem::exists(path)) return load_manifest(path);
  std::vector<CaseRecord> cases;
  if (!config_.data.manifest.empty()) {
    cases = load_manifest(config_.data.manifest);
  } else {
    require(!config_.data.data_dir.empty(), ErrorCode::kConfig, "config needs data.manifest or data.data_dir");
    cases = build_manifest(config_.data.data_dir, config_.data.n_folds);
  }
  save_manifest(cases, path);
  return cases;
}

StageResult Pipeline::run(Stage stage) {
  StageResult result{stage, false, {}};
  if (done(stage) && !options_.force) {
    result.skipped = true;
    result.summary = "skipped (already complete; use --force to rerun)";
    say(std::string(to_string(stage)) + ": " + result.summary);
    return result;
  }
  say(std::string(to_string(stage)) + ": running");
  std::filesystem::remove(stage_dir(stage) / kDoneMarker);
  switch (stage) {
    case Stage::kTrainInpainter: result.summary = train_inpainter(); break;
    case Stage::kComputePriors: result.summary = compute_priors(); break;
    case Stage::kTrainSeg: result.summary = train_seg(); break;
    case Stage::kPredict: result.summary = predict(); break;
    case Stage::kEvaluate: result.summary = evaluate(); break;
  }
  mark_done(stage, result.summary);
  say(std::string(to_string(stage)) + ": " + result.summary);
  return result;
}

std::vector<StageResult> Pipeline::run_all() {
  std::vector<StageResult> out;
  for (Stage s : kAllStages) out.push_back(run(s));
  return out;
}

std::string Pipeline::train_inpainter() {
  const auto dir = stage_dir(Stage::kTrainInpainter);
  std::filesystem::create_directories(dir);
  const auto cases = manifest();
  const segment::FoldSplit split = segment::split_folds(cases, config_.data.val_fold, config_.data.test_fold);
  std::vector<inpaint::TrainingSlice> slices;
  for (const auto& rec : split.train) {
    const CaseVolumes v = load_case(rec);
    auto s = inpaint::healthy_training_slices(clip_scale_normalize(v.ct, ClipScaleParams::ct()),
                                              clip_scale_normalize(v.pet, ClipScaleParams::pet()), v.label,
                                              rec.case_id);
    slices.insert(slices.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  inpaint::InpaintTrainConfig cfg = config_.inpaint;
  cfg.seed = stage_seed(Stage::kTrainInpainter);
  auto result = inpaint::train_inpainter(slices, cfg, dir);
  result.model.save(dir / "model.ckpt", {{"train_seed", cfg.seed}});
  inpaint::write_inpaint_log_csv(result.log, dir / "train_log.csv");
  return "trained on " + std::to_string(slices.size()) + " healthy slices, final loss " +
         std::to_string(result.log.back().total);
}

std::string Pipeline::compute_priors() {
  const auto ckpt = stage_dir(Stage::kTrainInpainter) / "model.ckpt";
  require_artifact(ckpt, Stage::kTrainInpainter);
  const auto dir = stage_dir(Stage::kComputePriors);
  if (options_.force) std::filesystem::remove(dir / "prior_cache.json");
  auto model = inpaint::InpaintModel::load(ckpt);
  PriorCacheStats stats;
  const auto updated = precompute_priors(manifest(), dir, model, sha256_file(ckpt), config_.prior, &stats);
  save_manifest(updated, dir / "manifest.json");
  return std::to_string(stats.computed) + " computed, " + std::to_string(stats.reused) + " reused";
}

std::string Pipeline::train_seg() {
  const auto prior_manifest = stage_dir(Stage::kComputePriors) / "manifest.json";
  require_artifact(prior_manifest, Stage::kComputePriors);
  const auto cases = load_manifest(prior_manifest);
  const segment::FoldSplit split = segment::split_folds(cases, config_.data.val_fold, config_.data.test_fold);
  std::vector<segment::SegCase> train, val;
  for (const auto& r : split.train) train.push_back(segment::load_seg_case(r));
  for (const auto& r : split.val) val.push_back(segment::load_seg_case(r));
  segment::SegTrainConfig cfg = config_.segment;
  cfg.seed = stage_seed(Stage::kTrainSeg);
  const auto dir = stage_dir(Stage::kTrainSeg);
  std::filesystem::create_directories(dir);
  segment::SegTrainOptions opts;
  opts.checkpoint_dir = dir;
  auto result = segment::train_segmenter(train, val, cfg, config_.augmentation, opts);
  result.model.save(dir / "model.ckpt", {{"train_seed", cfg.seed}});
  segment::write_seg_log_csv(result.log, dir / "train_log.csv");
  return std::to_string(cfg.epochs) + " epochs on " + std::to_string(train.size()) + " cases, final loss " +
         std::to_string(result.log.back().train_loss);
}

std::string Pipeline::predict() {
  const auto ckpt = stage_dir(Stage::kTrainSeg) / "model.ckpt";
  require_artifact(ckpt, Stage::kTrainSeg);
  const auto prior_manifest = stage_dir(Stage::kComputePriors) / "manifest.json";
  require_artifact(prior_manifest, Stage::kComputePriors);
  const auto cases = load_manifest(prior_manifest);
  auto model = segment::SegModel::load(ckpt);
  const auto dir = stage_dir(Stage::kPredict);
  std::filesystem::create_directories(dir);
  for (const auto& rec : cases) {
    const auto input = segment::build_seg_input(rec);
    save_volume(segment::predict_mask(model, input), prediction_path(dir, rec.case_id));
  }
  return std::to_string(cases.size()) + " masks written";
}

std::string Pipeline::evaluate() {
  const auto pred_dir = stage_dir(Stage::kPredict);
  require_artifact(pred_dir / kDoneMarker, Stage::kPredict);
  const auto report = evaluate_predictions(manifest(), pred_dir, config_.eval_mode, stage_dir(Stage::kEvaluate),
                                           config_.data.val_fold, config_.data.test_fold,
                                           config_.eval_split == EvalSplit::kTest, options_.workers);
  const auto& pos = report[eval::ReportGroup::kPositive];
  return "report written, positive Dice " + (pos.dice ? std::to_string(*pos.dice) : std::string("n/a"));
}

eval::ClasswiseReport evaluate_predictions(const std::vector<CaseRecord>& manifest,
                                           const std::filesystem::path& pred_dir, eval::VolumeMode mode,
                                           const std::filesystem::path& out_dir, int val_fold, int test_fold,
                                           bool test_only, int workers) {
  require(!manifest.empty(), ErrorCode::kEmptyInput, "manifest has no cases to evaluate");
  std::vector<eval::EvalRecord> records(manifest.size());
  parallel_for(manifest.size(), workers, [&](std::size_t i) {
    const CaseRecord& rec = manifest[i];
    const auto pred_path = prediction_path(pred_dir, rec.case_id);
    require(std::filesystem::exists(pred_path), ErrorCode::kMissingFile,
            "no prediction for case " + rec.case_id + " (" + pred_path.string() + ")");
    const Volume3D pred = load_volume(pred_path, Modality::kLabel);
    const Volume3D gt = load_volume(rec.label_path, Modality::kLabel);
    records[i] = eval::evaluate_case(rec.case_id, rec.tumor_class, rec.fold, pred, gt, mode);
    records[i].split = split_name(rec.fold, val_fold, test_fold);
  });
  std::vector<eval::EvalRecord> reported;
  for (const auto& r : records) {
    if (!test_only || r.split == "test") reported.push_back(r);
  }
  if (reported.empty()) reported = records;
  const auto report = eval::aggregate(reported, mode);
  eval::emit_report(report, records, out_dir);
  eval::write_dice_plot(reported, out_dir / "dice_distribution.png");
  return report;
}

}  // namespace petprior::pipeline
