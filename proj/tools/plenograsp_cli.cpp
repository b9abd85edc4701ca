#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

#include "plenograsp/errors.hpp"
#include "plenograsp/pipeline.hpp"
#include "plenograsp/png_io.hpp"
#include "plenograsp/threading.hpp"

namespace pg = plenograsp;
using nlohmann::json;

namespace {

class StageTimer {
 public:
  explicit StageTimer(std::string name)
      : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto elapsed = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start_);
    std::cout << "[timing] " << name_ << " " << elapsed.count() << "s\n";
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  int workers = -1;
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path, "Pipeline configuration JSON");
  cmd->add_option("--set", opts->overrides,
                  "Override a config field, e.g. --set search.iterations=50");
  cmd->add_option("--workers", opts->workers, "Worker thread count (0 = hardware)");
}

pg::PipelineConfig resolve_config(const CommonOpts& opts) {
  std::string text;
  if (!opts.config_path.empty()) {
    std::ifstream f(opts.config_path);
    if (!f) throw pg::ValidationError("config file not found: " + opts.config_path);
    text.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  } else {
    text = pg::config_to_json(pg::PipelineConfig{});
  }
  for (const auto& ov : opts.overrides) text = pg::apply_override(text, ov);
  pg::PipelineConfig cfg = pg::config_from_json(text);
  if (opts.workers >= 0) {
    cfg.workers = opts.workers;
    cfg.search.workers = opts.workers;
  }
  return cfg;
}

int run_synth_scene(const CommonOpts& common, const std::string& scene_path,
                    const std::string& out_dir) {
  const pg::PipelineConfig cfg = resolve_config(common);
  const pg::SceneDescription scene = pg::load_scene(scene_path);
  StageTimer timer("synth-scene");
  const pg::ObservationSet set = pg::capture_scene(scene, cfg);
  std::filesystem::create_directories(out_dir);
  pg::save_observation_set(set, std::filesystem::path(out_dir) / "manifest.json",
                           pg::config_hash(cfg));
  std::cout << "wrote " << set.observations.size() << " views to " << out_dir << "\n";
  return 0;
}

int run_build_dlv(const CommonOpts& common, const std::string& manifest, const std::string& out) {
  const pg::PipelineConfig cfg = resolve_config(common);
  const pg::ObservationSet set = pg::load_observation_set(manifest);
  StageTimer timer("build-dlv");
  const pg::DepthLikelihoodVolume dlv =
      pg::build_dlv(set, cfg.volume, cfg.make_hypotheses(), cfg.patch, cfg.workers);
  pg::save_dlv(dlv, out, pg::config_hash(cfg));
  std::cout << "built " << cfg.volume.resolution.x() << "x" << cfg.volume.resolution.y() << "x"
            << cfg.volume.resolution.z() << " volume from " << set.observations.size()
            << " views\n";
  return 0;
}

int run_suppress(const CommonOpts& common, const std::string& manifest, const std::string& in,
                 const std::string& out) {
  const pg::PipelineConfig cfg = resolve_config(common);
  const pg::ObservationSet set = pg::load_observation_set(manifest);
  const pg::DepthLikelihoodVolume dlv = pg::load_dlv(in);
  StageTimer timer("suppress");
  const pg::DepthLikelihoodVolume cleaned = pg::suppress_reflections(
      dlv, set, cfg.make_hypotheses(), cfg.patch, cfg.suppression, cfg.workers);
  pg::save_dlv(cleaned, out, pg::config_hash(cfg));
  double before = 0.0, after = 0.0;
  for (const double v : dlv.values) before += v;
  for (const double v : cleaned.values) after += v;
  std::cout << "total likelihood " << before << " -> " << after << "\n";
  return 0;
}

int run_render_slice(const std::string& in, int z_index, const std::string& out) {
  const pg::DepthLikelihoodVolume dlv = pg::load_dlv(in);
  StageTimer timer("render-slice");
  pg::write_png(out, pg::dlv_slice(dlv, z_index));
  std::cout << "wrote slice z=" << z_index << " to " << out << "\n";
  return 0;
}

int run_sample_grasps(const CommonOpts& common, int n, uint64_t seed, const std::string& scene_path,
                      int proposals, const std::string& out) {
  const pg::PipelineConfig cfg = resolve_config(common);
  StageTimer timer("sample-grasps");
  std::vector<pg::GraspCandidate> candidates = pg::sample_candidates(cfg.volume, n, seed);
  if (!scene_path.empty() && proposals > 0) {
    const pg::SceneDescription scene = pg::load_scene(scene_path);
    const auto extra = pg::scene_grasp_proposals(scene, cfg.gripper, proposals, seed ^ 0x5151u);
    candidates.insert(candidates.end(), extra.begin(), extra.end());
  }
  pg::save_candidates(candidates, out, pg::config_hash(cfg));
  std::cout << "sampled " << candidates.size() << " candidates\n";
  return 0;
}

int run_oracle_label(const CommonOpts& common, const std::string& scene_path,
                     const std::string& candidates_path, const std::string& mode,
                     const std::string& out) {
  const pg::PipelineConfig cfg = resolve_config(common);
  const pg::SceneDescription scene = pg::load_scene(scene_path);
  std::vector<pg::GraspCandidate> candidates = pg::load_candidates(candidates_path);
  StageTimer timer("oracle-label");
  int positive = 0;
  for (auto& cand : candidates) {
    const pg::OracleGraspReport report = pg::oracle_grasp_label(cand, cfg.gripper, scene);
    const bool label = mode == "collision"
                           ? report.reason != pg::OracleGraspReport::Reason::collision
                           : report.graspable;
    cand.graspable_label = label;
    positive += label;
  }
  pg::save_candidates(candidates, out, pg::config_hash(cfg));
  std::cout << positive << "/" << candidates.size() << " labeled graspable (" << mode << ")\n";
  return 0;
}

int run_extract_features(const CommonOpts& common, const std::string& dlv_path,
                         const std::string& candidates_path, const std::string& out_dir) {
  const pg::PipelineConfig cfg = resolve_config(common);
  const pg::DepthLikelihoodVolume dlv = pg::load_dlv(dlv_path);
  const std::vector<pg::GraspCandidate> candidates = pg::load_candidates(candidates_path);
  StageTimer timer("extract-features");
  std::vector<pg::LabeledExample> examples;
  std::vector<pg::GraspCandidate> kept;
  int skipped = 0;
  for (const auto& cand : candidates) {
    if (pg::outside_fraction(dlv, cand, cfg.gripper, cfg.features.density) >
        cfg.search.prune_outside_fraction) {
      ++skipped;
      continue;
    }
    pg::LabeledExample ex;
    ex.tensor = pg::assemble_tensor(pg::voxelize_grasp(dlv, cand, cfg.gripper,
                                                       cfg.features.density),
                                    cfg.features.tensor_size);
    ex.label = cand.graspable_label.value_or(false) ? 1 : 0;
    ex.source = cand.graspable_label ? pg::LabeledExample::Source::oracle_force_closure
                                     : pg::LabeledExample::Source::external;
    examples.push_back(std::move(ex));
    kept.push_back(cand);
  }
  pg::save_dataset(examples, kept, out_dir, pg::config_hash(cfg));
  std::cout << "wrote " << examples.size() << " tensors (" << skipped
            << " pruned as mostly outside)\n";
  return 0;
}

int run_train(const CommonOpts& common, const std::string& dataset_dir, const std::string& out,
              const std::string& log_path) {
  const pg::PipelineConfig cfg = resolve_config(common);
  const std::vector<pg::LabeledExample> dataset = pg::load_dataset(dataset_dir);
  StageTimer timer("train");
  std::vector<pg::EpochLog> log;
  if (cfg.classifier.kind == "logistic") {
    pg::LogisticClassifier model = pg::LogisticClassifier::train(dataset, cfg.classifier.train, &log);
    model.save(out, pg::config_hash(cfg));
  } else {
    pg::ConvNetClassifier::Arch arch = cfg.classifier.arch;
    arch.input_size = dataset.front().tensor.size;
    pg::ConvNetClassifier model =
        pg::ConvNetClassifier::train(dataset, cfg.classifier.train, arch, &log);
    model.save(out, pg::config_hash(cfg));
    std::cout << "final train accuracy " << model.final_train_accuracy() << "\n";
  }
  if (!log_path.empty()) {
    std::ofstream f(log_path);
    for (const auto& entry : log) {
      f << json{{"epoch", entry.epoch}, {"loss", entry.loss}, {"accuracy", entry.accuracy}}.dump()
        << "\n";
    }
  }
  return 0;
}

int run_classify(const std::string& model_path, const std::string& tensor_path) {
  const auto model = pg::load_classifier(model_path);
  const pg::FeatureTensor tensor = pg::load_tensor(tensor_path);
  const pg::Classification result = model->classify(tensor);
  std::cout << json{{"label", result.graspable ? "graspable" : "not_graspable"},
                    {"confidence", result.confidence}}
                   .dump()
            << "\n";
  return 0;
}

int run_search_cmd(const CommonOpts& common, const std::string& dlv_path,
                   const std::string& model_path, uint64_t seed, const std::string& out) {
  const pg::PipelineConfig cfg = resolve_config(common);
  const pg::DepthLikelihoodVolume dlv = pg::load_dlv(dlv_path);
  const auto model = pg::load_classifier(model_path);
  StageTimer timer("search");
  pg::VolumeSpec workspace = dlv.spec;
  const auto results = pg::run_search(dlv, cfg.gripper, *model, workspace, cfg.search, seed);
  pg::save_candidates(results, out, pg::config_hash(cfg));
  const int shown = std::min<int>(cfg.top_k, int(results.size()));
  for (int i = 0; i < shown; ++i) {
    const auto& c = results[size_t(i)];
    const pg::Vec3 t = c.pose.translation();
    std::cout << "grasp[" << i << "] confidence=" << c.confidence << " position=(" << t.x() << ", "
              << t.y() << ", " << t.z() << ")\n";
  }
  return 0;
}

int run_verify(const CommonOpts& common, const std::string& manifest, int grid, int trials,
               double tolerance) {
  const pg::PipelineConfig cfg = resolve_config(common);
  const pg::ObservationSet set = pg::load_observation_set(manifest);
  const pg::DepthHypothesisSet hyps = cfg.make_hypotheses();
  StageTimer timer("verify");
  pg::Rng rng(cfg.seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    pg::VolumeSpec sub;
    sub.resolution = pg::Vec3i(grid, grid, grid);
    sub.extent = cfg.volume.extent * 0.3;
    for (int a = 0; a < 3; ++a) {
      sub.origin[a] = cfg.volume.origin[a] + rng.uniform() * (cfg.volume.extent[a] - sub.extent[a]);
    }
    const pg::DepthLikelihoodVolume dlv = pg::build_dlv(set, sub, hyps, cfg.patch, cfg.workers);
    for (int iz = 0; iz < grid; ++iz) {
      for (int iy = 0; iy < grid; ++iy) {
        for (int ix = 0; ix < grid; ++ix) {
          const double reference =
              pg::brute_force_likelihood(sub.voxel_center(ix, iy, iz), set, hyps, cfg.patch);
          worst = std::max(worst, std::abs(reference - dlv.at(ix, iy, iz)));
        }
      }
    }
  }
  const bool pass = worst <= tolerance;
  std::cout << "max_abs_diff=" << worst << (pass ? " PASS" : " FAIL") << "\n";
  return pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plenoptic grasp detection pipeline"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string scene_path, out_path, manifest_path, dlv_path, model_path, candidates_path,
      dataset_dir, tensor_path, log_path, mode = "force_closure";
  int n = 1000, z_index = 0, grid = 5, trials = 3, proposals = 0;
  uint64_t seed = 7;
  double tolerance = 1e-6;

  auto* synth = app.add_subcommand("synth-scene", "Render a synthetic observation bundle");
  add_common(synth, &common);
  synth->add_option("--scene", scene_path, "Scene description JSON")->required();
  synth->add_option("--out", out_path, "Output directory")->required();

  auto* build = app.add_subcommand("build-dlv", "Construct the depth likelihood volume");
  add_common(build, &common);
  build->add_option("--manifest", manifest_path)->required();
  build->add_option("--out", out_path)->required();

  auto* suppress = app.add_subcommand("suppress", "Suppress specular reflection evidence");
  add_common(suppress, &common);
  suppress->add_option("--manifest", manifest_path)->required();
  suppress->add_option("--dlv", dlv_path)->required();
  suppress->add_option("--out", out_path)->required();

  auto* slice = app.add_subcommand("render-slice", "Export a grayscale volume slice");
  slice->add_option("--dlv", dlv_path)->required();
  slice->add_option("--z", z_index)->required();
  slice->add_option("--out", out_path)->required();

  auto* sample = app.add_subcommand("sample-grasps", "Sample grasp candidates");
  add_common(sample, &common);
  sample->add_option("--n", n);
  sample->add_option("--seed", seed);
  sample->add_option("--scene", scene_path, "Optional scene for object-local proposals");
  sample->add_option("--proposals", proposals, "Proposals per object");
  sample->add_option("--out", out_path)->required();

  auto* label = app.add_subcommand("oracle-label", "Label candidates with the scene oracle");
  add_common(label, &common);
  label->add_option("--scene", scene_path)->required();
  label->add_option("--candidates", candidates_path)->required();
  label->add_option("--mode", mode, "force_closure or collision");
  label->add_option("--out", out_path)->required();

  auto* extract = app.add_subcommand("extract-features", "Voxelize candidates into tensors");
  add_common(extract, &common);
  extract->add_option("--dlv", dlv_path)->required();
  extract->add_option("--candidates", candidates_path)->required();
  extract->add_option("--out", out_path)->required();

  auto* train = app.add_subcommand("train", "Train the grasp classifier");
  add_common(train, &common);
  train->add_option("--dataset", dataset_dir)->required();
  train->add_option("--out", out_path)->required();
  train->add_option("--log", log_path, "Line-delimited epoch log");

  auto* classify = app.add_subcommand("classify", "Classify a single feature tensor");
  classify->add_option("--model", model_path)->required();
  classify->add_option("--tensor", tensor_path)->required();

  auto* search = app.add_subcommand("search", "Particle search for grasp poses");
  add_common(search, &common);
  search->add_option("--dlv", dlv_path)->required();
  search->add_option("--model", model_path)->required();
  search->add_option("--seed", seed);
  search->add_option("--out", out_path)->required();

  auto* verify = app.add_subcommand("verify", "Compare the engine against the reference oracle");
  add_common(verify, &common);
  verify->add_option("--manifest", manifest_path)->required();
  verify->add_option("--grid", grid, "Sub-volume resolution per axis");
  verify->add_option("--trials", trials, "Number of random sub-volumes");
  verify->add_option("--tolerance", tolerance);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth_scene(common, scene_path, out_path);
    if (build->parsed()) return run_build_dlv(common, manifest_path, out_path);
    if (suppress->parsed()) return run_suppress(common, manifest_path, dlv_path, out_path);
    if (slice->parsed()) return run_render_slice(dlv_path, z_index, out_path);
    if (sample->parsed()) {
      return run_sample_grasps(common, n, seed, scene_path, proposals, out_path);
    }
    if (label->parsed()) {
      return run_oracle_label(common, scene_path, candidates_path, mode, out_path);
    }
    if (extract->parsed()) {
      return run_extract_features(common, dlv_path, candidates_path, out_path);
    }
    if (train->parsed()) return run_train(common, dataset_dir, out_path, log_path);
    if (classify->parsed()) return run_classify(model_path, tensor_path);
    if (search->parsed()) return run_search_cmd(common, dlv_path, model_path, seed, out_path);
    if (verify->parsed()) return run_verify(common, manifest_path, grid, trials, tolerance);
  } catch (const pg::ValidationError& e) {
    std::cerr << json{{"error", "validation"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const pg::ComputeError& e) {
    std::cerr << json{{"error", "compute"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "compute"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }
  return 0;
}
