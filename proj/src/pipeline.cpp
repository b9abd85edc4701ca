#include "plenograsp/pipeline.hpp"

#include <json.hpp>

#include <fstream>

#include "plenograsp/errors.hpp"

namespace plenograsp {

using nlohmann::json;

CameraIntrinsics PipelineConfig::intrinsics() const {
  CameraIntrinsics intr;
  intr.image_size = capture.image_size;
  intr.focal_length_px = capture.focal_length_px;
  intr.principal_point = Vec2((capture.image_size.x() - 1) * 0.5,
                              (capture.image_size.y() - 1) * 0.5);
  intr.aperture_baseline = capture.aperture_baseline;
  return intr;
}

DepthHypothesisSet PipelineConfig::make_hypotheses() const {
  return DepthHypothesisSet::uniform_inverse_depth(hypotheses.near, hypotheses.far,
                                                   hypotheses.count);
}

std::vector<Pose> PipelineConfig::camera_poses() const {
  return ring_poses(capture.target, capture.ring_radius, capture.ring_height, capture.view_count,
                    capture.start_angle);
}

void PipelineConfig::validate() const {
  patch.validate();
  make_hypotheses();
  volume.validate();
  suppression.validate();
  gripper.validate();
  search.diffusion.validate();
  intrinsics().validate();
  if (features.density.x() < 1 || features.density.y() < 1 || features.density.z() < 1) {
    throw ValidationError("config: feature density must be positive");
  }
  if (features.tensor_size < 1) throw ValidationError("config: tensor size must be positive");
  if (capture.view_count < 1) throw ValidationError("config: need at least one capture view");
  if (capture.crop_margin < 0) throw ValidationError("config: negative crop margin");
  if (capture.grid_extent.x() % 2 == 0 || capture.grid_extent.y() % 2 == 0 ||
      capture.crop_keep.x() % 2 == 0 || capture.crop_keep.y() % 2 == 0) {
    throw ValidationError("config: aperture grid extents must be odd");
  }
}

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec3i_json(const Vec3i& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec2i_json(const Vec2i& v) { return json::array({v.x(), v.y()}); }

Vec3 vec3_from(const json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}
Vec3i vec3i_from(const json& j) {
  return Vec3i(j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>());
}
Vec2i vec2i_from(const json& j) {
  return Vec2i(j.at(0).get<int>(), j.at(1).get<int>());
}

}  // namespace

std::string config_to_json(const PipelineConfig& c) {
  json doc{
      {"workers", c.workers},
      {"seed", c.seed},
      {"patch",
       {{"radius", c.patch.radius},
        {"color_weight", c.patch.color_weight},
        {"gradient_weight", c.patch.gradient_weight}}},
      {"depth_hypotheses",
       {{"near", c.hypotheses.near}, {"far", c.hypotheses.far}, {"count", c.hypotheses.count}}},
      {"volume",
       {{"origin", vec3_json(c.volume.origin)},
        {"extent", vec3_json(c.volume.extent)},
        {"resolution", vec3i_json(c.volume.resolution)}}},
      {"suppression",
       {{"variance_threshold", c.suppression.variance_threshold},
        {"auto_threshold", c.suppression.auto_threshold},
        {"auto_multiplier", c.suppression.auto_multiplier},
        {"saturation_threshold", c.suppression.saturation_threshold},
        {"likelihood_floor", c.suppression.likelihood_floor},
        {"prefix_range_only", c.suppression.prefix_range_only}}},
      {"gripper",
       {{"cuboid_extent", vec3_json(c.gripper.cuboid_extent)},
        {"finger_width", c.gripper.finger_width},
        {"palm_depth", c.gripper.palm_depth}}},
      {"features",
       {{"density", vec3i_json(c.features.density)}, {"tensor_size", c.features.tensor_size}}},
      {"classifier",
       {{"kind", c.classifier.kind},
        {"epochs", c.classifier.train.epochs},
        {"learning_rate", c.classifier.train.learning_rate},
        {"batch_size", c.classifier.train.batch_size},
        {"seed", c.classifier.train.seed},
        {"class_weighted", c.classifier.train.class_weighted},
        {"conv1_filters", c.classifier.arch.conv1_filters},
        {"conv2_filters", c.classifier.arch.conv2_filters},
        {"kernel", c.classifier.arch.kernel},
        {"pool", c.classifier.arch.pool},
        {"dense", c.classifier.arch.dense}}},
      {"search",
       {{"translation_variance", c.search.diffusion.translation_variance},
        {"rotation_variance", c.search.diffusion.rotation_variance},
        {"iterations", c.search.diffusion.iterations},
        {"particle_count", c.search.diffusion.particle_count},
        {"prune_outside_fraction", c.search.prune_outside_fraction},
        {"dedup_translation", c.search.dedup_translation},
        {"dedup_rotation", c.search.dedup_rotation},
        {"top_k", c.top_k}}},
      {"capture",
       {{"image_size", vec2i_json(c.capture.image_size)},
        {"focal_length_px", c.capture.focal_length_px},
        {"aperture_baseline", c.capture.aperture_baseline},
        {"grid_extent", vec2i_json(c.capture.grid_extent)},
        {"crop_keep", vec2i_json(c.capture.crop_keep)},
        {"crop_margin", c.capture.crop_margin},
        {"target", vec3_json(c.capture.target)},
        {"ring_radius", c.capture.ring_radius},
        {"ring_height", c.capture.ring_height},
        {"view_count", c.capture.view_count},
        {"start_angle", c.capture.start_angle}}}};
  return doc.dump(2);
}

PipelineConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError("config parse error: " + std::string(e.what()));
  }
  PipelineConfig c;
  try {
    c.workers = doc.value("workers", c.workers);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("patch")) {
      const auto& j = doc["patch"];
      c.patch.radius = j.value("radius", c.patch.radius);
      c.patch.color_weight = j.value("color_weight", c.patch.color_weight);
      c.patch.gradient_weight = j.value("gradient_weight", c.patch.gradient_weight);
    }
    if (doc.contains("depth_hypotheses")) {
      const auto& j = doc["depth_hypotheses"];
      c.hypotheses.near = j.value("near", c.hypotheses.near);
      c.hypotheses.far = j.value("far", c.hypotheses.far);
      c.hypotheses.count = j.value("count", c.hypotheses.count);
    }
    if (doc.contains("volume")) {
      const auto& j = doc["volume"];
      if (j.contains("origin")) c.volume.origin = vec3_from(j["origin"]);
      if (j.contains("extent")) c.volume.extent = vec3_from(j["extent"]);
      if (j.contains("resolution")) c.volume.resolution = vec3i_from(j["resolution"]);
    }
    if (doc.contains("suppression")) {
      const auto& j = doc["suppression"];
      c.suppression.variance_threshold =
          j.value("variance_threshold", c.suppression.variance_threshold);
      c.suppression.auto_threshold = j.value("auto_threshold", c.suppression.auto_threshold);
      c.suppression.auto_multiplier = j.value("auto_multiplier", c.suppression.auto_multiplier);
      c.suppression.saturation_threshold =
          j.value("saturation_threshold", c.suppression.saturation_threshold);
      c.suppression.likelihood_floor = j.value("likelihood_floor", c.suppression.likelihood_floor);
      c.suppression.prefix_range_only =
          j.value("prefix_range_only", c.suppression.prefix_range_only);
    }
    if (doc.contains("gripper")) {
      const auto& j = doc["gripper"];
      if (j.contains("cuboid_extent")) c.gripper.cuboid_extent = vec3_from(j["cuboid_extent"]);
      c.gripper.finger_width = j.value("finger_width", c.gripper.finger_width);
      c.gripper.palm_depth = j.value("palm_depth", c.gripper.palm_depth);
    }
    if (doc.contains("features")) {
      const auto& j = doc["features"];
      if (j.contains("density")) c.features.density = vec3i_from(j["density"]);
      c.features.tensor_size = j.value("tensor_size", c.features.tensor_size);
    }
    if (doc.contains("classifier")) {
      const auto& j = doc["classifier"];
      c.classifier.kind = j.value("kind", c.classifier.kind);
      c.classifier.train.epochs = j.value("epochs", c.classifier.train.epochs);
      c.classifier.train.learning_rate = j.value("learning_rate", c.classifier.train.learning_rate);
      c.classifier.train.batch_size = j.value("batch_size", c.classifier.train.batch_size);
      c.classifier.train.seed = j.value("seed", c.classifier.train.seed);
      c.classifier.train.class_weighted =
          j.value("class_weighted", c.classifier.train.class_weighted);
      c.classifier.arch.conv1_filters = j.value("conv1_filters", c.classifier.arch.conv1_filters);
      c.classifier.arch.conv2_filters = j.value("conv2_filters", c.classifier.arch.conv2_filters);
      c.classifier.arch.kernel = j.value("kernel", c.classifier.arch.kernel);
      c.classifier.arch.pool = j.value("pool", c.classifier.arch.pool);
      c.classifier.arch.dense = j.value("dense", c.classifier.arch.dense);
    }
    if (doc.contains("search")) {
      const auto& j = doc["search"];
      c.search.diffusion.translation_variance =
          j.value("translation_variance", c.search.diffusion.translation_variance);
      c.search.diffusion.rotation_variance =
          j.value("rotation_variance", c.search.diffusion.rotation_variance);
      c.search.diffusion.iterations = j.value("iterations", c.search.diffusion.iterations);
      c.search.diffusion.particle_count =
          j.value("particle_count", c.search.diffusion.particle_count);
      c.search.prune_outside_fraction =
          j.value("prune_outside_fraction", c.search.prune_outside_fraction);
      c.search.dedup_translation = j.value("dedup_translation", c.search.dedup_translation);
      c.search.dedup_rotation = j.value("dedup_rotation", c.search.dedup_rotation);
      c.top_k = j.value("top_k", c.top_k);
    }
    if (doc.contains("capture")) {
      const auto& j = doc["capture"];
      if (j.contains("image_size")) c.capture.image_size = vec2i_from(j["image_size"]);
      c.capture.focal_length_px = j.value("focal_length_px", c.capture.focal_length_px);
      c.capture.aperture_baseline = j.value("aperture_baseline", c.capture.aperture_baseline);
      if (j.contains("grid_extent")) c.capture.grid_extent = vec2i_from(j["grid_extent"]);
      if (j.contains("crop_keep")) c.capture.crop_keep = vec2i_from(j["crop_keep"]);
      c.capture.crop_margin = j.value("crop_margin", c.capture.crop_margin);
      if (j.contains("target")) c.capture.target = vec3_from(j["target"]);
      c.capture.ring_radius = j.value("ring_radius", c.capture.ring_radius);
      c.capture.ring_height = j.value("ring_height", c.capture.ring_height);
      c.capture.view_count = j.value("view_count", c.capture.view_count);
      c.capture.start_angle = j.value("start_angle", c.capture.start_angle);
    }
  } catch (const json::exception& e) {
    throw ValidationError("config field error: " + std::string(e.what()));
  }
  // Search feature settings mirror the feature section.
  c.search.feature_density = c.features.density;
  c.search.tensor_size = c.features.tensor_size;
  c.search.workers = c.workers;
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("config file not found: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return config_from_json(text);
}

uint64_t config_hash(const PipelineConfig& cfg) {
  const std::string text = config_to_json(cfg);
  uint64_t h = 0xcbf29ce484222325ull;
  for (const char ch : text) {
    h ^= uint8_t(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string apply_override(const std::string& config_json, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ValidationError("override must look like section.key=value: " + assignment);
  }
  std::string path = "/" + assignment.substr(0, eq);
  for (auto& ch : path) {
    if (ch == '.') ch = '/';
  }
  const std::string value = assignment.substr(eq + 1);
  json doc = json::parse(config_json);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // plain string value
  }
  doc[json::json_pointer(path)] = parsed;
  return doc.dump();
}

ObservationSet capture_scene(const SceneDescription& scene, const PipelineConfig& cfg) {
  cfg.validate();
  ObservationSet rendered = render_observation_set(scene, cfg.camera_poses(), cfg.intrinsics(),
                                                   cfg.capture.grid_extent.x(),
                                                   cfg.capture.grid_extent.y());
  const bool needs_crop = cfg.capture.crop_keep != cfg.capture.grid_extent ||
                          cfg.capture.crop_margin > 0;
  if (!needs_crop) return rendered;
  ObservationSet cropped;
  cropped.intrinsics = rendered.intrinsics;
  cropped.intrinsics.image_size =
      Vec2i(rendered.intrinsics.image_size.x() - 2 * cfg.capture.crop_margin,
            rendered.intrinsics.image_size.y() - 2 * cfg.capture.crop_margin);
  cropped.intrinsics.principal_point =
      rendered.intrinsics.principal_point -
      Vec2(cfg.capture.crop_margin, cfg.capture.crop_margin);
  for (auto& obs : rendered.observations) {
    Observation c;
    c.id = obs.id;
    c.pose = obs.pose;
    c.grid = crop_grid(obs.grid, cfg.capture.crop_keep.x(), cfg.capture.crop_keep.y(),
                       cfg.capture.crop_margin);
    cropped.observations.push_back(std::move(c));
  }
  cropped.validate();
  return cropped;
}

std::pair<std::vector<LabeledExample>, std::vector<GraspCandidate>> build_oracle_dataset(
    const SceneDescription& scene, const DepthLikelihoodVolume& dlv, const PipelineConfig& cfg,
    int proposals_per_object, int hard_per_object, int uniform_count, uint64_t seed,
    LabelMode mode) {
  std::vector<GraspCandidate> candidates =
      scene_grasp_proposals(scene, cfg.gripper, proposals_per_object, seed);
  if (hard_per_object > 0) {
    // Jitter straddling the oracle's antipodal cone and clearance margins.
    ProposalJitter hard;
    hard.position_sigma = 0.008;
    hard.rotation_sigma = 0.12;
    const auto tier =
        scene_grasp_proposals(scene, cfg.gripper, hard_per_object, seed ^ 0x77u, hard);
    candidates.insert(candidates.end(), tier.begin(), tier.end());

    // Near-miss ring: arbitrary orientations in the annulus around each
    // object, down to table level, where almost every pose fails the oracle.
    // Densifies the negative side of the decision boundary the search probes
    // hardest.
    Rng ring_rng(seed ^ 0xA5A5u);
    for (const auto& prim : scene.surfaces) {
      if (prim.kind != Primitive::Kind::cylinder) continue;
      for (int i = 0; i < hard_per_object; ++i) {
        const double angle = ring_rng.uniform(0.0, 2.0 * M_PI);
        const double radius = ring_rng.uniform(prim.radius + 0.01, 0.16);
        const double height = ring_rng.uniform(0.0, 0.2);
        const Vec3 pos(prim.base_center.x() + radius * std::cos(angle),
                       prim.base_center.y() + radius * std::sin(angle),
                       prim.base_center.z() + height);
        GraspCandidate c;
        c.pose = make_pose(random_rotation(ring_rng).toRotationMatrix(), pos);
        candidates.push_back(c);
      }
    }
  }
  if (uniform_count > 0) {
    const auto uniform = sample_candidates(cfg.volume, uniform_count, seed ^ 0x9e37u);
    candidates.insert(candidates.end(), uniform.begin(), uniform.end());
  }

  std::vector<LabeledExample> examples;
  std::vector<GraspCandidate> kept;
  for (const auto& cand : candidates) {
    if (outside_fraction(dlv, cand, cfg.gripper, cfg.features.density) >
        cfg.search.prune_outside_fraction) {
      continue;
    }
    GraspVolume volume;
    try {
      volume = voxelize_grasp(dlv, cand, cfg.gripper, cfg.features.density);
    } catch (const ComputeError&) {
      continue;
    }
    const OracleGraspReport report = oracle_grasp_label(cand, cfg.gripper, scene);
    LabeledExample ex;
    ex.tensor = assemble_tensor(volume, cfg.features.tensor_size);
    if (mode == LabelMode::force_closure) {
      ex.label = report.graspable ? 1 : 0;
      ex.source = LabeledExample::Source::oracle_force_closure;
    } else {
      ex.label = report.reason != OracleGraspReport::Reason::collision ? 1 : 0;
      ex.source = LabeledExample::Source::oracle_collision;
    }
    GraspCandidate labeled = cand;
    labeled.graspable_label = ex.label == 1;
    examples.push_back(std::move(ex));
    kept.push_back(labeled);
  }
  return {std::move(examples), std::move(kept)};
}

ConvNetClassifier train_grasp_classifier(const SceneDescription& scene,
                                         const DepthLikelihoodVolume& dlv,
                                         const PipelineConfig& cfg, int proposals_per_object,
                                         int hard_per_object, int uniform_count, uint64_t seed,
                                         int mining_rounds,
                                         std::vector<LabeledExample>* dataset_out) {
  auto [dataset, candidates] = build_oracle_dataset(scene, dlv, cfg, proposals_per_object,
                                                    hard_per_object, uniform_count, seed);

  ConvNetClassifier::Arch arch = cfg.classifier.arch;
  arch.input_size = cfg.features.tensor_size;

  // Cheaper intermediate trains during mining; full training budget at the end.
  TrainConfig mining_train = cfg.classifier.train;
  mining_train.epochs = std::max(4, cfg.classifier.train.epochs / 2);
  ConvNetClassifier model =
      ConvNetClassifier::train(dataset, mining_rounds > 0 ? mining_train : cfg.classifier.train,
                               arch);

  // Mining explores with the deployment search's geometry but a lighter
  // particle budget.
  SearchConfig mining_search = cfg.search;
  mining_search.diffusion.particle_count = 100;
  mining_search.diffusion.iterations = 30;
  for (int round = 0; round < mining_rounds; ++round) {
    for (uint64_t ms = 0; ms < 3; ++ms) {
      const uint64_t mining_seed = 1000 + uint64_t(round) * 17 + ms * 131 + seed;
      const auto found = run_search(dlv, cfg.gripper, model, cfg.volume, mining_search,
                                    mining_seed);
      const size_t take = std::min<size_t>(25, found.size());
      for (size_t i = 0; i < take; ++i) {
        GraspVolume volume;
        try {
          volume = voxelize_grasp(dlv, found[i], cfg.gripper, cfg.features.density);
        } catch (const ComputeError&) {
          continue;
        }
        const OracleGraspReport report = oracle_grasp_label(found[i], cfg.gripper, scene);
        LabeledExample ex;
        ex.tensor = assemble_tensor(volume, cfg.features.tensor_size);
        ex.label = report.graspable ? 1 : 0;
        ex.source = LabeledExample::Source::oracle_force_closure;
        // Mined examples sit exactly where the search concentrates; doubling
        // them weights the loss toward that region.
        dataset.push_back(ex);
        dataset.push_back(std::move(ex));
      }
    }
    const bool last = round + 1 == mining_rounds;
    model = ConvNetClassifier::train(dataset, last ? cfg.classifier.train : mining_train, arch);
  }
  if (dataset_out) *dataset_out = std::move(dataset);
  return model;
}

}  // namespace plenograsp
