#pragma once

#include <utility>

#include "plenograsp/classifier.hpp"
#include "plenograsp/grasp_search.hpp"
#include "plenograsp/synth_oracle.hpp"

namespace plenograsp {

// One structured configuration document shared by every pipeline stage; the
// defaults are the reference constants (7x7 kept apertures after a 4-pixel
// margin crop, 100x100x60 grasp grid over a 0.10 x 0.10 x 0.06 m cuboid,
// 100 particles / 100 iterations, diffusion variances 1e-4 m^2 / 0.03 rad^2).
struct PipelineConfig {
  int workers = 0;
  uint64_t seed = 7;

  PatchSpec patch;
  struct Hypotheses {
    double near = 0.3;
    double far = 1.5;
    int count = 64;
  } hypotheses;
  VolumeSpec volume{Vec3(-0.5, -0.5, -0.5), Vec3(1.0, 1.0, 1.0), Vec3i(128, 128, 128)};
  SuppressionConfig suppression;
  GripperParams gripper;
  struct Features {
    Vec3i density = Vec3i(100, 100, 60);
    int tensor_size = 100;
  } features;
  struct Classifier {
    std::string kind = "convnet";
    TrainConfig train;
    ConvNetClassifier::Arch arch;
  } classifier;
  SearchConfig search;
  int top_k = 10;
  struct Capture {
    Vec2i image_size = Vec2i(192, 192);
    double focal_length_px = 160.0;
    double aperture_baseline = 12.0;
    Vec2i grid_extent = Vec2i(7, 7);
    Vec2i crop_keep = Vec2i(7, 7);
    int crop_margin = 4;
    Vec3 target = Vec3(0.0, 0.0, 0.05);
    double ring_radius = 0.2;
    double ring_height = 0.65;
    int view_count = 2;
    double start_angle = 0.0;
  } capture;

  CameraIntrinsics intrinsics() const;
  DepthHypothesisSet make_hypotheses() const;
  std::vector<Pose> camera_poses() const;

  void validate() const;
};

PipelineConfig config_from_json(const std::string& text);
std::string config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

// FNV-1a over the canonical JSON serialization; embedded in every artifact
// this configuration produces.
uint64_t config_hash(const PipelineConfig& cfg);

// Applies a dotted-path override ("search.iterations=50") onto the JSON form.
std::string apply_override(const std::string& config_json, const std::string& assignment);

// Renders the configured capture of `scene` and returns the cropped bundle.
ObservationSet capture_scene(const SceneDescription& scene, const PipelineConfig& cfg);

enum class LabelMode { force_closure, collision };

// Oracle-labeled training set: clean object-local proposals, a wide-jitter
// tier of hard near-object poses, a near-miss ring of arbitrary orientations,
// and uniform candidates, voxelized and featurized against the DLV. Returns
// examples with their candidates (parallel vectors).
std::pair<std::vector<LabeledExample>, std::vector<GraspCandidate>> build_oracle_dataset(
    const SceneDescription& scene, const DepthLikelihoodVolume& dlv, const PipelineConfig& cfg,
    int proposals_per_object, int hard_per_object, int uniform_count, uint64_t seed,
    LabelMode mode = LabelMode::force_closure);

// Trains the reference classifier on the oracle dataset, then runs
// `mining_rounds` of hard-example mining: search the current model's top
// poses on held-out mining seeds, label them with the oracle, append, and
// retrain. Every label comes from the synthetic oracle.
ConvNetClassifier train_grasp_classifier(const SceneDescription& scene,
                                         const DepthLikelihoodVolume& dlv,
                                         const PipelineConfig& cfg, int proposals_per_object,
                                         int hard_per_object, int uniform_count, uint64_t seed,
                                         int mining_rounds = 2,
                                         std::vector<LabeledExample>* dataset_out = nullptr);

}  // namespace plenograsp
