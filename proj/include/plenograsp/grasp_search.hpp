#pragma once

#include <functional>

#include "plenograsp/classifier.hpp"
#include "plenograsp/grasp_features.hpp"

namespace plenograsp {

struct DiffusionConfig {
  double translation_variance = 1e-4;  // m^2, per axis
  double rotation_variance = 0.03;     // rad^2, per roll/pitch/yaw angle
  int iterations = 100;
  int particle_count = 100;

  void validate() const;
};

// Weighted six-DoF grasp hypotheses. The RNG stream is owned by the set and
// consumed only by resampling, diffusion, and reinitialization, never by
// scoring, so particle evaluation can run in parallel.
struct ParticleSet {
  std::vector<GraspCandidate> particles;
  std::vector<double> weights;
  int iteration = 0;
  Rng rng;

  explicit ParticleSet(uint64_t seed) : rng(seed) {}
};

using ScoreFn = std::function<double(const GraspCandidate&)>;

// Uniform positions over the workspace box, uniform orientations, equal
// weights 1/count.
ParticleSet init_particles(const VolumeSpec& workspace, const DiffusionConfig& cfg, uint64_t seed);

// Weights proportional to the scores, then systematic resampling from the
// set's seeded stream. All-zero scores reinitialize the set uniformly over
// `workspace` and report it through *degenerate.
void weight_and_resample(ParticleSet& set, const ScoreFn& score, const VolumeSpec& workspace,
                         bool* degenerate = nullptr);

// Zero-mean Gaussian perturbation: per-axis translation variance and
// per-angle roll/pitch/yaw variance, composed as a local rotation; rotations
// are renormalized through the quaternion form.
void diffuse(ParticleSet& set, const DiffusionConfig& cfg);

struct SearchConfig {
  DiffusionConfig diffusion;
  Vec3i feature_density = Vec3i(100, 100, 60);
  int tensor_size = 100;
  double prune_outside_fraction = 0.5;
  double dedup_translation = 0.005;  // m
  double dedup_rotation = 0.1;       // rad
  int workers = 0;
};

// Classifier-backed score: voxelize the candidate cuboid, assemble the
// nine-channel tensor, classify; candidates mostly outside the volume score 0.
ScoreFn make_classifier_score(const DepthLikelihoodVolume& dlv, const GripperParams& gripper,
                              const GraspClassifier& model, const SearchConfig& cfg);

// Particle search over an arbitrary score function: K iterations of
// score -> resample -> diffuse, then a final scoring pass. Returns the
// surviving candidates sorted by confidence, deduplicated within the
// configured translation/rotation radii.
std::vector<GraspCandidate> run_search(const ScoreFn& score, const VolumeSpec& workspace,
                                       const SearchConfig& cfg, uint64_t seed);

// Full pipeline search (Alg. 1 loop): classifier score over the DLV.
std::vector<GraspCandidate> run_search(const DepthLikelihoodVolume& dlv,
                                       const GripperParams& gripper, const GraspClassifier& model,
                                       const VolumeSpec& workspace, const SearchConfig& cfg,
                                       uint64_t seed);

// JSON export: list of {position, quaternion (w,x,y,z), confidence}, sorted
// descending by confidence.
void save_candidates(const std::vector<GraspCandidate>& candidates,
                     const std::filesystem::path& path, uint64_t config_hash = 0);
std::vector<GraspCandidate> load_candidates(const std::filesystem::path& path);

}  // namespace plenograsp
