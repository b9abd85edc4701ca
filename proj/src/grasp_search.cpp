#include "plenograsp/grasp_search.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

#include "plenograsp/errors.hpp"
#include "plenograsp/threading.hpp"

namespace plenograsp {

using nlohmann::json;

void DiffusionConfig::validate() const {
  if (translation_variance < 0.0 || rotation_variance < 0.0) {
    throw ValidationError("diffusion: variances must be nonnegative");
  }
  if (iterations < 1) throw ValidationError("diffusion: iterations must be >= 1");
  if (particle_count < 2) throw ValidationError("diffusion: particle count must be >= 2");
}

namespace {

GraspCandidate uniform_candidate(const VolumeSpec& workspace, Rng& rng) {
  GraspCandidate c;
  const Vec3 pos(workspace.origin.x() + workspace.extent.x() * rng.uniform(),
                 workspace.origin.y() + workspace.extent.y() * rng.uniform(),
                 workspace.origin.z() + workspace.extent.z() * rng.uniform());
  c.pose = make_pose(random_rotation(rng).toRotationMatrix(), pos);
  return c;
}

}  // namespace

ParticleSet init_particles(const VolumeSpec& workspace, const DiffusionConfig& cfg,
                           uint64_t seed) {
  workspace.validate();
  cfg.validate();
  ParticleSet set(seed);
  set.particles.reserve(size_t(cfg.particle_count));
  for (int i = 0; i < cfg.particle_count; ++i) {
    set.particles.push_back(uniform_candidate(workspace, set.rng));
  }
  set.weights.assign(size_t(cfg.particle_count), 1.0 / double(cfg.particle_count));
  return set;
}

void weight_and_resample(ParticleSet& set, const ScoreFn& score, const VolumeSpec& workspace,
                         bool* degenerate) {
  if (degenerate) *degenerate = false;
  const size_t n = set.particles.size();
  if (n < 2) throw ValidationError("resample: need at least two particles");

  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double s = score(set.particles[i]);
    if (!(s >= 0.0)) throw ComputeError("resample: negative or non-finite score");
    set.particles[i].confidence = s;
    set.weights[i] = s;
    total += s;
  }

  if (total <= 0.0) {
    // Degenerate likelihood: restart from a uniform hypothesis set.
    for (size_t i = 0; i < n; ++i) set.particles[i] = uniform_candidate(workspace, set.rng);
    std::fill(set.weights.begin(), set.weights.end(), 1.0 / double(n));
    if (degenerate) *degenerate = true;
    return;
  }

  for (auto& w : set.weights) w /= total;

  // Systematic resampling: one uniform draw, n evenly spaced pointers.
  const double step = 1.0 / double(n);
  const double start = set.rng.uniform() * step;
  std::vector<GraspCandidate> next;
  next.reserve(n);
  double cumulative = set.weights[0];
  size_t idx = 0;
  for (size_t j = 0; j < n; ++j) {
    const double u = start + double(j) * step;
    while (u > cumulative && idx + 1 < n) {
      ++idx;
      cumulative += set.weights[idx];
    }
    next.push_back(set.particles[idx]);
  }
  set.particles = std::move(next);
  std::fill(set.weights.begin(), set.weights.end(), step);
}

void diffuse(ParticleSet& set, const DiffusionConfig& cfg) {
  cfg.validate();
  const double t_sigma = std::sqrt(cfg.translation_variance);
  const double r_sigma = std::sqrt(cfg.rotation_variance);
  for (auto& particle : set.particles) {
    const Vec3 dt(set.rng.gaussian(0.0, t_sigma), set.rng.gaussian(0.0, t_sigma),
                  set.rng.gaussian(0.0, t_sigma));
    const double roll = set.rng.gaussian(0.0, r_sigma);
    const double pitch = set.rng.gaussian(0.0, r_sigma);
    const double yaw = set.rng.gaussian(0.0, r_sigma);
    particle.pose.translation() += dt;
    if (r_sigma > 0.0) {
      Quat q(particle.pose.linear() * rpy_rotation(roll, pitch, yaw));
      q.normalize();
      particle.pose.linear() = q.toRotationMatrix();
    }
  }
  set.iteration += 1;
}

ScoreFn make_classifier_score(const DepthLikelihoodVolume& dlv, const GripperParams& gripper,
                              const GraspClassifier& model, const SearchConfig& cfg) {
  return [&dlv, &gripper, &model, cfg](const GraspCandidate& candidate) -> double {
    if (outside_fraction(dlv, candidate, gripper, cfg.feature_density) >
        cfg.prune_outside_fraction) {
      return 0.0;
    }
    GraspVolume volume;
    try {
      volume = voxelize_grasp(dlv, candidate, gripper, cfg.feature_density);
    } catch (const ComputeError&) {
      return 0.0;  // entirely outside the workspace
    }
    const FeatureTensor tensor = assemble_tensor(volume, cfg.tensor_size);
    return model.classify(tensor).confidence;
  };
}

namespace {

// Parallel, stream-free scoring of all particles.
std::vector<double> score_all(const std::vector<GraspCandidate>& particles, const ScoreFn& score,
                              int workers) {
  std::vector<double> out(particles.size(), 0.0);
  parallel_chunks(int64_t(particles.size()), workers, [&](int, int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) out[size_t(i)] = score(particles[size_t(i)]);
  });
  return out;
}

}  // namespace

std::vector<GraspCandidate> run_search(const ScoreFn& score, const VolumeSpec& workspace,
                                       const SearchConfig& cfg, uint64_t seed) {
  cfg.diffusion.validate();
  ParticleSet set = init_particles(workspace, cfg.diffusion, seed);

  for (int it = 0; it < cfg.diffusion.iterations; ++it) {
    const std::vector<double> scores = score_all(set.particles, score, cfg.workers);
    size_t cursor = 0;
    const auto cached = [&](const GraspCandidate&) { return scores[cursor++]; };
    weight_and_resample(set, cached, workspace);
    diffuse(set, cfg.diffusion);
  }

  // Final scoring pass for reported confidences.
  const std::vector<double> scores = score_all(set.particles, score, cfg.workers);
  std::vector<GraspCandidate> result = set.particles;
  for (size_t i = 0; i < result.size(); ++i) result[i].confidence = scores[i];
  std::stable_sort(result.begin(), result.end(),
                   [](const GraspCandidate& a, const GraspCandidate& b) {
                     return a.confidence > b.confidence;
                   });

  // Deduplicate within the translation/rotation radii, keeping the best.
  std::vector<GraspCandidate> unique;
  for (const auto& c : result) {
    bool duplicate = false;
    for (const auto& kept : unique) {
      const double dt = (c.pose.translation() - kept.pose.translation()).norm();
      const double dr = rotation_angle(c.pose.linear(), kept.pose.linear());
      if (dt < cfg.dedup_translation && dr < cfg.dedup_rotation) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) unique.push_back(c);
  }
  if (unique.empty()) throw ComputeError("search: no valid candidates survived");
  return unique;
}

std::vector<GraspCandidate> run_search(const DepthLikelihoodVolume& dlv,
                                       const GripperParams& gripper, const GraspClassifier& model,
                                       const VolumeSpec& workspace, const SearchConfig& cfg,
                                       uint64_t seed) {
  const ScoreFn score = make_classifier_score(dlv, gripper, model, cfg);
  return run_search(score, workspace, cfg, seed);
}

void save_candidates(const std::vector<GraspCandidate>& candidates,
                     const std::filesystem::path& path, uint64_t config_hash) {
  json arr = json::array();
  for (const auto& c : candidates) {
    const Quat q(c.pose.linear());
    const Vec3 t = c.pose.translation();
    json item{{"position", {t.x(), t.y(), t.z()}},
              {"quaternion", {q.w(), q.x(), q.y(), q.z()}},
              {"confidence", c.confidence}};
    if (c.graspable_label) item["label"] = *c.graspable_label ? 1 : 0;
    arr.push_back(std::move(item));
  }
  json doc{{"grasps", arr}, {"config_hash", config_hash}};
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write candidates: " + path.string());
  f << doc.dump(2) << "\n";
}

std::vector<GraspCandidate> load_candidates(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("candidates file not found: " + path.string());
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("candidates parse error: " + std::string(e.what()));
  }
  std::vector<GraspCandidate> out;
  for (const auto& item : doc.at("grasps")) {
    GraspCandidate c;
    const auto& jp = item.at("position");
    const auto& jq = item.at("quaternion");
    Quat q(jq.at(0).get<double>(), jq.at(1).get<double>(), jq.at(2).get<double>(),
           jq.at(3).get<double>());
    q.normalize();
    c.pose = make_pose(q.toRotationMatrix(),
                       Vec3(jp.at(0).get<double>(), jp.at(1).get<double>(), jp.at(2).get<double>()));
    c.confidence = item.value("confidence", 0.0);
    if (item.contains("label")) c.graspable_label = item.at("label").get<int>() == 1;
    out.push_back(c);
  }
  return out;
}

}  // namespace plenograsp
