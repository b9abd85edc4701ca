#include <doctest.h>

#include "plenograsp/errors.hpp"

#include "plenograsp/grasp_search.hpp"
#include "support.hpp"

using namespace plenograsp;
using namespace pgtest;

namespace {

VolumeSpec meter_box() {
  VolumeSpec ws;
  ws.origin = Vec3(-0.5, -0.5, -0.5);
  ws.extent = Vec3(1.0, 1.0, 1.0);
  ws.resolution = Vec3i(8, 8, 8);
  return ws;
}

DiffusionConfig reference_diffusion() {
  DiffusionConfig cfg;  // 1e-4 m^2 and 0.03 rad^2, 100 particles, 100 iterations
  return cfg;
}

bool same_pose(const GraspCandidate& a, const GraspCandidate& b) {
  return (a.pose.matrix() - b.pose.matrix()).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

TEST_SUITE("grasp_search") {

TEST_CASE("initialization: 100 particles, equal weights, inside the workspace") {
  const auto ws = meter_box();
  const auto set = init_particles(ws, reference_diffusion(), 5);
  REQUIRE(set.particles.size() == 100);
  for (const double w : set.weights) CHECK(w == doctest::Approx(0.01).epsilon(1e-15));
  for (const auto& p : set.particles) {
    CHECK(ws.contains(p.pose.translation()));
    CHECK(is_rotation(p.pose.linear(), 1e-9));
  }

  const auto again = init_particles(ws, reference_diffusion(), 5);
  for (size_t i = 0; i < set.particles.size(); ++i) {
    CHECK(same_pose(set.particles[i], again.particles[i]));
  }
}

TEST_CASE("uniform scores leave the particle multiset unchanged") {
  const auto ws = meter_box();
  auto set = init_particles(ws, reference_diffusion(), 9);
  const auto before = set.particles;
  weight_and_resample(set, [](const GraspCandidate&) { return 0.7; }, ws);
  REQUIRE(set.particles.size() == before.size());
  for (size_t i = 0; i < before.size(); ++i) {
    CHECK(same_pose(set.particles[i], before[i]));
  }
}

TEST_CASE("a delta likelihood collapses every particle onto the winner") {
  const auto ws = meter_box();
  auto set = init_particles(ws, reference_diffusion(), 13);
  const GraspCandidate winner = set.particles[37];
  weight_and_resample(
      set, [&](const GraspCandidate& c) { return same_pose(c, winner) ? 1.0 : 0.0; }, ws);
  for (const auto& p : set.particles) CHECK(same_pose(p, winner));
}

TEST_CASE("weights are normalized after every resampling step") {
  const auto ws = meter_box();
  auto set = init_particles(ws, reference_diffusion(), 21);
  Rng rng(3);
  for (int round = 0; round < 5; ++round) {
    weight_and_resample(set, [&](const GraspCandidate&) { return 0.1 + rng.uniform(); }, ws);
    double sum = 0.0;
    for (const double w : set.weights) sum += w;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    diffuse(set, reference_diffusion());
  }
}

TEST_CASE("resampling is invariant to positive rescaling of the score") {
  const auto ws = meter_box();
  auto set1 = init_particles(ws, reference_diffusion(), 31);
  auto set2 = init_particles(ws, reference_diffusion(), 31);
  Rng s1(7), s2(7);
  weight_and_resample(set1, [&](const GraspCandidate&) { return 0.05 + s1.uniform(); }, ws);
  weight_and_resample(set2, [&](const GraspCandidate&) { return 3.7 * (0.05 + s2.uniform()); },
                      ws);
  for (size_t i = 0; i < set1.particles.size(); ++i) {
    CHECK(same_pose(set1.particles[i], set2.particles[i]));
  }
}

TEST_CASE("all-zero scores reinitialize uniformly with a warning flag") {
  const auto ws = meter_box();
  auto set = init_particles(ws, reference_diffusion(), 17);
  bool degenerate = false;
  weight_and_resample(set, [](const GraspCandidate&) { return 0.0; }, ws, &degenerate);
  CHECK(degenerate);
  double sum = 0.0;
  for (const double w : set.weights) sum += w;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
  for (const auto& p : set.particles) CHECK(ws.contains(p.pose.translation()));
}

TEST_CASE("zero-variance diffusion is the identity") {
  const auto ws = meter_box();
  DiffusionConfig cfg = reference_diffusion();
  cfg.translation_variance = 0.0;
  cfg.rotation_variance = 0.0;
  auto set = init_particles(ws, cfg, 23);
  const auto before = set.particles;
  diffuse(set, cfg);
  for (size_t i = 0; i < before.size(); ++i) CHECK(same_pose(set.particles[i], before[i]));
  CHECK(set.iteration == 1);
}

TEST_CASE("empirical diffusion variance matches the configuration within 5%") {
  DiffusionConfig cfg = reference_diffusion();
  cfg.particle_count = 2;
  ParticleSet set(99);
  set.particles.assign(2, GraspCandidate{});
  set.weights.assign(2, 0.5);

  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    ParticleSet one{uint64_t(i)};
    one.particles.assign(1, GraspCandidate{});
    one.weights.assign(1, 1.0);
    diffuse(one, cfg);
    const double dx = one.particles[0].pose.translation().x();
    sum += dx;
    sum_sq += dx * dx;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(var == doctest::Approx(cfg.translation_variance).epsilon(0.05));
}

TEST_CASE("rotations stay orthonormal through heavy diffusion") {
  const auto ws = meter_box();
  DiffusionConfig cfg = reference_diffusion();
  cfg.rotation_variance = 0.5;
  auto set = init_particles(ws, cfg, 41);
  for (int i = 0; i < 50; ++i) diffuse(set, cfg);
  for (const auto& p : set.particles) {
    CHECK(orthonormality_error(p.pose.linear()) <= 1e-9);
  }
}

TEST_CASE("search concentrates on a closed-form score peak") {
  const auto ws = meter_box();
  const Vec3 peak(0.12, -0.2, 0.07);
  const ScoreFn score = [&](const GraspCandidate& c) {
    const double d2 = (c.pose.translation() - peak).squaredNorm();
    return std::exp(-d2 / (2.0 * 0.08 * 0.08));
  };
  SearchConfig cfg;
  cfg.diffusion.iterations = 40;
  cfg.workers = 2;
  const auto result = run_search(score, ws, cfg, 7);
  REQUIRE_FALSE(result.empty());
  CHECK((result.front().pose.translation() - peak).norm() <= 0.05);
}

TEST_CASE("fixed seeds give bit-identical search results") {
  const auto ws = meter_box();
  const Vec3 peak(0.0, 0.1, -0.05);
  const ScoreFn score = [&](const GraspCandidate& c) {
    return std::exp(-(c.pose.translation() - peak).squaredNorm() / 0.01);
  };
  SearchConfig cfg;
  cfg.diffusion.iterations = 10;
  cfg.workers = 2;
  const auto r1 = run_search(score, ws, cfg, 1234);
  const auto r2 = run_search(score, ws, cfg, 1234);
  REQUIRE(r1.size() == r2.size());
  for (size_t i = 0; i < r1.size(); ++i) {
    CHECK(same_pose(r1[i], r2[i]));
    CHECK(r1[i].confidence == r2[i].confidence);
  }
}

TEST_CASE("with a uniform score the particle mean stays inside the workspace") {
  const auto ws = meter_box();
  SearchConfig cfg;
  cfg.diffusion.iterations = 5;
  const auto result = run_search([](const GraspCandidate&) { return 1.0; }, ws, cfg, 3);
  Vec3 mean = Vec3::Zero();
  for (const auto& c : result) mean += c.pose.translation();
  mean /= double(result.size());
  CHECK(ws.contains(mean));
}

TEST_CASE("results are deduplicated and sorted by confidence") {
  const auto ws = meter_box();
  const ScoreFn score = [](const GraspCandidate& c) {
    return std::exp(-c.pose.translation().squaredNorm() / 0.02);
  };
  SearchConfig cfg;
  cfg.diffusion.iterations = 30;
  const auto result = run_search(score, ws, cfg, 77);
  for (size_t i = 1; i < result.size(); ++i) {
    CHECK(result[i - 1].confidence >= result[i].confidence);
  }
  for (size_t i = 0; i < result.size(); ++i) {
    for (size_t j = i + 1; j < result.size(); ++j) {
      const double dt =
          (result[i].pose.translation() - result[j].pose.translation()).norm();
      const double dr = rotation_angle(result[i].pose.linear(), result[j].pose.linear());
      CHECK((dt >= cfg.dedup_translation || dr >= cfg.dedup_rotation));
    }
  }
}

TEST_CASE("iteration counts below one are rejected") {
  DiffusionConfig cfg;
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("candidate lists round-trip through JSON") {
  const auto ws = meter_box();
  auto candidates = sample_candidates(ws, 5, 3);
  candidates[0].confidence = 0.9;
  candidates[1].graspable_label = true;
  const auto path = std::filesystem::temp_directory_path() / "plenograsp_test_cands.json";
  save_candidates(candidates, path, 42);
  const auto loaded = load_candidates(path);
  REQUIRE(loaded.size() == candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    CHECK((candidates[i].pose.translation() - loaded[i].pose.translation()).norm() <= 1e-12);
    CHECK(rotation_angle(candidates[i].pose.linear(), loaded[i].pose.linear()) <= 1e-9);
  }
  CHECK(loaded[0].confidence == doctest::Approx(0.9));
  REQUIRE(loaded[1].graspable_label.has_value());
  CHECK(*loaded[1].graspable_label);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
