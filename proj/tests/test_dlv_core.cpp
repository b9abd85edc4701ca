#include <doctest.h>

#include "plenograsp/errors.hpp"

#include <fstream>

#include "plenograsp/dlv_core.hpp"
#include "plenograsp/synth_oracle.hpp"
#include "support.hpp"

using namespace plenograsp;
using namespace pgtest;

namespace {

CostProfile make_profile(std::initializer_list<double> costs) {
  CostProfile p;
  p.costs = costs;
  p.valid.assign(p.costs.size(), 1);
  return p;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("plenograsp_test_" + name);
}

}  // namespace

TEST_SUITE("dlv_core") {

TEST_CASE("normalize_costs matches the direct arithmetic: (6-2)/8") {
  const auto p = make_profile({2.0, 6.0});
  CHECK(normalize_costs(p, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normalize_costs is zero at the argmax index") {
  const auto p = make_profile({1.0, 4.0, 2.5});
  CHECK(normalize_costs(p, 1) == 0.0);
}

TEST_CASE("normalize_costs of a flat profile is zero everywhere") {
  const auto p = make_profile({3.0, 3.0, 3.0, 3.0});
  for (int k = 0; k < 4; ++k) CHECK(normalize_costs(p, k) == 0.0);
}

TEST_CASE("normalize_costs flags missing evidence") {
  CostProfile p = make_profile({2.0, 6.0});
  p.valid[0] = 0;
  bool evidence = true;
  CHECK(normalize_costs(p, 0, &evidence) == 0.0);
  CHECK_FALSE(evidence);

  CostProfile zero = make_profile({0.0, 0.0});
  CHECK(normalize_costs(zero, 0, &evidence) == 0.0);
  CHECK_FALSE(evidence);
}

TEST_CASE("point likelihood is the sum of one normalized term per view") {
  const auto cfg = small_config();
  const auto set = small_capture(plane_scene());
  const auto hyps = DepthHypothesisSet::uniform_inverse_depth(0.45, 0.95, 16);

  const Vec3 p = ray_plane_point(set.observations[0], set.intrinsics, 84.0, 76.0, 0.0);

  double expected = 0.0;
  for (const auto& obs : set.observations) {
    const auto proj = project_point(p, obs, set.intrinsics);
    REQUIRE(proj.visible());
    const auto profile = cost_over_depths(p, obs, set.intrinsics, hyps, cfg.patch);
    expected += normalize_costs(profile, hyps.nearest_index(proj.sample.depth));
  }
  CHECK(point_likelihood(p, set, hyps, cfg.patch) == doctest::Approx(expected).epsilon(1e-12));

  const auto terms = per_view_likelihoods(p, set, hyps, cfg.patch);
  REQUIRE(terms.size() == 2);
  CHECK(terms[0] > 0.0);
  CHECK(terms[1] > 0.0);
}

TEST_CASE("engine equals the independent reference on a small grid") {
  const auto cfg = small_config();
  const auto set = small_capture(plane_scene());
  const auto hyps = DepthHypothesisSet::uniform_inverse_depth(0.45, 0.95, 12);
  VolumeSpec spec;
  spec.origin = Vec3(-0.06, -0.06, -0.04);
  spec.extent = Vec3(0.12, 0.12, 0.1);
  spec.resolution = Vec3i(5, 5, 5);

  const auto dlv = build_dlv(set, spec, hyps, cfg.patch, 2);
  double worst = 0.0;
  for (int iz = 0; iz < 5; ++iz) {
    for (int iy = 0; iy < 5; ++iy) {
      for (int ix = 0; ix < 5; ++ix) {
        const double ref =
            brute_force_likelihood(spec.voxel_center(ix, iy, iz), set, hyps, cfg.patch);
        worst = std::max(worst, std::abs(ref - dlv.at(ix, iy, iz)));
      }
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("build_dlv voxel values equal the per-point path") {
  const auto cfg = small_config();
  const auto set = small_capture(plane_scene());
  const auto hyps = DepthHypothesisSet::uniform_inverse_depth(0.45, 0.95, 16);
  VolumeSpec spec;
  spec.origin = Vec3(-0.05, -0.05, -0.03);
  spec.extent = Vec3(0.1, 0.1, 0.06);
  spec.resolution = Vec3i(4, 4, 4);
  const auto dlv = build_dlv(set, spec, hyps, cfg.patch, 1);
  for (int iz = 0; iz < 4; ++iz) {
    for (int ix = 0; ix < 4; ++ix) {
      const Vec3 p = spec.voxel_center(ix, 2, iz);
      CHECK(dlv.at(ix, 2, iz) ==
            doctest::Approx(point_likelihood(p, set, hyps, cfg.patch)).epsilon(1e-12));
    }
  }
}

TEST_CASE("adding a view never decreases likelihood; sums distribute over views") {
  const auto cfg = small_config();
  const auto set = small_capture(plane_scene());
  const auto hyps = DepthHypothesisSet::uniform_inverse_depth(0.45, 0.95, 16);
  VolumeSpec spec;
  spec.origin = Vec3(-0.08, -0.08, -0.05);
  spec.extent = Vec3(0.16, 0.16, 0.1);
  spec.resolution = Vec3i(6, 6, 6);

  ObservationSet only0, only1;
  only0.intrinsics = only1.intrinsics = set.intrinsics;
  only0.observations.push_back(set.observations[0]);
  only1.observations.push_back(set.observations[1]);

  const auto both = build_dlv(set, spec, hyps, cfg.patch, 2);
  const auto v0 = build_dlv(only0, spec, hyps, cfg.patch, 2);
  const auto v1 = build_dlv(only1, spec, hyps, cfg.patch, 2);

  CHECK(both.view_count == 2);
  for (size_t i = 0; i < both.values.size(); ++i) {
    CHECK(both.values[i] >= v0.values[i]);  // monotone evidence
    CHECK(std::abs(both.values[i] - (v0.values[i] + v1.values[i])) <= 1e-9);
    CHECK(both.values[i] >= 0.0);
    CHECK(both.values[i] <= 2.0);
  }
}

TEST_CASE("workspace outside the visual hull is an error") {
  const auto cfg = small_config();
  const auto set = small_capture(plane_scene());
  const auto hyps = DepthHypothesisSet::uniform_inverse_depth(0.45, 0.95, 8);
  VolumeSpec spec;
  spec.origin = Vec3(5.0, 5.0, 5.0);
  spec.extent = Vec3(0.1, 0.1, 0.1);
  spec.resolution = Vec3i(2, 2, 2);
  CHECK_THROWS_WITH_AS(build_dlv(set, spec, hyps, cfg.patch, 1),
                       doctest::Contains("workspace outside visual hull"), ComputeError);
}

TEST_CASE("query interpolates trilinearly") {
  DepthLikelihoodVolume dlv;
  dlv.spec.origin = Vec3(0.0, 0.0, 0.0);
  dlv.spec.extent = Vec3(1.0, 1.0, 1.0);
  dlv.spec.resolution = Vec3i(8, 8, 8);
  dlv.view_count = 1;
  dlv.values.assign(size_t(dlv.spec.voxel_count()), 0.0);

  SUBCASE("node identity and constant cells") {
    Rng rng(5);
    for (auto& v : dlv.values) v = rng.uniform();
    const Vec3 center = dlv.spec.voxel_center(3, 5, 2);
    CHECK(query(dlv, center) == doctest::Approx(dlv.at(3, 5, 2)).epsilon(1e-14));

    std::fill(dlv.values.begin(), dlv.values.end(), 0.37);
    const Vec3 centroid = 0.5 * (dlv.spec.voxel_center(2, 2, 2) + dlv.spec.voxel_center(3, 3, 3));
    CHECK(query(dlv, centroid) == doctest::Approx(0.37).epsilon(1e-14));
  }

  SUBCASE("exact on linear fields") {
    for (int iz = 0; iz < 8; ++iz) {
      for (int iy = 0; iy < 8; ++iy) {
        for (int ix = 0; ix < 8; ++ix) {
          dlv.values[size_t(dlv.spec.linear_index(ix, iy, iz))] =
              dlv.spec.voxel_center(ix, iy, iz).x();
        }
      }
    }
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
      const Vec3 p(rng.uniform(), rng.uniform(), rng.uniform());
      CHECK(std::abs(query(dlv, p) - p.x()) <= 1e-9);
    }
  }

  SUBCASE("outside the bounds returns zero with the flag cleared") {
    bool inside = true;
    CHECK(query(dlv, Vec3(1.5, 0.5, 0.5), &inside) == 0.0);
    CHECK_FALSE(inside);
  }
}

TEST_CASE("dlv files round-trip and reject corruption") {
  const auto cfg = small_config();
  const auto set = small_capture(plane_scene());
  const auto hyps = DepthHypothesisSet::uniform_inverse_depth(0.45, 0.95, 8);
  VolumeSpec spec;
  spec.origin = Vec3(-0.05, -0.05, -0.03);
  spec.extent = Vec3(0.1, 0.1, 0.06);
  spec.resolution = Vec3i(4, 4, 3);
  const auto dlv = build_dlv(set, spec, hyps, cfg.patch, 1);

  const auto path = temp_file("vol.dlv");
  save_dlv(dlv, path, 0xABCDu);
  const auto loaded = load_dlv(path);

  CHECK(loaded.spec == dlv.spec);
  CHECK(loaded.view_count == dlv.view_count);
  for (size_t i = 0; i < dlv.values.size(); ++i) {
    // Stored payload is float32; the loaded value is exactly that quantization.
    CHECK(loaded.values[i] == double(float(dlv.values[i])));
  }

  // A second save of the loaded volume is byte-identical.
  const auto path2 = temp_file("vol2.dlv");
  save_dlv(loaded, path2, 0xABCDu);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  SUBCASE("truncated payload") {
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 7);
    CHECK_THROWS_WITH_AS(load_dlv(path), doctest::Contains("truncated"), ValidationError);
  }
  SUBCASE("magic mismatch") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("NOPE", 4);
    f.close();
    CHECK_THROWS_WITH_AS(load_dlv(path), doctest::Contains("magic"), ValidationError);
  }
  SUBCASE("unsupported version") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const uint32_t v2 = 2;
    f.write(reinterpret_cast<const char*>(&v2), 4);
    f.close();
    CHECK_THROWS_WITH_AS(load_dlv(path), doctest::Contains("unsupported version"),
                         ValidationError);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("suppression is the identity without saturation or with a huge threshold") {
  const auto cfg = small_config();
  const auto set = small_capture(plane_scene());  // no saturated pixels anywhere
  const auto hyps = DepthHypothesisSet::uniform_inverse_depth(0.45, 0.95, 12);
  VolumeSpec spec;
  spec.origin = Vec3(-0.06, -0.06, -0.04);
  spec.extent = Vec3(0.12, 0.12, 0.08);
  spec.resolution = Vec3i(5, 5, 4);
  const auto dlv = build_dlv(set, spec, hyps, cfg.patch, 2);

  SUBCASE("no saturated pixels") {
    SuppressionConfig sup;
    sup.auto_threshold = true;
    const auto out = suppress_reflections(dlv, set, hyps, cfg.patch, sup, 2);
    CHECK(std::equal(dlv.values.begin(), dlv.values.end(), out.values.begin()));
  }
  SUBCASE("threshold above every variance") {
    SuppressionConfig sup;
    sup.auto_threshold = false;
    sup.variance_threshold = 1e30;
    sup.saturation_threshold = 0.0001;  // everything counts as saturated
    const auto out = suppress_reflections(dlv, set, hyps, cfg.patch, sup, 2);
    CHECK(std::equal(dlv.values.begin(), dlv.values.end(), out.values.begin()));
  }
}

TEST_CASE("suppression never increases any voxel") {
  const auto cfg = small_config();
  const auto set = small_capture(blob_scene());
  const auto hyps = DepthHypothesisSet::uniform_inverse_depth(0.45, 0.95, 16);
  VolumeSpec spec;
  spec.origin = Vec3(-0.08, -0.08, -0.08);
  spec.extent = Vec3(0.16, 0.16, 0.14);
  spec.resolution = Vec3i(8, 8, 8);
  const auto dlv = build_dlv(set, spec, hyps, cfg.patch, 2);
  SuppressionConfig sup;
  const auto out = suppress_reflections(dlv, set, hyps, cfg.patch, sup, 2);
  for (size_t i = 0; i < dlv.values.size(); ++i) {
    CHECK(out.values[i] <= dlv.values[i] + 1e-15);
  }
}

TEST_CASE("mismatched volume and observation set are rejected") {
  const auto cfg = small_config();
  const auto set = small_capture(plane_scene());
  const auto hyps = DepthHypothesisSet::uniform_inverse_depth(0.45, 0.95, 8);
  DepthLikelihoodVolume dlv;
  dlv.spec.resolution = Vec3i(2, 2, 2);
  dlv.spec.extent = Vec3(0.1, 0.1, 0.1);
  dlv.view_count = 5;  // disagrees with the two-view set
  dlv.values.assign(8, 0.0);
  CHECK_THROWS_AS(suppress_reflections(dlv, set, hyps, cfg.patch, SuppressionConfig{}, 1),
                  ValidationError);
}

TEST_CASE("slice export maps the volume maximum to full brightness") {
  DepthLikelihoodVolume dlv;
  dlv.spec.origin = Vec3::Zero();
  dlv.spec.extent = Vec3(1, 1, 1);
  dlv.spec.resolution = Vec3i(4, 4, 2);
  dlv.view_count = 1;
  dlv.values.assign(32, 0.25);
  dlv.values[size_t(dlv.spec.linear_index(2, 1, 0))] = 0.5;
  const Image img = dlv_slice(dlv, 0);
  CHECK(img.width == 4);
  CHECK(img.height == 4);
  CHECK(img.at(2, 1)[0] == doctest::Approx(1.0));
  CHECK(img.at(0, 0)[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(dlv_slice(dlv, 9), ValidationError);
}

TEST_CASE("normalize_by_views scales into the unit range") {
  DepthLikelihoodVolume dlv;
  dlv.spec.resolution = Vec3i(2, 2, 2);
  dlv.view_count = 4;
  dlv.values.assign(8, 2.0);
  normalize_by_views(dlv);
  for (const double v : dlv.values) CHECK(v == doctest::Approx(0.5));
}

}  // TEST_SUITE
