#pragma once

// Shared scene and capture builders for the test suites.

#include "plenograsp/pipeline.hpp"
#include "plenograsp/synth_oracle.hpp"

namespace pgtest {

using namespace plenograsp;

inline Primitive textured_table(double half = 0.8, uint64_t seed = 11) {
  Primitive table;
  table.kind = Primitive::Kind::plane;
  table.id = "table";
  table.half_extents = Vec3(half, half, 0.0);
  table.material.kind = Material::Kind::lambertian;
  table.material.texture = {seed, 35.0, 0.85, 2, Vec3(0.55, 0.5, 0.45)};
  return table;
}

inline SceneDescription plane_scene(uint64_t seed = 11) {
  SceneDescription scene;
  scene.surfaces.push_back(textured_table(0.8, seed));
  scene.background = Vec3(0.03, 0.03, 0.03);
  return scene;
}

// Transparent sheet at `height` above the textured table.
inline SceneDescription two_layer_scene(double height = 0.18, double alpha = 0.3) {
  SceneDescription scene = plane_scene(11);
  Primitive sheet;
  sheet.kind = Primitive::Kind::plane;
  sheet.id = "sheet";
  sheet.pose = make_pose(Mat3::Identity(), Vec3(0.0, 0.0, height));
  sheet.half_extents = Vec3(0.5, 0.5, 0.0);
  sheet.material.kind = Material::Kind::transparent;
  sheet.material.alpha = alpha;
  sheet.material.texture = {29, 45.0, 0.9, 2, Vec3(0.75, 0.8, 0.85)};
  scene.surfaces.push_back(sheet);
  return scene;
}

// Table plus a saturated view-dependent blob below it: the overlay's parallax
// matches a depth greater than the table's, producing a virtual surface.
inline SceneDescription blob_scene(const Vec3& blob_center = Vec3(0.0, 0.0, -0.06),
                                   double radius = 0.012, double intensity = 3.0) {
  SceneDescription scene = plane_scene(11);
  SpecularBlob blob;
  blob.center = blob_center;
  blob.radius = radius;
  blob.intensity = intensity;
  blob.direction = Vec3(0.15, 0.0, -1.0).normalized();
  blob.exponent = 30.0;
  scene.blobs.push_back(blob);
  return scene;
}

inline Primitive glass_cylinder(const std::string& id, double x, double y, double radius = 0.025,
                                double height = 0.11, uint64_t seed = 71) {
  Primitive cup;
  cup.kind = Primitive::Kind::cylinder;
  cup.id = id;
  cup.base_center = Vec3(x, y, 0.0);
  cup.radius = radius;
  cup.height = height;
  cup.wall_thickness = 0.004;
  cup.material.kind = Material::Kind::transparent;
  cup.material.alpha = 0.35;
  cup.material.texture = {seed, 120.0, 0.9, 2, Vec3(0.7, 0.78, 0.82)};
  return cup;
}

inline SceneDescription two_cylinder_scene() {
  SceneDescription scene = plane_scene(11);
  scene.surfaces.push_back(glass_cylinder("cup0", -0.07, -0.05, 0.020, 0.12, 71));
  scene.surfaces.push_back(glass_cylinder("cup1", 0.08, 0.06, 0.022, 0.11, 72));
  return scene;
}

// Small fast capture: 2 views, 3x3 apertures, 160px images.
inline PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.workers = 2;
  cfg.patch.radius = 0;
  cfg.hypotheses = {0.45, 0.95, 16};
  cfg.volume = VolumeSpec{Vec3(-0.15, -0.15, -0.08), Vec3(0.3, 0.3, 0.2), Vec3i(16, 16, 16)};
  cfg.capture.image_size = Vec2i(160, 160);
  cfg.capture.focal_length_px = 140.0;
  cfg.capture.aperture_baseline = 10.0;
  cfg.capture.grid_extent = Vec2i(3, 3);
  cfg.capture.crop_keep = Vec2i(3, 3);
  cfg.capture.crop_margin = 0;
  cfg.capture.target = Vec3(0.0, 0.0, 0.0);
  cfg.capture.ring_radius = 0.12;
  cfg.capture.ring_height = 0.62;
  cfg.capture.view_count = 2;
  cfg.capture.start_angle = 0.3;
  return cfg;
}

inline ObservationSet small_capture(const SceneDescription& scene) {
  return capture_scene(scene, small_config());
}

// World point where the central-view ray through `pixel` meets the plane z=h.
inline Vec3 ray_plane_point(const Observation& obs, const CameraIntrinsics& intr, double px,
                            double py, double h = 0.0) {
  const Vec3 dir_cam((px - intr.principal_point.x()) / intr.focal_length_px,
                     (py - intr.principal_point.y()) / intr.focal_length_px, 1.0);
  const Vec3 origin = obs.pose.translation();
  const Vec3 dir = obs.pose.linear() * dir_cam;
  const double t = (h - origin.z()) / dir.z();
  return origin + t * dir;
}

}  // namespace pgtest
