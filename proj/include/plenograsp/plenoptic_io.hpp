#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plenograsp/geometry.hpp"
#include "plenograsp/image.hpp"

namespace plenograsp {

struct CameraIntrinsics {
  double focal_length_px = 0.0;
  Vec2 principal_point = Vec2::Zero();   // pixels, (x, y)
  Vec2i image_size = Vec2i::Zero();      // (width, height)
  // Disparity pixels per unit aperture offset per unit inverse depth.
  double aperture_baseline = 0.0;

  void validate() const;
};

// Grid of sub-aperture views from one exposure, indexed (u, v) with u the
// column and v the row; images stored row-major (v * extent_u + u). The grid
// extent is odd on both axes so the center view is unique. Luminance-gradient
// images are derived once at construction and kept alongside.
struct SubApertureGrid {
  int extent_u = 0;
  int extent_v = 0;
  int center_u = 0;
  int center_v = 0;
  std::vector<Image> images;
  std::vector<Image> gradients;

  const Image& image(int u, int v) const { return images[size_t(v) * extent_u + u]; }
  const Image& gradient(int u, int v) const { return gradients[size_t(v) * extent_u + u]; }
  const Image& center_image() const { return image(center_u, center_v); }
  const Image& center_gradient() const { return gradient(center_u, center_v); }
  int view_count() const { return extent_u * extent_v; }

  void compute_gradients();
  void validate() const;
};

struct Observation {
  SubApertureGrid grid;
  Pose pose = Pose::Identity();  // camera -> world
  std::string id;
};

struct ObservationSet {
  std::vector<Observation> observations;
  CameraIntrinsics intrinsics;

  void validate() const;
};

// Retains the central keep_u x keep_v aperture subgrid and crops `margin`
// pixels from every side of every image. Gradients are recomputed on the
// cropped images.
SubApertureGrid crop_grid(const SubApertureGrid& grid, int keep_u, int keep_v, int margin);

// Manifest I/O. The manifest is a JSON document listing shared intrinsics and
// per-view pose (row-major 4x4 camera->world) plus relative image paths in
// row-major aperture order; images are 8-bit RGB PNG.
ObservationSet load_observation_set(const std::filesystem::path& manifest_path);
void save_observation_set(const ObservationSet& set, const std::filesystem::path& manifest_path,
                          uint64_t config_hash = 0);

}  // namespace plenograsp
