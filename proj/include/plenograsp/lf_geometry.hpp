#pragma once

#include <optional>
#include <vector>

#include "plenograsp/geometry.hpp"
#include "plenograsp/plenoptic_io.hpp"

namespace plenograsp {

// Candidate depths the per-pixel color costs are normalized over. Strictly
// increasing, all positive, at least two entries.
struct DepthHypothesisSet {
  std::vector<double> depths;

  static DepthHypothesisSet uniform_inverse_depth(double near, double far, int count);

  int count() const { return int(depths.size()); }
  // Index of the hypothesis closest to `depth`; lower index wins ties.
  int nearest_index(double depth) const;
  void validate() const;
};

// A world point seen from one view: subpixel center-view coordinates plus the
// camera-frame depth.
struct RaySample {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;
};

enum class Visibility { visible, behind_camera, out_of_frame };

struct Projection {
  Visibility status = Visibility::behind_camera;
  RaySample sample;

  bool visible() const { return status == Visibility::visible; }
};

// Patch dissimilarity parameters for the ray difference: weighted L1 over
// color and luminance-gradient channels, averaged over a (2*radius+1)^2
// window sampled bilinearly.
struct PatchSpec {
  int radius = 1;
  double color_weight = 0.7;
  double gradient_weight = 0.3;

  void validate() const;
  int patch_pixels() const { return (2 * radius + 1) * (2 * radius + 1); }
};

// Pinhole projection of a world point into the observation's center view.
Projection project_point(const Vec3& p, const Observation& obs, const CameraIntrinsics& intr);

// Center-view pixel displaced into the sub-aperture view at `aperture_offset`
// (integer offsets relative to the center aperture) under the linear disparity
// model: pixel + offset * baseline / depth.
inline Vec2 correspondence(const RaySample& sample, const Vec2& aperture_offset,
                           const CameraIntrinsics& intr) {
  return sample.pixel + aperture_offset * (intr.aperture_baseline / sample.depth);
}

// True when the full patch window around (x, y) lies in the bilinear sample
// domain of a w x h image.
inline bool patch_in_domain(double x, double y, int w, int h, int radius) {
  return x - radius >= 0.0 && y - radius >= 0.0 && x + radius <= double(w - 1) &&
         y + radius <= double(h - 1);
}

// Ray difference between a center-view patch and a sub-aperture patch, both
// sampled bilinearly at subpixel locations. Returns nullopt when either patch
// window leaves its image (invalid ray; callers exclude it from sums).
std::optional<double> ray_cost(const Image& center_img, const Image& center_grad,
                               const Image& sub_img, const Image& sub_grad, const Vec2& center_px,
                               const Vec2& sub_px, const PatchSpec& spec);

// Aperture-summed color costs of one view's ray through `p`, swept over all
// depth hypotheses. Element k sums ray_cost over every non-center aperture at
// depth hyps[k]; invalid rays are excluded and the sum rescaled by
// total/valid so elements stay comparable across k.
struct CostProfile {
  std::vector<double> costs;
  std::vector<uint8_t> valid;

  int valid_count() const;
};

CostProfile cost_over_depths(const Vec3& p, const Observation& obs, const CameraIntrinsics& intr,
                             const DepthHypothesisSet& hyps, const PatchSpec& spec);

}  // namespace plenograsp
