#include "plenograsp/lf_geometry.hpp"

#include <algorithm>

#include "plenograsp/errors.hpp"

namespace plenograsp {

DepthHypothesisSet DepthHypothesisSet::uniform_inverse_depth(double near, double far, int count) {
  if (!(near > 0.0) || !(far > near)) {
    throw ValidationError("depth hypotheses: need 0 < near < far");
  }
  if (count < 2) throw ValidationError("depth hypotheses: need at least two samples");
  DepthHypothesisSet out;
  out.depths.resize(size_t(count));
  const double inv_near = 1.0 / near;
  const double inv_far = 1.0 / far;
  for (int k = 0; k < count; ++k) {
    // Far to near in inverse depth, reversed so depths increase.
    const double t = double(k) / double(count - 1);
    out.depths[size_t(count - 1 - k)] = 1.0 / (inv_far + t * (inv_near - inv_far));
  }
  out.validate();
  return out;
}

void DepthHypothesisSet::validate() const {
  if (depths.size() < 2) throw ValidationError("depth hypotheses: need at least two samples");
  double prev = 0.0;
  for (const double d : depths) {
    if (!(d > 0.0)) throw ValidationError("depth hypotheses: depths must be positive");
    if (!(d > prev)) throw ValidationError("depth hypotheses: depths must be strictly increasing");
    prev = d;
  }
}

int DepthHypothesisSet::nearest_index(double depth) const {
  const auto it = std::lower_bound(depths.begin(), depths.end(), depth);
  if (it == depths.begin()) return 0;
  if (it == depths.end()) return int(depths.size()) - 1;
  const int hi = int(it - depths.begin());
  const int lo = hi - 1;
  return (depth - depths[size_t(lo)]) <= (depths[size_t(hi)] - depth) ? lo : hi;
}

void PatchSpec::validate() const {
  if (radius < 0) throw ValidationError("patch: radius must be >= 0");
  if (color_weight < 0.0 || gradient_weight < 0.0 || color_weight + gradient_weight <= 0.0) {
    throw ValidationError("patch: weights must be nonnegative with positive sum");
  }
}

Projection project_point(const Vec3& p, const Observation& obs, const CameraIntrinsics& intr) {
  const Vec3 cam = obs.pose.inverse() * p;
  Projection out;
  if (cam.z() <= 1e-12) {
    out.status = Visibility::behind_camera;
    return out;
  }
  const double inv_z = 1.0 / cam.z();
  out.sample.pixel = Vec2(intr.focal_length_px * cam.x() * inv_z + intr.principal_point.x(),
                          intr.focal_length_px * cam.y() * inv_z + intr.principal_point.y());
  out.sample.depth = cam.z();
  const Image& img = obs.grid.center_image();
  if (out.sample.pixel.x() < 0.0 || out.sample.pixel.y() < 0.0 ||
      out.sample.pixel.x() > double(img.width - 1) ||
      out.sample.pixel.y() > double(img.height - 1)) {
    out.status = Visibility::out_of_frame;
    return out;
  }
  out.status = Visibility::visible;
  return out;
}

std::optional<double> ray_cost(const Image& center_img, const Image& center_grad,
                               const Image& sub_img, const Image& sub_grad, const Vec2& center_px,
                               const Vec2& sub_px, const PatchSpec& spec) {
  const int r = spec.radius;
  if (!patch_in_domain(center_px.x(), center_px.y(), center_img.width, center_img.height, r) ||
      !patch_in_domain(sub_px.x(), sub_px.y(), sub_img.width, sub_img.height, r)) {
    return std::nullopt;
  }
  double color_sum = 0.0;
  double grad_sum = 0.0;
  double c_rgb[3], s_rgb[3], c_g[2], s_g[2];
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      sample_bilinear(center_img, center_px.x() + dx, center_px.y() + dy, c_rgb);
      sample_bilinear(sub_img, sub_px.x() + dx, sub_px.y() + dy, s_rgb);
      color_sum += std::abs(c_rgb[0] - s_rgb[0]) + std::abs(c_rgb[1] - s_rgb[1]) +
                   std::abs(c_rgb[2] - s_rgb[2]);
      sample_bilinear(center_grad, center_px.x() + dx, center_px.y() + dy, c_g);
      sample_bilinear(sub_grad, sub_px.x() + dx, sub_px.y() + dy, s_g);
      grad_sum += std::abs(c_g[0] - s_g[0]) + std::abs(c_g[1] - s_g[1]);
    }
  }
  const double n = double(spec.patch_pixels());
  return spec.color_weight * color_sum / (n * 3.0) + spec.gradient_weight * grad_sum / (n * 2.0);
}

int CostProfile::valid_count() const {
  int n = 0;
  for (const auto v : valid) n += v != 0;
  return n;
}

CostProfile cost_over_depths(const Vec3& p, const Observation& obs, const CameraIntrinsics& intr,
                             const DepthHypothesisSet& hyps, const PatchSpec& spec) {
  hyps.validate();
  spec.validate();
  const SubApertureGrid& grid = obs.grid;
  if (grid.view_count() <= 1) {
    throw ValidationError("cost_over_depths: aperture set has no non-center views");
  }
  const Projection proj = project_point(p, obs, intr);
  if (!proj.visible()) {
    throw ComputeError("cost_over_depths: point does not project into the view");
  }

  const int k_count = hyps.count();
  CostProfile out;
  out.costs.assign(size_t(k_count), 0.0);
  out.valid.assign(size_t(k_count), 0);

  const int total_apertures = grid.view_count() - 1;
  const Image& c_img = grid.center_image();
  const Image& c_grad = grid.center_gradient();

  for (int k = 0; k < k_count; ++k) {
    RaySample at_k{proj.sample.pixel, hyps.depths[size_t(k)]};
    double sum = 0.0;
    int valid = 0;
    for (int v = 0; v < grid.extent_v; ++v) {
      for (int u = 0; u < grid.extent_u; ++u) {
        if (u == grid.center_u && v == grid.center_v) continue;
        const Vec2 offset(double(u - grid.center_u), double(v - grid.center_v));
        const Vec2 sub_px = correspondence(at_k, offset, intr);
        const auto cost = ray_cost(c_img, c_grad, grid.image(u, v), grid.gradient(u, v),
                                   proj.sample.pixel, sub_px, spec);
        if (cost) {
          sum += *cost;
          ++valid;
        }
      }
    }
    if (valid > 0) {
      out.costs[size_t(k)] = sum * (double(total_apertures) / double(valid));
      out.valid[size_t(k)] = 1;
    }
  }
  return out;
}

}  // namespace plenograsp
