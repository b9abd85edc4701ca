#include "plenograsp/dlv_core.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>

#include "plenograsp/errors.hpp"
#include "plenograsp/threading.hpp"

namespace plenograsp {

void VolumeSpec::validate() const {
  if (!(extent.x() > 0.0 && extent.y() > 0.0 && extent.z() > 0.0)) {
    throw ValidationError("volume: extent must be positive");
  }
  if (resolution.x() < 2 || resolution.y() < 2 || resolution.z() < 2) {
    throw ValidationError("volume: resolution must be >= 2 per axis");
  }
}

void DepthLikelihoodVolume::validate() const {
  spec.validate();
  if (int64_t(values.size()) != spec.voxel_count()) {
    throw ValidationError("volume: value count does not match resolution");
  }
  for (const double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError("volume: values must be finite and nonnegative");
    }
  }
}

void SuppressionConfig::validate() const {
  if (!auto_threshold && !(variance_threshold > 0.0)) {
    throw ValidationError("suppression: variance threshold must be positive");
  }
  if (auto_threshold && !(auto_multiplier > 0.0)) {
    throw ValidationError("suppression: auto multiplier must be positive");
  }
  if (!(saturation_threshold > 0.0) || saturation_threshold > 1.0) {
    throw ValidationError("suppression: saturation threshold must be in (0, 1]");
  }
  if (likelihood_floor < 0.0) throw ValidationError("suppression: negative likelihood floor");
  if (mask_dilation < 0) throw ValidationError("suppression: negative mask dilation");
}

double normalize_costs(const CostProfile& profile, int selected_index, bool* evidence) {
  if (evidence) *evidence = false;
  if (selected_index < 0 || selected_index >= int(profile.costs.size())) {
    throw ValidationError("normalize_costs: selected index out of range");
  }
  if (!profile.valid[size_t(selected_index)]) return 0.0;
  double max_cost = 0.0;
  double sum = 0.0;
  bool any = false;
  for (size_t k = 0; k < profile.costs.size(); ++k) {
    if (!profile.valid[k]) continue;
    const double c = profile.costs[k];
    max_cost = any ? std::max(max_cost, c) : c;
    sum += c;
    any = true;
  }
  if (!any || sum <= 0.0) return 0.0;
  if (evidence) *evidence = true;
  return (max_cost - profile.costs[size_t(selected_index)]) / sum;
}

std::vector<double> per_view_likelihoods(const Vec3& p, const ObservationSet& obs_set,
                                         const DepthHypothesisSet& hyps, const PatchSpec& patch) {
  std::vector<double> terms(obs_set.observations.size(), 0.0);
  for (size_t i = 0; i < obs_set.observations.size(); ++i) {
    const Observation& obs = obs_set.observations[i];
    const Projection proj = project_point(p, obs, obs_set.intrinsics);
    if (!proj.visible()) continue;
    const CostProfile profile = cost_over_depths(p, obs, obs_set.intrinsics, hyps, patch);
    terms[i] = normalize_costs(profile, hyps.nearest_index(proj.sample.depth));
  }
  return terms;
}

double point_likelihood(const Vec3& p, const ObservationSet& obs_set,
                        const DepthHypothesisSet& hyps, const PatchSpec& patch) {
  double sum = 0.0;
  for (const double t : per_view_likelihoods(p, obs_set, hyps, patch)) sum += t;
  return sum;
}

namespace {

// Precomputed per-view state for the dense sweeps.
struct ViewContext {
  Pose world_to_cam;
  const Image* c_img = nullptr;
  const Image* c_grad = nullptr;
  struct Aperture {
    const Image* img;
    const Image* grad;
    Vec2 offset;  // integer aperture offset from center
  };
  std::vector<Aperture> apertures;  // ascending (v, u), center skipped
};

std::vector<ViewContext> make_contexts(const ObservationSet& set) {
  std::vector<ViewContext> out;
  out.reserve(set.observations.size());
  for (const auto& obs : set.observations) {
    ViewContext ctx;
    ctx.world_to_cam = obs.pose.inverse();
    ctx.c_img = &obs.grid.center_image();
    ctx.c_grad = &obs.grid.center_gradient();
    for (int v = 0; v < obs.grid.extent_v; ++v) {
      for (int u = 0; u < obs.grid.extent_u; ++u) {
        if (u == obs.grid.center_u && v == obs.grid.center_v) continue;
        ctx.apertures.push_back({&obs.grid.image(u, v), &obs.grid.gradient(u, v),
                                 Vec2(double(u - obs.grid.center_u), double(v - obs.grid.center_v))});
      }
    }
    out.push_back(std::move(ctx));
  }
  return out;
}

// Center patch samples cached once per (voxel, view). Sample order mirrors
// ray_cost: dy outer, dx inner; rgb then gradient per offset.
struct CenterPatch {
  std::vector<std::array<double, 5>> taps;  // r, g, b, gx, gy
};

void sample_center_patch(const ViewContext& ctx, const Vec2& px, int radius, CenterPatch& out) {
  out.taps.clear();
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      std::array<double, 5> tap{};
      sample_bilinear(*ctx.c_img, px.x() + dx, px.y() + dy, tap.data());
      sample_bilinear(*ctx.c_grad, px.x() + dx, px.y() + dy, tap.data() + 3);
      out.taps.push_back(tap);
    }
  }
}

// Patch cost against a cached center patch; term order mirrors ray_cost so
// both evaluation routes agree to rounding error.
inline bool cached_patch_cost(const CenterPatch& cp, const ViewContext::Aperture& ap,
                              double sx, double sy, const PatchSpec& spec, double* out) {
  const int r = spec.radius;
  if (!patch_in_domain(sx, sy, ap.img->width, ap.img->height, r)) return false;
  double color_sum = 0.0;
  double grad_sum = 0.0;
  double s_rgb[3], s_g[2];
  size_t tap = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx, ++tap) {
      const auto& c = cp.taps[tap];
      sample_bilinear(*ap.img, sx + dx, sy + dy, s_rgb);
      color_sum +=
          std::abs(c[0] - s_rgb[0]) + std::abs(c[1] - s_rgb[1]) + std::abs(c[2] - s_rgb[2]);
      sample_bilinear(*ap.grad, sx + dx, sy + dy, s_g);
      grad_sum += std::abs(c[3] - s_g[0]) + std::abs(c[4] - s_g[1]);
    }
  }
  const double n = double(spec.patch_pixels());
  *out = spec.color_weight * color_sum / (n * 3.0) +
         spec.gradient_weight * grad_sum / (n * 2.0);
  return true;
}

// Scratch buffers reused across voxels within one worker.
struct SweepScratch {
  CenterPatch center;
  std::vector<double> sums;
  std::vector<int> counts;
};

// Full cost profile of one (point, view) pair.
void sweep_profile(const ViewContext& ctx, const Vec2& pixel, const DepthHypothesisSet& hyps,
                   const PatchSpec& spec, const std::vector<double>& disparity_factor,
                   SweepScratch& scratch, CostProfile& profile) {
  const int k_count = hyps.count();
  scratch.sums.assign(size_t(k_count), 0.0);
  scratch.counts.assign(size_t(k_count), 0);
  sample_center_patch(ctx, pixel, spec.radius, scratch.center);

  for (const auto& ap : ctx.apertures) {
    for (int k = 0; k < k_count; ++k) {
      const double f = disparity_factor[size_t(k)];
      const double sx = pixel.x() + ap.offset.x() * f;
      const double sy = pixel.y() + ap.offset.y() * f;
      double cost;
      if (!cached_patch_cost(scratch.center, ap, sx, sy, spec, &cost)) continue;
      scratch.sums[size_t(k)] += cost;
      scratch.counts[size_t(k)] += 1;
    }
  }

  const double total = double(ctx.apertures.size());
  profile.costs.assign(size_t(k_count), 0.0);
  profile.valid.assign(size_t(k_count), 0);
  for (int k = 0; k < k_count; ++k) {
    if (scratch.counts[size_t(k)] > 0) {
      profile.costs[size_t(k)] =
          scratch.sums[size_t(k)] * (total / double(scratch.counts[size_t(k)]));
      profile.valid[size_t(k)] = 1;
    }
  }
}

}  // namespace

DepthLikelihoodVolume build_dlv(const ObservationSet& obs_set, const VolumeSpec& spec,
                                const DepthHypothesisSet& hyps, const PatchSpec& patch,
                                int workers) {
  obs_set.validate();
  spec.validate();
  hyps.validate();
  patch.validate();

  const auto contexts = make_contexts(obs_set);
  const CameraIntrinsics& intr = obs_set.intrinsics;
  const int n_views = int(contexts.size());
  const int64_t count = spec.voxel_count();
  const int nx = spec.resolution.x();
  const int ny = spec.resolution.y();

  std::vector<double> disparity_factor(size_t(hyps.count()));
  for (int k = 0; k < hyps.count(); ++k) {
    disparity_factor[size_t(k)] = intr.aperture_baseline / hyps.depths[size_t(k)];
  }

  DepthLikelihoodVolume out;
  out.spec = spec;
  out.view_count = n_views;
  out.values.assign(size_t(count), 0.0);

  const int n_workers = resolve_workers(workers);
  std::vector<int64_t> hits(size_t(n_workers) * n_views, 0);

  parallel_chunks(count, n_workers, [&](int w, int64_t begin, int64_t end) {
    SweepScratch scratch;
    CostProfile profile;
    for (int64_t idx = begin; idx < end; ++idx) {
      const int iz = int(idx / (int64_t(nx) * ny));
      const int rem = int(idx % (int64_t(nx) * ny));
      const int iy = rem / nx;
      const int ix = rem % nx;
      const Vec3 p = spec.voxel_center(ix, iy, iz);

      double likelihood = 0.0;
      for (int i = 0; i < n_views; ++i) {
        const ViewContext& ctx = contexts[size_t(i)];
        const Vec3 cam = ctx.world_to_cam * p;
        if (cam.z() <= 1e-12) continue;
        const double inv_z = 1.0 / cam.z();
        const Vec2 pixel(intr.focal_length_px * cam.x() * inv_z + intr.principal_point.x(),
                         intr.focal_length_px * cam.y() * inv_z + intr.principal_point.y());
        if (!patch_in_domain(pixel.x(), pixel.y(), ctx.c_img->width, ctx.c_img->height,
                             patch.radius)) {
          continue;
        }
        hits[size_t(w) * n_views + size_t(i)] += 1;
        sweep_profile(ctx, pixel, hyps, patch, disparity_factor, scratch, profile);
        likelihood += normalize_costs(profile, hyps.nearest_index(cam.z()));
      }
      out.values[size_t(idx)] = likelihood;
    }
  });

  for (int i = 0; i < n_views; ++i) {
    int64_t total = 0;
    for (int w = 0; w < n_workers; ++w) total += hits[size_t(w) * n_views + size_t(i)];
    if (total == 0) {
      throw ComputeError("workspace outside visual hull (view '" +
                         obs_set.observations[size_t(i)].id + "' sees no voxel)");
    }
  }
  return out;
}

namespace {

// Max-channel luminance of the center view at a subpixel location.
double center_saturation(const ViewContext& ctx, const Vec2& px) {
  double rgb[3];
  sample_bilinear(*ctx.c_img, px.x(), px.y(), rgb);
  return std::max(rgb[0], std::max(rgb[1], rgb[2]));
}

struct VoxelViewState {
  bool visible = false;
  bool saturated = false;
  Vec2 pixel = Vec2::Zero();
  int k_sel = 0;
};

}  // namespace

DepthLikelihoodVolume suppress_reflections(const DepthLikelihoodVolume& dlv,
                                           const ObservationSet& obs_set,
                                           const DepthHypothesisSet& hyps, const PatchSpec& patch,
                                           const SuppressionConfig& cfg, int workers) {
  obs_set.validate();
  hyps.validate();
  patch.validate();
  cfg.validate();
  dlv.validate();
  if (dlv.view_count != int(obs_set.observations.size())) {
    throw ValidationError("suppress: volume was built from a different observation set");
  }

  const auto contexts = make_contexts(obs_set);
  const CameraIntrinsics& intr = obs_set.intrinsics;
  const int n_views = int(contexts.size());
  const VolumeSpec& spec = dlv.spec;
  const int64_t count = spec.voxel_count();
  const int nx = spec.resolution.x();
  const int ny = spec.resolution.y();

  std::vector<double> disparity_factor(size_t(hyps.count()));
  for (int k = 0; k < hyps.count(); ++k) {
    disparity_factor[size_t(k)] = intr.aperture_baseline / hyps.depths[size_t(k)];
  }

  int total_aperture_terms = 0;
  for (const auto& ctx : contexts) total_aperture_terms += int(ctx.apertures.size());

  auto locate_views = [&](const Vec3& p, std::vector<VoxelViewState>& states) {
    states.assign(size_t(n_views), VoxelViewState{});
    for (int i = 0; i < n_views; ++i) {
      const ViewContext& ctx = contexts[size_t(i)];
      const Vec3 cam = ctx.world_to_cam * p;
      if (cam.z() <= 1e-12) continue;
      const double inv_z = 1.0 / cam.z();
      const Vec2 pixel(intr.focal_length_px * cam.x() * inv_z + intr.principal_point.x(),
                       intr.focal_length_px * cam.y() * inv_z + intr.principal_point.y());
      if (!patch_in_domain(pixel.x(), pixel.y(), ctx.c_img->width, ctx.c_img->height,
                           patch.radius)) {
        continue;
      }
      auto& st = states[size_t(i)];
      st.visible = true;
      st.pixel = pixel;
      st.k_sel = hyps.nearest_index(cam.z());
      st.saturated = center_saturation(ctx, pixel) >= cfg.saturation_threshold;
    }
  };

  // Pass 1: cross-view/cross-aperture ray-difference variance per voxel,
  // mean normalized by the full N * (N(A) - 1) term count.
  // Voxels whose selected-depth cost is a per-view profile minimum form the
  // surface-consistent population the adaptive threshold is calibrated on;
  // off-surface voxels carry large, unstructured ray differences that would
  // otherwise dominate the median.
  std::vector<double> variances(size_t(count), -1.0);
  std::vector<uint8_t> candidate(size_t(count), 0);
  std::vector<uint8_t> surface_like(size_t(count), 0);

  parallel_chunks(count, workers, [&](int, int64_t begin, int64_t end) {
    SweepScratch scratch;
    CostProfile profile;
    std::vector<VoxelViewState> states;
    std::vector<double> t_terms;
    for (int64_t idx = begin; idx < end; ++idx) {
      const int iz = int(idx / (int64_t(nx) * ny));
      const int rem = int(idx % (int64_t(nx) * ny));
      const int iy = rem / nx;
      const int ix = rem % nx;
      const Vec3 p = spec.voxel_center(ix, iy, iz);
      locate_views(p, states);

      t_terms.clear();
      bool any_saturated = false;
      bool any_surface_like = false;
      for (int i = 0; i < n_views; ++i) {
        const auto& st = states[size_t(i)];
        if (!st.visible) continue;
        any_saturated = any_saturated || st.saturated;
        const ViewContext& ctx = contexts[size_t(i)];
        sample_center_patch(ctx, st.pixel, patch.radius, scratch.center);
        for (const auto& ap : ctx.apertures) {
          const Vec2 sub = st.pixel + ap.offset * disparity_factor[size_t(st.k_sel)];
          double cost;
          if (cached_patch_cost(scratch.center, ap, sub.x(), sub.y(), patch, &cost)) {
            t_terms.push_back(cost);
          }
        }
        sweep_profile(ctx, st.pixel, hyps, patch, disparity_factor, scratch, profile);
        if (profile.valid[size_t(st.k_sel)]) {
          double min_cost = 1e300;
          for (int k = 0; k < hyps.count(); ++k) {
            if (profile.valid[size_t(k)]) min_cost = std::min(min_cost, profile.costs[size_t(k)]);
          }
          any_surface_like =
              any_surface_like || profile.costs[size_t(st.k_sel)] <= min_cost + 1e-12;
        }
      }
      if (t_terms.empty()) continue;
      // Mean per the fixed normalizer N * (N(A) - 1) over all ray terms,
      // valid or not; the variance sums squared deviations of the valid ones.
      double mean = 0.0;
      for (const double t : t_terms) mean += t;
      mean /= double(total_aperture_terms);
      double var = 0.0;
      for (const double t : t_terms) var += (t - mean) * (t - mean);
      variances[size_t(idx)] = var;
      surface_like[size_t(idx)] = any_surface_like ? 1 : 0;
      candidate[size_t(idx)] =
          any_saturated && dlv.values[size_t(idx)] > cfg.likelihood_floor ? 1 : 0;
    }
  });

  double tau = cfg.variance_threshold;
  if (cfg.auto_threshold) {
    std::vector<double> observed;
    observed.reserve(size_t(count));
    for (int64_t i = 0; i < count; ++i) {
      if (variances[size_t(i)] >= 0.0 && surface_like[size_t(i)]) {
        observed.push_back(variances[size_t(i)]);
      }
    }
    if (!observed.empty()) {
      const size_t mid = observed.size() / 2;
      std::nth_element(observed.begin(), observed.begin() + long(mid), observed.end());
      tau = cfg.auto_multiplier * observed[mid];
    }
    if (!(tau > 0.0)) tau = 1e-12;
  }

  DepthLikelihoodVolume out = dlv;

  // Pass 2: depth-axis likelihood-peak test on the gated voxels. A firing
  // (voxel, view) pair marks the whole center-view ray as reflection
  // evidence; contaminated rays are excluded from the volume wherever they
  // contribute.
  const int n_workers = resolve_workers(workers);
  const size_t n_views_sz = size_t(n_views);
  const size_t n_workers_sz = size_t(n_workers);
  std::vector<std::vector<uint8_t>> ray_masks(n_views_sz);
  std::vector<std::vector<std::vector<uint8_t>>> worker_masks(n_workers_sz);
  for (auto& masks : worker_masks) {
    masks.resize(size_t(n_views));
    for (int i = 0; i < n_views; ++i) {
      masks[size_t(i)].assign(size_t(contexts[size_t(i)].c_img->width) *
                                  contexts[size_t(i)].c_img->height,
                              0);
    }
  }

  parallel_chunks(count, n_workers, [&](int w, int64_t begin, int64_t end) {
    SweepScratch scratch;
    CostProfile profile;
    std::vector<VoxelViewState> states;
    for (int64_t idx = begin; idx < end; ++idx) {
      if (!candidate[size_t(idx)] || variances[size_t(idx)] <= tau) continue;
      const int iz = int(idx / (int64_t(nx) * ny));
      const int rem = int(idx % (int64_t(nx) * ny));
      const int iy = rem / nx;
      const int ix = rem % nx;
      const Vec3 p = spec.voxel_center(ix, iy, iz);
      locate_views(p, states);

      for (int i = 0; i < n_views; ++i) {
        const auto& st = states[size_t(i)];
        if (!st.visible || !st.saturated) continue;
        sweep_profile(contexts[size_t(i)], st.pixel, hyps, patch, disparity_factor, scratch,
                      profile);
        if (!profile.valid[size_t(st.k_sel)]) continue;
        const double sel_cost = profile.costs[size_t(st.k_sel)];
        double prefix_min = sel_cost;
        const double d_sel = hyps.depths[size_t(st.k_sel)];
        for (int k = 0; k < hyps.count(); ++k) {
          if (!profile.valid[size_t(k)]) continue;
          if (cfg.prefix_range_only && hyps.depths[size_t(k)] > d_sel) continue;
          prefix_min = std::min(prefix_min, profile.costs[size_t(k)]);
        }
        if (sel_cost <= prefix_min + 1e-12) {
          const int px = int(std::lround(st.pixel.x()));
          const int py = int(std::lround(st.pixel.y()));
          const int width = contexts[size_t(i)].c_img->width;
          const int height = contexts[size_t(i)].c_img->height;
          if (px >= 0 && py >= 0 && px < width && py < height) {
            worker_masks[size_t(w)][size_t(i)][size_t(py) * width + px] = 1;
          }
        }
      }
    }
  });

  bool any_marked = false;
  for (int i = 0; i < n_views; ++i) {
    auto& mask = ray_masks[size_t(i)];
    mask.assign(worker_masks[0][size_t(i)].size(), 0);
    for (int w = 0; w < n_workers; ++w) {
      const auto& part = worker_masks[size_t(w)][size_t(i)];
      for (size_t j = 0; j < mask.size(); ++j) mask[j] |= part[j];
    }
    if (cfg.mask_dilation > 0) {
      const int width = contexts[size_t(i)].c_img->width;
      const int height = contexts[size_t(i)].c_img->height;
      const int r = cfg.mask_dilation;
      std::vector<uint8_t> dilated = mask;
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          if (!mask[size_t(y) * width + x]) continue;
          for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
              const int nxp = x + dx;
              const int nyp = y + dy;
              if (nxp >= 0 && nyp >= 0 && nxp < width && nyp < height) {
                dilated[size_t(nyp) * width + nxp] = 1;
              }
            }
          }
        }
      }
      mask = std::move(dilated);
    }
    for (const auto m : mask) any_marked = any_marked || m;
  }
  if (!any_marked) return out;

  // Pass 3: recompute every voxel that touches a contaminated ray from the
  // remaining views.
  parallel_chunks(count, n_workers, [&](int, int64_t begin, int64_t end) {
    SweepScratch scratch;
    CostProfile profile;
    std::vector<VoxelViewState> states;
    for (int64_t idx = begin; idx < end; ++idx) {
      const int iz = int(idx / (int64_t(nx) * ny));
      const int rem = int(idx % (int64_t(nx) * ny));
      const int iy = rem / nx;
      const int ix = rem % nx;
      const Vec3 p = spec.voxel_center(ix, iy, iz);
      locate_views(p, states);

      bool any_excluded = false;
      for (int i = 0; i < n_views && !any_excluded; ++i) {
        const auto& st = states[size_t(i)];
        if (!st.visible) continue;
        const int width = contexts[size_t(i)].c_img->width;
        const int px = int(std::lround(st.pixel.x()));
        const int py = int(std::lround(st.pixel.y()));
        any_excluded = ray_masks[size_t(i)][size_t(py) * width + px] != 0;
      }
      if (!any_excluded) continue;

      double recomputed = 0.0;
      for (int i = 0; i < n_views; ++i) {
        const auto& st = states[size_t(i)];
        if (!st.visible) continue;
        const int width = contexts[size_t(i)].c_img->width;
        const int px = int(std::lround(st.pixel.x()));
        const int py = int(std::lround(st.pixel.y()));
        if (ray_masks[size_t(i)][size_t(py) * width + px]) continue;  // excluded ray
        sweep_profile(contexts[size_t(i)], st.pixel, hyps, patch, disparity_factor, scratch,
                      profile);
        recomputed += normalize_costs(profile, st.k_sel);
      }
      out.values[size_t(idx)] = recomputed;
    }
  });

  return out;
}

double query(const DepthLikelihoodVolume& dlv, const Vec3& p, bool* inside) {
  const VolumeSpec& spec = dlv.spec;
  if (!spec.contains(p)) {
    if (inside) *inside = false;
    return 0.0;
  }
  if (inside) *inside = true;
  const Vec3 h = spec.voxel_size();
  const Vec3 rel = p - spec.origin;
  double u[3] = {rel.x() / h.x() - 0.5, rel.y() / h.y() - 0.5, rel.z() / h.z() - 0.5};
  int i0[3];
  double f[3];
  const int n[3] = {spec.resolution.x(), spec.resolution.y(), spec.resolution.z()};
  for (int a = 0; a < 3; ++a) {
    int cell = int(std::floor(u[a]));
    cell = std::clamp(cell, 0, n[a] - 2);
    i0[a] = cell;
    f[a] = u[a] - cell;  // outside [0,1] in the border half-shell: extrapolates
  }
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? f[2] : 1.0 - f[2];
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? f[1] : 1.0 - f[1];
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? f[0] : 1.0 - f[0];
        acc += wx * wy * wz * dlv.at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
      }
    }
  }
  return acc > 0.0 ? acc : 0.0;
}

void normalize_by_views(DepthLikelihoodVolume& dlv) {
  if (dlv.view_count <= 0) return;
  const double inv = 1.0 / double(dlv.view_count);
  for (auto& v : dlv.values) v *= inv;
}

namespace {

template <typename T>
void write_raw(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_raw(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  return bool(f);
}

}  // namespace

void save_dlv(const DepthLikelihoodVolume& dlv, const std::filesystem::path& path,
              uint64_t config_hash) {
  dlv.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write volume file: " + path.string());
  f.write("DLV1", 4);
  write_raw(f, uint32_t(1));
  write_raw(f, config_hash);
  for (int a = 0; a < 3; ++a) write_raw(f, double(dlv.spec.origin[a]));
  for (int a = 0; a < 3; ++a) write_raw(f, double(dlv.spec.extent[a]));
  for (int a = 0; a < 3; ++a) write_raw(f, uint32_t(dlv.spec.resolution[a]));
  write_raw(f, uint32_t(dlv.view_count));
  for (const double v : dlv.values) write_raw(f, float(v));
  if (!f) throw ComputeError("short write: " + path.string());
}

DepthLikelihoodVolume load_dlv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open volume file: " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "DLV1", 4) != 0) {
    throw ValidationError("corrupt volume: magic mismatch in " + path.string());
  }
  uint32_t version = 0;
  uint64_t config_hash = 0;
  if (!read_raw(f, version)) throw ValidationError("corrupt volume: truncated header");
  if (version != 1) {
    throw ValidationError("unsupported version " + std::to_string(version) + " in " +
                          path.string());
  }
  if (!read_raw(f, config_hash)) throw ValidationError("corrupt volume: truncated header");
  DepthLikelihoodVolume dlv;
  double vals[3];
  for (int a = 0; a < 3; ++a) {
    if (!read_raw(f, vals[a])) throw ValidationError("corrupt volume: truncated header");
  }
  dlv.spec.origin = Vec3(vals[0], vals[1], vals[2]);
  for (int a = 0; a < 3; ++a) {
    if (!read_raw(f, vals[a])) throw ValidationError("corrupt volume: truncated header");
  }
  dlv.spec.extent = Vec3(vals[0], vals[1], vals[2]);
  uint32_t res[3];
  for (int a = 0; a < 3; ++a) {
    if (!read_raw(f, res[a])) throw ValidationError("corrupt volume: truncated header");
  }
  dlv.spec.resolution = Vec3i(int(res[0]), int(res[1]), int(res[2]));
  uint32_t views = 0;
  if (!read_raw(f, views)) throw ValidationError("corrupt volume: truncated header");
  dlv.view_count = int(views);
  dlv.spec.validate();
  const int64_t count = dlv.spec.voxel_count();
  dlv.values.resize(size_t(count));
  for (int64_t i = 0; i < count; ++i) {
    float v = 0.0f;
    if (!read_raw(f, v)) throw ValidationError("corrupt volume: truncated payload");
    dlv.values[size_t(i)] = double(v);
  }
  dlv.validate();
  return dlv;
}

Image dlv_slice(const DepthLikelihoodVolume& dlv, int z_index) {
  if (z_index < 0 || z_index >= dlv.spec.resolution.z()) {
    throw ValidationError("slice index out of range");
  }
  double max_v = 0.0;
  for (const double v : dlv.values) max_v = std::max(max_v, v);
  Image img(dlv.spec.resolution.x(), dlv.spec.resolution.y(), 1);
  for (int iy = 0; iy < dlv.spec.resolution.y(); ++iy) {
    for (int ix = 0; ix < dlv.spec.resolution.x(); ++ix) {
      const double v = dlv.at(ix, iy, z_index);
      img.at(ix, iy)[0] = max_v > 0.0 ? float(v / max_v) : 0.0f;
    }
  }
  return img;
}

}  // namespace plenograsp
