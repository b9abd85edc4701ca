#pragma once

#include <filesystem>

#include "plenograsp/lf_geometry.hpp"

namespace plenograsp {

// Axis-aligned voxelization of the grasping workspace. Voxel (ix, iy, iz) is
// centered at origin + ((i + 0.5) * extent / resolution) per axis; values are
// stored x-fastest.
struct VolumeSpec {
  Vec3 origin = Vec3::Zero();
  Vec3 extent = Vec3::Ones();
  Vec3i resolution = Vec3i(128, 128, 128);

  void validate() const;
  Vec3 voxel_size() const {
    return Vec3(extent.x() / resolution.x(), extent.y() / resolution.y(),
                extent.z() / resolution.z());
  }
  int64_t voxel_count() const {
    return int64_t(resolution.x()) * resolution.y() * resolution.z();
  }
  int64_t linear_index(int ix, int iy, int iz) const {
    return int64_t(ix) + int64_t(resolution.x()) * (int64_t(iy) + int64_t(resolution.y()) * iz);
  }
  Vec3 voxel_center(int ix, int iy, int iz) const {
    const Vec3 h = voxel_size();
    return origin + Vec3((ix + 0.5) * h.x(), (iy + 0.5) * h.y(), (iz + 0.5) * h.z());
  }
  bool contains(const Vec3& p) const {
    const Vec3 d = p - origin;
    return d.x() >= 0.0 && d.y() >= 0.0 && d.z() >= 0.0 && d.x() <= extent.x() &&
           d.y() <= extent.y() && d.z() <= extent.z();
  }
  bool operator==(const VolumeSpec& o) const {
    return origin == o.origin && extent == o.extent && resolution == o.resolution;
  }
};

struct DepthLikelihoodVolume {
  VolumeSpec spec;
  int view_count = 0;
  std::vector<double> values;  // x-fastest, one likelihood per voxel

  double at(int ix, int iy, int iz) const { return values[size_t(spec.linear_index(ix, iy, iz))]; }
  void validate() const;
};

struct SuppressionConfig {
  double variance_threshold = 1.0;  // tau; used when auto_threshold is off
  bool auto_threshold = true;       // tau = auto_multiplier * median voxel variance
  double auto_multiplier = 4.0;
  double saturation_threshold = 0.98;  // max-channel luminance gate
  double likelihood_floor = 1e-4;
  // Range of the depth-axis peak test: hypotheses with depth <= d when true,
  // the whole hypothesis set otherwise.
  bool prefix_range_only = true;
  // Contaminated-ray masks are dilated by this many pixels; patch costs smear
  // specular evidence onto neighboring rays.
  int mask_dilation = 1;

  void validate() const;
};

// Likelihood of the cost at `selected_index`: (max valid cost - selected) /
// sum of valid costs. Zero (with *evidence = false) when the selected entry
// is invalid or no evidence exists.
double normalize_costs(const CostProfile& profile, int selected_index, bool* evidence = nullptr);

// Per-view likelihood terms of a single world point: f(cost profile at the
// snapped hypothesis) for every view the point projects into. The sum of the
// returned terms is the point's DLV value.
std::vector<double> per_view_likelihoods(const Vec3& p, const ObservationSet& obs_set,
                                         const DepthHypothesisSet& hyps, const PatchSpec& patch);

double point_likelihood(const Vec3& p, const ObservationSet& obs_set,
                        const DepthHypothesisSet& hyps, const PatchSpec& patch);

// Dense DLV construction: per voxel and view, the aperture-summed cost swept
// over all hypotheses is normalized at the hypothesis nearest the voxel's
// camera depth, and normalized terms are summed across views. Voxels visible
// in no view hold 0. Deterministic and independent of `workers`.
DepthLikelihoodVolume build_dlv(const ObservationSet& obs_set, const VolumeSpec& spec,
                                const DepthHypothesisSet& hyps, const PatchSpec& patch,
                                int workers = 0);

// Specular-evidence removal. Saturated, high-likelihood voxels whose
// cross-view/cross-aperture ray-difference variance exceeds tau are tested
// per view: if the view's cost at the voxel's snapped depth is the minimum
// among hypotheses at depths <= d (the likelihood peak along the pixel's
// depth axis), that center-view ray is marked as reflection evidence and
// excluded from the volume wherever it contributes; affected voxels are
// recomputed from the remaining views. Never increases any voxel.
DepthLikelihoodVolume suppress_reflections(const DepthLikelihoodVolume& dlv,
                                           const ObservationSet& obs_set,
                                           const DepthHypothesisSet& hyps, const PatchSpec& patch,
                                           const SuppressionConfig& cfg, int workers = 0);

// Trilinear interpolation over the eight voxels surrounding `p` (linear
// extrapolation inside the half-voxel border shell). Outside the volume
// bounds returns 0 and clears *inside.
double query(const DepthLikelihoodVolume& dlv, const Vec3& p, bool* inside = nullptr);

// Optional view-count normalization (values scaled to [0, 1)).
void normalize_by_views(DepthLikelihoodVolume& dlv);

// ".dlv" binary format: magic DLV1, little-endian header, float32 payload in
// x-fastest order. Saving quantizes the in-memory float64 values to float32.
void save_dlv(const DepthLikelihoodVolume& dlv, const std::filesystem::path& path,
              uint64_t config_hash = 0);
DepthLikelihoodVolume load_dlv(const std::filesystem::path& path);

// Grayscale z-slice, likelihood linearly mapped to [0, 255] against the
// volume maximum.
Image dlv_slice(const DepthLikelihoodVolume& dlv, int z_index);

}  // namespace plenograsp
