#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "plenograsp/dlv_core.hpp"

namespace plenograsp {

// Parallel-jaw gripper description. The graspable cuboid has extent L (x,
// approach) x W (y) x H (z, closing); the closing region is centered in the
// cuboid along x and the palm sits at the -x face.
struct GripperParams {
  Vec3 cuboid_extent = Vec3(0.10, 0.10, 0.06);  // L, W, H (meters)
  double finger_width = 0.01;
  double palm_depth = 0.02;

  void validate() const;
};

// Six-DoF grasp hypothesis. Gripper frame: x = approach direction, z =
// closing direction, y completes the right-handed frame (z cross x).
struct GraspCandidate {
  Pose pose = Pose::Identity();  // gripper -> world
  double confidence = 0.0;
  std::optional<bool> graspable_label;

  Vec3 approach_axis() const { return pose.linear().col(0); }
  Vec3 closing_axis() const { return pose.linear().col(2); }
};

// Builds a gripper pose from an approach direction and a closing direction
// (orthogonalized against the approach).
GraspCandidate make_candidate(const Vec3& position, const Vec3& approach, const Vec3& closing);

// Likelihoods sampled on the candidate's cuboid lattice, cell-centered:
// grid point (a, b, c) sits at local ((a+0.5)L/l - L/2, ...).
struct GraspVolume {
  Vec3i density = Vec3i::Zero();  // l, w, h
  std::vector<double> values;     // a-fastest, then b, then c
  GraspCandidate candidate;
  VolumeSpec source_spec;

  double at(int a, int b, int c) const {
    return values[size_t(a) + size_t(density.x()) * (size_t(b) + size_t(density.y()) * c)];
  }
  void validate() const;
};

// One of the nine 2-D likelihood feature maps.
struct FeatureMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major

  double at(int r, int c) const { return values[size_t(r) * cols + c]; }
};

struct AxisFeatureMaps {
  FeatureMap center_slice;   // I_c
  FeatureMap average;        // I_a
  FeatureMap slice_diff;     // I_d
};

// Nine-channel tensor, type-major order:
// [Ic_x, Ic_y, Ic_z, Ia_x, Ia_y, Ia_z, Id_x, Id_y, Id_z], each resized to
// size x size.
struct FeatureTensor {
  int size = 0;
  std::vector<float> channels;  // 9 * size * size, channel-major

  const float* channel(int c) const { return channels.data() + size_t(c) * size * size; }
  float* channel(int c) { return channels.data() + size_t(c) * size * size; }
  void validate() const;
};

enum class Axis { x = 0, y = 1, z = 2 };

// Uniform grasp candidates: positions uniform in the workspace box,
// orientations uniform over rotations; deterministic under the seed.
std::vector<GraspCandidate> sample_candidates(const VolumeSpec& workspace, int n, uint64_t seed);

// Cuboid voxelization of the DLV around a candidate. Lattice points outside
// the volume read 0. Throws when the cuboid lies entirely outside.
GraspVolume voxelize_grasp(const DepthLikelihoodVolume& dlv, const GraspCandidate& candidate,
                           const GripperParams& gripper, const Vec3i& density);

// Fraction of the candidate's lattice points falling outside the DLV bounds
// (used to prune mostly-out-of-volume candidates before classification).
double outside_fraction(const DepthLikelihoodVolume& dlv, const GraspCandidate& candidate,
                        const GripperParams& gripper, const Vec3i& density);

// I_c / I_a / I_d maps projected along `axis`; maps span the remaining two
// dimensions in (x, y, z) order. With n slices along the axis: I_c is slice
// floor(n/2), I_a the mean over slices, I_d the sum of absolute adjacent
// slice differences divided by n.
AxisFeatureMaps feature_maps(const GraspVolume& volume, Axis axis);

FeatureTensor assemble_tensor(const GraspVolume& volume, int target_size);

// Raw float32 tensor payload plus a JSON sidecar (dims, channel order,
// candidate pose) written next to it as <path>.json.
void save_tensor(const FeatureTensor& tensor, const GraspCandidate& candidate,
                 const std::filesystem::path& path, uint64_t config_hash = 0);
FeatureTensor load_tensor(const std::filesystem::path& path);

}  // namespace plenograsp
