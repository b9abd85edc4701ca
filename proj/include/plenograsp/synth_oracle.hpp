#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plenograsp/dlv_core.hpp"
#include "plenograsp/grasp_features.hpp"
#include "plenograsp/plenoptic_io.hpp"

namespace plenograsp {

// Seeded value-noise texture; pure function of (u, v, seed).
struct TextureSpec {
  uint64_t seed = 1;
  double frequency = 30.0;  // lattice cells per meter of surface coordinate
  double contrast = 0.7;    // in [0, 1]
  int octaves = 2;
  Vec3 base_color = Vec3(0.6, 0.6, 0.6);
};

Vec3 sample_texture(const TextureSpec& tex, double u, double v);

struct Material {
  enum class Kind { lambertian, transparent };
  Kind kind = Kind::lambertian;
  // Transparent coverage in [0, 1]; 0 and 1 are the fully-transparent and
  // opaque limits.
  double alpha = 1.0;
  TextureSpec texture;
};

// Scene primitives. Planes and boxes carry a local->world pose (plane is the
// rect |x| <= half_extents.x, |y| <= half_extents.y in its local z=0 plane);
// cylinders are world-vertical shells (wall_thickness 0 means solid).
struct Primitive {
  enum class Kind { plane, box, cylinder };
  Kind kind = Kind::plane;
  std::string id;
  Material material;

  Pose pose = Pose::Identity();          // plane, box
  Vec3 half_extents = Vec3(0.5, 0.5, 0.5);  // plane uses x, y only

  Vec3 base_center = Vec3::Zero();  // cylinder: center of the base circle
  double radius = 0.05;
  double height = 0.1;
  double wall_thickness = 0.0;
};

// View-dependent saturated highlight rendered as an additive overlay whose
// parallax is consistent with its 3-D center (the "virtual surface" a strong
// reflection induces).
struct SpecularBlob {
  Vec3 center = Vec3::Zero();
  double radius = 0.01;     // meters, ray-to-center distance support
  double intensity = 2.0;
  Vec3 direction = Vec3(0, 0, -1);  // preferred ray direction
  double exponent = 60.0;           // alignment falloff sharpness
};

struct SceneDescription {
  std::vector<Primitive> surfaces;
  std::vector<SpecularBlob> blobs;
  double table_height = 0.0;
  Vec3 background = Vec3(0.05, 0.05, 0.05);

  void validate() const;
};

SceneDescription load_scene(const std::filesystem::path& path);
void save_scene(const SceneDescription& scene, const std::filesystem::path& path);

// One straight ray per pixel per aperture; aperture offsets displace the
// pinhole center so that disparity follows the linear baseline model exactly.
// Transparent surfaces alpha-composite front to back over the first opaque
// hit; blobs add clamped highlights. Channels are quantized to the 8-bit
// lattice so a saved-and-reloaded bundle is bit-identical.
Observation render_observation(const SceneDescription& scene, const Pose& camera_pose,
                               const CameraIntrinsics& intr, int extent_u, int extent_v,
                               const std::string& id);

ObservationSet render_observation_set(const SceneDescription& scene,
                                      const std::vector<Pose>& camera_poses,
                                      const CameraIntrinsics& intr, int extent_u, int extent_v);

// Camera ring around `target`: evenly spaced azimuths at the given radius and
// height above the target, each looking at the target.
std::vector<Pose> ring_poses(const Vec3& target, double radius, double height, int count,
                             double start_angle = 0.0);

// Reference evaluation of the depth likelihood of a single point: direct
// loops over views, hypotheses, and apertures with its own projection and
// normalization arithmetic. Shares only the ray-cost primitive with the
// engine; used as the independent oracle the volume builder is checked
// against.
double brute_force_likelihood(const Vec3& p, const ObservationSet& obs_set,
                              const DepthHypothesisSet& hyps, const PatchSpec& patch);

struct OracleGraspReport {
  bool graspable = false;
  enum class Reason { force_closure_ok, no_contact, non_antipodal, collision };
  Reason reason = Reason::no_contact;
};

const char* to_string(OracleGraspReport::Reason r);

// Ground-truth grasp test: collision of the swept palm/finger solids against
// every surface (transparent ones are solid for contact), then an antipodal
// contact pair inside the closing prism with both normals within a 10-degree
// cone of the closing axis and on the same primitive.
OracleGraspReport oracle_grasp_label(const GraspCandidate& candidate, const GripperParams& gripper,
                                     const SceneDescription& scene, double sample_pitch = 0.004);

// Object-local grasp proposals for dataset bootstrapping: jittered side-on
// poses around each cylinder. Labels are not assigned here. Wider jitter
// yields harder (often non-graspable) poses near the objects.
struct ProposalJitter {
  double position_sigma = 0.002;  // meters
  double rotation_sigma = 0.05;   // radians per roll/pitch/yaw
};

std::vector<GraspCandidate> scene_grasp_proposals(const SceneDescription& scene,
                                                  const GripperParams& gripper, int per_object,
                                                  uint64_t seed,
                                                  const ProposalJitter& jitter = {});

}  // namespace plenograsp
