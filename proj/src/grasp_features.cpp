#include "plenograsp/grasp_features.hpp"

#include <json.hpp>

#include <fstream>

#include "plenograsp/errors.hpp"
#include "plenograsp/rng.hpp"

namespace plenograsp {

using nlohmann::json;

void GripperParams::validate() const {
  if (!(cuboid_extent.x() > 0.0 && cuboid_extent.y() > 0.0 && cuboid_extent.z() > 0.0)) {
    throw ValidationError("gripper: cuboid extent must be positive");
  }
  if (!(finger_width > 0.0) || !(palm_depth > 0.0)) {
    throw ValidationError("gripper: finger width and palm depth must be positive");
  }
}

void GraspVolume::validate() const {
  if (density.x() < 1 || density.y() < 1 || density.z() < 1) {
    throw ValidationError("grasp volume: density must be positive");
  }
  if (values.size() != size_t(density.x()) * density.y() * density.z()) {
    throw ValidationError("grasp volume: value count does not match density");
  }
}

void FeatureTensor::validate() const {
  if (size < 1) throw ValidationError("feature tensor: empty");
  if (channels.size() != size_t(9) * size * size) {
    throw ValidationError("feature tensor: expected 9 channels of size^2 values");
  }
  for (const float v : channels) {
    if (!(v >= 0.0f) || !std::isfinite(v)) {
      throw ValidationError("feature tensor: values must be finite and nonnegative");
    }
  }
}

GraspCandidate make_candidate(const Vec3& position, const Vec3& approach, const Vec3& closing) {
  const Vec3 x = approach.normalized();
  Vec3 z = closing - closing.dot(x) * x;
  if (z.norm() < 1e-9) throw ValidationError("candidate: closing parallel to approach");
  z.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  GraspCandidate c;
  c.pose = make_pose(r, position);
  return c;
}

std::vector<GraspCandidate> sample_candidates(const VolumeSpec& workspace, int n, uint64_t seed) {
  workspace.validate();
  if (n < 1) throw ValidationError("sample_candidates: n must be >= 1");
  Rng rng(seed);
  std::vector<GraspCandidate> out;
  out.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    GraspCandidate c;
    const Vec3 pos(workspace.origin.x() + workspace.extent.x() * rng.uniform(),
                   workspace.origin.y() + workspace.extent.y() * rng.uniform(),
                   workspace.origin.z() + workspace.extent.z() * rng.uniform());
    const Quat q = random_rotation(rng);
    c.pose = make_pose(q.toRotationMatrix(), pos);
    out.push_back(c);
  }
  return out;
}

namespace {

Vec3 lattice_point(const GraspCandidate& candidate, const GripperParams& gripper,
                   const Vec3i& density, int a, int b, int c) {
  const Vec3& ext = gripper.cuboid_extent;
  const Vec3 local((a + 0.5) * ext.x() / density.x() - 0.5 * ext.x(),
                   (b + 0.5) * ext.y() / density.y() - 0.5 * ext.y(),
                   (c + 0.5) * ext.z() / density.z() - 0.5 * ext.z());
  return candidate.pose * local;
}

}  // namespace

GraspVolume voxelize_grasp(const DepthLikelihoodVolume& dlv, const GraspCandidate& candidate,
                           const GripperParams& gripper, const Vec3i& density) {
  gripper.validate();
  if (density.x() < 1 || density.y() < 1 || density.z() < 1) {
    throw ValidationError("voxelize: density must be positive");
  }
  GraspVolume out;
  out.density = density;
  out.candidate = candidate;
  out.source_spec = dlv.spec;
  out.values.assign(size_t(density.x()) * density.y() * density.z(), 0.0);
  int64_t inside_count = 0;
  size_t i = 0;
  for (int c = 0; c < density.z(); ++c) {
    for (int b = 0; b < density.y(); ++b) {
      for (int a = 0; a < density.x(); ++a, ++i) {
        bool inside = false;
        out.values[i] = query(dlv, lattice_point(candidate, gripper, density, a, b, c), &inside);
        inside_count += inside;
      }
    }
  }
  if (inside_count == 0) {
    throw ComputeError("grasp outside workspace");
  }
  return out;
}

double outside_fraction(const DepthLikelihoodVolume& dlv, const GraspCandidate& candidate,
                        const GripperParams& gripper, const Vec3i& density) {
  int64_t outside = 0;
  for (int c = 0; c < density.z(); ++c) {
    for (int b = 0; b < density.y(); ++b) {
      for (int a = 0; a < density.x(); ++a) {
        if (!dlv.spec.contains(lattice_point(candidate, gripper, density, a, b, c))) ++outside;
      }
    }
  }
  return double(outside) / double(int64_t(density.x()) * density.y() * density.z());
}

namespace {

// Dimension along each axis and the two remaining dims in (x, y, z) order.
void axis_dims(const Vec3i& density, Axis axis, int* n_axis, int* d0, int* d1) {
  switch (axis) {
    case Axis::x: *n_axis = density.x(); *d0 = density.y(); *d1 = density.z(); break;
    case Axis::y: *n_axis = density.y(); *d0 = density.x(); *d1 = density.z(); break;
    case Axis::z: *n_axis = density.z(); *d0 = density.x(); *d1 = density.y(); break;
  }
}

double volume_at(const GraspVolume& v, Axis axis, int slice, int r, int c) {
  switch (axis) {
    case Axis::x: return v.at(slice, r, c);
    case Axis::y: return v.at(r, slice, c);
    default: return v.at(r, c, slice);
  }
}

}  // namespace

AxisFeatureMaps feature_maps(const GraspVolume& volume, Axis axis) {
  volume.validate();
  int n = 0, d0 = 0, d1 = 0;
  axis_dims(volume.density, axis, &n, &d0, &d1);
  if (n < 2) {
    throw ValidationError("feature maps: need at least two slices along the projection axis");
  }

  AxisFeatureMaps out;
  for (FeatureMap* m : {&out.center_slice, &out.average, &out.slice_diff}) {
    m->rows = d0;
    m->cols = d1;
    m->values.assign(size_t(d0) * d1, 0.0);
  }

  const int center = n / 2;
  for (int r = 0; r < d0; ++r) {
    for (int c = 0; c < d1; ++c) {
      const size_t i = size_t(r) * d1 + c;
      out.center_slice.values[i] = volume_at(volume, axis, center, r, c);
      double acc = 0.0;
      for (int s = 0; s < n; ++s) acc += volume_at(volume, axis, s, r, c);
      out.average.values[i] = acc / double(n);
      double diff = 0.0;
      for (int s = 0; s + 1 < n; ++s) {
        diff += std::abs(volume_at(volume, axis, s, r, c) - volume_at(volume, axis, s + 1, r, c));
      }
      out.slice_diff.values[i] = diff / double(n);
    }
  }
  return out;
}

namespace {

Image map_to_image(const FeatureMap& m) {
  Image img(m.cols, m.rows, 1);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) img.at(c, r)[0] = float(m.at(r, c));
  }
  return img;
}

}  // namespace

FeatureTensor assemble_tensor(const GraspVolume& volume, int target_size) {
  if (target_size < 1) throw ValidationError("assemble_tensor: target size must be >= 1");
  const AxisFeatureMaps mx = feature_maps(volume, Axis::x);
  const AxisFeatureMaps my = feature_maps(volume, Axis::y);
  const AxisFeatureMaps mz = feature_maps(volume, Axis::z);

  FeatureTensor out;
  out.size = target_size;
  out.channels.assign(size_t(9) * target_size * target_size, 0.0f);
  const FeatureMap* order[9] = {&mx.center_slice, &my.center_slice, &mz.center_slice,
                                &mx.average,      &my.average,      &mz.average,
                                &mx.slice_diff,   &my.slice_diff,   &mz.slice_diff};
  for (int ch = 0; ch < 9; ++ch) {
    const Image resized = resize_bilinear(map_to_image(*order[ch]), target_size, target_size);
    float* dst = out.channel(ch);
    for (int y = 0; y < target_size; ++y) {
      for (int x = 0; x < target_size; ++x) {
        float v = resized.at(x, y)[0];
        dst[size_t(y) * target_size + x] = v > 0.0f ? v : 0.0f;
      }
    }
  }
  return out;
}

static const char* kChannelOrder[9] = {"Ic_x", "Ic_y", "Ic_z", "Ia_x", "Ia_y",
                                       "Ia_z", "Id_x", "Id_y", "Id_z"};

void save_tensor(const FeatureTensor& tensor, const GraspCandidate& candidate,
                 const std::filesystem::path& path, uint64_t config_hash) {
  tensor.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write tensor: " + path.string());
  f.write(reinterpret_cast<const char*>(tensor.channels.data()),
          std::streamsize(tensor.channels.size() * sizeof(float)));
  if (!f) throw ComputeError("short write: " + path.string());

  const Quat q(candidate.pose.linear());
  const Vec3 t = candidate.pose.translation();
  json side{{"dims", {9, tensor.size, tensor.size}},
            {"channel_order", json::array()},
            {"candidate_pose",
             {{"position", {t.x(), t.y(), t.z()}},
              {"quaternion", {q.w(), q.x(), q.y(), q.z()}}}},
            {"config_hash", config_hash}};
  for (const char* name : kChannelOrder) side["channel_order"].push_back(name);
  std::ofstream sf(path.string() + ".json");
  sf << side.dump(2) << "\n";
}

FeatureTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream sf(path.string() + ".json");
  if (!sf) throw ValidationError("tensor sidecar not found: " + path.string() + ".json");
  json side;
  try {
    sf >> side;
  } catch (const json::exception& e) {
    throw ValidationError("tensor sidecar parse error: " + std::string(e.what()));
  }
  const int channels = side.at("dims").at(0).get<int>();
  const int size = side.at("dims").at(1).get<int>();
  if (channels != 9 || size < 1 || side.at("dims").at(2).get<int>() != size) {
    throw ValidationError("tensor sidecar: unsupported dims");
  }
  FeatureTensor out;
  out.size = size;
  out.channels.resize(size_t(9) * size * size);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("tensor payload not found: " + path.string());
  f.read(reinterpret_cast<char*>(out.channels.data()),
         std::streamsize(out.channels.size() * sizeof(float)));
  if (!f) throw ValidationError("tensor payload truncated: " + path.string());
  out.validate();
  return out;
}

}  // namespace plenograsp
