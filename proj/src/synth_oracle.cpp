#include "plenograsp/synth_oracle.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

#include "plenograsp/errors.hpp"
#include "plenograsp/threading.hpp"

namespace plenograsp {

using nlohmann::json;

namespace {

uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

double lattice_value(int64_t ix, int64_t iy, uint64_t seed) {
  const uint64_t h = mix64(seed ^ mix64(uint64_t(ix) * 0x9e3779b97f4a7c15ull) ^
                           mix64(uint64_t(iy) * 0xc2b2ae3d27d4eb4full));
  return double(h >> 11) * 0x1.0p-53;
}

double value_noise(double u, double v, uint64_t seed) {
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const int64_t iu = int64_t(fu);
  const int64_t iv = int64_t(fv);
  double du = u - fu;
  double dv = v - fv;
  du = du * du * (3.0 - 2.0 * du);
  dv = dv * dv * (3.0 - 2.0 * dv);
  const double v00 = lattice_value(iu, iv, seed);
  const double v10 = lattice_value(iu + 1, iv, seed);
  const double v01 = lattice_value(iu, iv + 1, seed);
  const double v11 = lattice_value(iu + 1, iv + 1, seed);
  return (v00 * (1 - du) + v10 * du) * (1 - dv) + (v01 * (1 - du) + v11 * du) * dv;
}

}  // namespace

Vec3 sample_texture(const TextureSpec& tex, double u, double v) {
  double acc = 0.0;
  double amp_sum = 0.0;
  double amp = 1.0;
  double freq = tex.frequency;
  for (int o = 0; o < std::max(1, tex.octaves); ++o) {
    acc += amp * value_noise(u * freq, v * freq, tex.seed + uint64_t(o) * 0x51ull);
    amp_sum += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  const double n = acc / amp_sum;
  const double factor = 1.0 + tex.contrast * (2.0 * n - 1.0);
  return tex.base_color * factor;
}

void SceneDescription::validate() const {
  bool opaque = false;
  for (const auto& s : surfaces) {
    if (s.material.kind == Material::Kind::lambertian) opaque = true;
    if (s.material.kind == Material::Kind::transparent &&
        (s.material.alpha < 0.0 || s.material.alpha > 1.0)) {
      throw ValidationError("scene '" + s.id + "': transparent alpha must be in [0, 1]");
    }
    if (s.kind == Primitive::Kind::cylinder) {
      if (!(s.radius > 0.0) || !(s.height > 0.0)) {
        throw ValidationError("scene '" + s.id + "': cylinder needs positive radius/height");
      }
      if (s.wall_thickness < 0.0 || s.wall_thickness >= s.radius) {
        throw ValidationError("scene '" + s.id + "': wall thickness must be in [0, radius)");
      }
    }
  }
  if (!opaque) throw ValidationError("scene: needs at least one opaque (lambertian) surface");
}

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec3_from(const json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

json texture_json(const TextureSpec& t) {
  return json{{"seed", t.seed},
              {"frequency", t.frequency},
              {"contrast", t.contrast},
              {"octaves", t.octaves},
              {"base_color", vec3_json(t.base_color)}};
}

TextureSpec texture_from(const json& j) {
  TextureSpec t;
  t.seed = j.value("seed", uint64_t(1));
  t.frequency = j.value("frequency", 30.0);
  t.contrast = j.value("contrast", 0.7);
  t.octaves = j.value("octaves", 2);
  if (j.contains("base_color")) t.base_color = vec3_from(j.at("base_color"));
  return t;
}

}  // namespace

SceneDescription load_scene(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("scene file not found: " + path.string());
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("scene parse error: " + std::string(e.what()));
  }
  SceneDescription scene;
  try {
    scene.table_height = doc.value("table_height", 0.0);
    if (doc.contains("background")) scene.background = vec3_from(doc.at("background"));
    for (const auto& js : doc.at("surfaces")) {
      Primitive p;
      p.id = js.value("id", std::string("surface") + std::to_string(scene.surfaces.size()));
      const std::string kind = js.at("type").get<std::string>();
      if (kind == "plane") {
        p.kind = Primitive::Kind::plane;
      } else if (kind == "box") {
        p.kind = Primitive::Kind::box;
      } else if (kind == "cylinder") {
        p.kind = Primitive::Kind::cylinder;
      } else {
        throw ValidationError("scene '" + p.id + "': unknown primitive type " + kind);
      }
      if (js.contains("pose")) {
        std::array<double, 16> m{};
        for (int i = 0; i < 16; ++i) m[size_t(i)] = js.at("pose").at(i).get<double>();
        p.pose = pose_from_row_major(m);
      }
      if (js.contains("half_extents")) p.half_extents = vec3_from(js.at("half_extents"));
      if (js.contains("base_center")) p.base_center = vec3_from(js.at("base_center"));
      p.radius = js.value("radius", 0.05);
      p.height = js.value("height", 0.1);
      p.wall_thickness = js.value("wall_thickness", 0.0);
      const auto& jm = js.at("material");
      const std::string mk = jm.at("kind").get<std::string>();
      if (mk == "lambertian") {
        p.material.kind = Material::Kind::lambertian;
      } else if (mk == "transparent") {
        p.material.kind = Material::Kind::transparent;
      } else {
        throw ValidationError("scene '" + p.id + "': unknown material kind " + mk);
      }
      p.material.alpha = jm.value("alpha", 1.0);
      if (jm.contains("texture")) p.material.texture = texture_from(jm.at("texture"));
      scene.surfaces.push_back(std::move(p));
    }
    if (doc.contains("blobs")) {
      for (const auto& jb : doc.at("blobs")) {
        SpecularBlob b;
        b.center = vec3_from(jb.at("center"));
        b.radius = jb.value("radius", 0.01);
        b.intensity = jb.value("intensity", 2.0);
        if (jb.contains("direction")) b.direction = vec3_from(jb.at("direction")).normalized();
        b.exponent = jb.value("exponent", 60.0);
        scene.blobs.push_back(b);
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError("scene field error: " + std::string(e.what()));
  }
  scene.validate();
  return scene;
}

void save_scene(const SceneDescription& scene, const std::filesystem::path& path) {
  scene.validate();
  json surfaces = json::array();
  for (const auto& p : scene.surfaces) {
    json js{{"id", p.id}};
    switch (p.kind) {
      case Primitive::Kind::plane: js["type"] = "plane"; break;
      case Primitive::Kind::box: js["type"] = "box"; break;
      case Primitive::Kind::cylinder: js["type"] = "cylinder"; break;
    }
    js["pose"] = pose_to_row_major(p.pose);
    js["half_extents"] = vec3_json(p.half_extents);
    js["base_center"] = vec3_json(p.base_center);
    js["radius"] = p.radius;
    js["height"] = p.height;
    js["wall_thickness"] = p.wall_thickness;
    js["material"] = json{
        {"kind", p.material.kind == Material::Kind::lambertian ? "lambertian" : "transparent"},
        {"alpha", p.material.alpha},
        {"texture", texture_json(p.material.texture)}};
    surfaces.push_back(std::move(js));
  }
  json blobs = json::array();
  for (const auto& b : scene.blobs) {
    blobs.push_back(json{{"center", vec3_json(b.center)},
                         {"radius", b.radius},
                         {"intensity", b.intensity},
                         {"direction", vec3_json(b.direction)},
                         {"exponent", b.exponent}});
  }
  json doc{{"table_height", scene.table_height},
           {"background", vec3_json(scene.background)},
           {"surfaces", surfaces},
           {"blobs", blobs}};
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write scene: " + path.string());
  f << doc.dump(2) << "\n";
}

namespace {

struct RayHit {
  double t;
  double u, v;
  const Primitive* prim;
};

void intersect_plane(const Primitive& p, const Vec3& o, const Vec3& d, std::vector<RayHit>& out) {
  const Pose inv = p.pose.inverse();
  const Vec3 ol = inv * o;
  const Vec3 dl = inv.linear() * d;
  if (std::abs(dl.z()) < 1e-12) return;
  const double t = -ol.z() / dl.z();
  if (t <= 1e-9) return;
  const double x = ol.x() + t * dl.x();
  const double y = ol.y() + t * dl.y();
  if (std::abs(x) > p.half_extents.x() || std::abs(y) > p.half_extents.y()) return;
  out.push_back({t, x, y, &p});
}

void intersect_box(const Primitive& p, const Vec3& o, const Vec3& d, std::vector<RayHit>& out) {
  const Pose inv = p.pose.inverse();
  const Vec3 ol = inv * o;
  const Vec3 dl = inv.linear() * d;
  double t0 = -1e30, t1 = 1e30;
  int axis0 = -1, axis1 = -1;
  for (int a = 0; a < 3; ++a) {
    const double h = p.half_extents[a];
    if (std::abs(dl[a]) < 1e-12) {
      if (std::abs(ol[a]) > h) return;
      continue;
    }
    double ta = (-h - ol[a]) / dl[a];
    double tb = (h - ol[a]) / dl[a];
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) { t0 = ta; axis0 = a; }
    if (tb < t1) { t1 = tb; axis1 = a; }
  }
  if (t1 < std::max(t0, 1e-9)) return;
  auto face_uv = [&](double t, int axis, double* u, double* v) {
    const Vec3 q = ol + t * dl;
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    *u = q[a];
    *v = q[b];
  };
  if (t0 > 1e-9 && axis0 >= 0) {
    double u, v;
    face_uv(t0, axis0, &u, &v);
    out.push_back({t0, u, v, &p});
  }
  if (axis1 >= 0 && t1 > 1e-9) {
    double u, v;
    face_uv(t1, axis1, &u, &v);
    out.push_back({t1, u, v, &p});
  }
}

void intersect_cylinder_surface(const Primitive& p, double rho, const Vec3& o, const Vec3& d,
                                std::vector<RayHit>& out) {
  const double ox = o.x() - p.base_center.x();
  const double oy = o.y() - p.base_center.y();
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a < 1e-16) return;
  const double b = 2.0 * (ox * d.x() + oy * d.y());
  const double c = ox * ox + oy * oy - rho * rho;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return;
  const double sq = std::sqrt(disc);
  for (const double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (t <= 1e-9) continue;
    const double z = o.z() + t * d.z();
    if (z < p.base_center.z() || z > p.base_center.z() + p.height) continue;
    const double hx = ox + t * d.x();
    const double hy = oy + t * d.y();
    const double theta = std::atan2(hy, hx);
    out.push_back({t, theta * rho, z - p.base_center.z(), &p});
  }
}

void intersect_primitive(const Primitive& p, const Vec3& o, const Vec3& d,
                         std::vector<RayHit>& out) {
  switch (p.kind) {
    case Primitive::Kind::plane: intersect_plane(p, o, d, out); break;
    case Primitive::Kind::box: intersect_box(p, o, d, out); break;
    case Primitive::Kind::cylinder: {
      intersect_cylinder_surface(p, p.radius, o, d, out);
      if (p.wall_thickness > 1e-9) {
        intersect_cylinder_surface(p, p.radius - p.wall_thickness, o, d, out);
      }
      break;
    }
  }
}

Vec3 shade_ray(const SceneDescription& scene, const Vec3& origin, const Vec3& dir,
               std::vector<RayHit>& hits) {
  hits.clear();
  for (const auto& prim : scene.surfaces) intersect_primitive(prim, origin, dir, hits);
  std::sort(hits.begin(), hits.end(), [](const RayHit& a, const RayHit& b) { return a.t < b.t; });

  Vec3 color = Vec3::Zero();
  double trans = 1.0;
  for (const auto& hit : hits) {
    const Material& m = hit.prim->material;
    const Vec3 tex = sample_texture(m.texture, hit.u, hit.v);
    if (m.kind == Material::Kind::lambertian) {
      color += trans * tex;
      trans = 0.0;
      break;
    }
    color += trans * m.alpha * tex;
    trans *= 1.0 - m.alpha;
  }
  if (trans > 0.0) color += trans * scene.background;

  const Vec3 dn = dir.normalized();
  for (const auto& blob : scene.blobs) {
    const Vec3 rel = blob.center - origin;
    const double s = rel.dot(dn);
    if (s <= 1e-9) continue;
    const double dist = (rel - s * dn).norm();
    if (dist >= blob.radius) continue;
    const double q = 1.0 - (dist / blob.radius) * (dist / blob.radius);
    const double align = std::max(0.0, dn.dot(blob.direction));
    const double gain = blob.intensity * q * q * std::pow(align, blob.exponent);
    color += Vec3(gain, gain, gain);
  }
  return color;
}

}  // namespace

Observation render_observation(const SceneDescription& scene, const Pose& camera_pose,
                               const CameraIntrinsics& intr, int extent_u, int extent_v,
                               const std::string& id) {
  scene.validate();
  intr.validate();
  if (extent_u % 2 == 0 || extent_v % 2 == 0 || extent_u < 1 || extent_v < 1) {
    throw ValidationError("render: aperture extent must be odd and positive");
  }
  const int w = intr.image_size.x();
  const int h = intr.image_size.y();
  const int cu = (extent_u - 1) / 2;
  const int cv = (extent_v - 1) / 2;

  Observation obs;
  obs.id = id;
  obs.pose = camera_pose;
  obs.grid.extent_u = extent_u;
  obs.grid.extent_v = extent_v;
  obs.grid.center_u = cu;
  obs.grid.center_v = cv;
  obs.grid.images.assign(size_t(extent_u) * extent_v, Image());

  const Mat3 rot = camera_pose.linear();
  // Aperture (u, v) displaces the pinhole by -offset * B / f in the camera
  // x/y plane, which makes pixel disparity exactly offset * B / depth.
  const double shift = intr.aperture_baseline / intr.focal_length_px;

  for (int av = 0; av < extent_v; ++av) {
    for (int au = 0; au < extent_u; ++au) {
      Image img(w, h, 3);
      const Vec3 origin_cam(-(au - cu) * shift, -(av - cv) * shift, 0.0);
      const Vec3 origin = camera_pose * origin_cam;
      parallel_chunks(h, 0, [&](int, int64_t y0, int64_t y1) {
        std::vector<RayHit> hits;
        hits.reserve(8);
        for (int64_t y = y0; y < y1; ++y) {
          for (int x = 0; x < w; ++x) {
            const Vec3 dir_cam((x - intr.principal_point.x()) / intr.focal_length_px,
                               (double(y) - intr.principal_point.y()) / intr.focal_length_px, 1.0);
            const Vec3 dir = rot * dir_cam;
            const Vec3 color = shade_ray(scene, origin, dir, hits);
            float* px = img.at(x, int(y));
            px[0] = quantize8(float(color.x()));
            px[1] = quantize8(float(color.y()));
            px[2] = quantize8(float(color.z()));
          }
        }
      });
      obs.grid.images[size_t(av) * extent_u + au] = std::move(img);
    }
  }
  obs.grid.compute_gradients();
  return obs;
}

ObservationSet render_observation_set(const SceneDescription& scene,
                                      const std::vector<Pose>& camera_poses,
                                      const CameraIntrinsics& intr, int extent_u, int extent_v) {
  ObservationSet set;
  set.intrinsics = intr;
  int i = 0;
  for (const auto& pose : camera_poses) {
    set.observations.push_back(
        render_observation(scene, pose, intr, extent_u, extent_v, "view" + std::to_string(i)));
    ++i;
  }
  set.validate();
  return set;
}

std::vector<Pose> ring_poses(const Vec3& target, double radius, double height, int count,
                             double start_angle) {
  std::vector<Pose> out;
  out.reserve(size_t(count));
  for (int i = 0; i < count; ++i) {
    const double phi = start_angle + 2.0 * M_PI * i / std::max(1, count);
    const Vec3 eye = target + Vec3(radius * std::cos(phi), radius * std::sin(phi), height);
    out.push_back(look_at(eye, target));
  }
  return out;
}

double brute_force_likelihood(const Vec3& p, const ObservationSet& obs_set,
                              const DepthHypothesisSet& hyps, const PatchSpec& patch) {
  const CameraIntrinsics& intr = obs_set.intrinsics;
  const int k_count = hyps.count();
  double likelihood = 0.0;

  for (const auto& obs : obs_set.observations) {
    const Vec3 cam = obs.pose.inverse() * p;
    if (cam.z() <= 1e-12) continue;
    const double px = intr.focal_length_px * cam.x() / cam.z() + intr.principal_point.x();
    const double py = intr.focal_length_px * cam.y() / cam.z() + intr.principal_point.y();
    const Image& c_img = obs.grid.center_image();
    if (px < 0.0 || py < 0.0 || px > c_img.width - 1 || py > c_img.height - 1) continue;

    const int total = obs.grid.view_count() - 1;
    std::vector<double> costs(size_t(k_count), 0.0);
    std::vector<bool> valid(size_t(k_count), false);
    for (int k = 0; k < k_count; ++k) {
      double sum = 0.0;
      int n_valid = 0;
      for (int v = 0; v < obs.grid.extent_v; ++v) {
        for (int u = 0; u < obs.grid.extent_u; ++u) {
          if (u == obs.grid.center_u && v == obs.grid.center_v) continue;
          const double factor = intr.aperture_baseline / hyps.depths[size_t(k)];
          const Vec2 sub(px + (u - obs.grid.center_u) * factor,
                         py + (v - obs.grid.center_v) * factor);
          const auto cost = ray_cost(c_img, obs.grid.center_gradient(), obs.grid.image(u, v),
                                     obs.grid.gradient(u, v), Vec2(px, py), sub, patch);
          if (cost) {
            sum += *cost;
            ++n_valid;
          }
        }
      }
      if (n_valid > 0) {
        costs[size_t(k)] = sum * (double(total) / double(n_valid));
        valid[size_t(k)] = true;
      }
    }

    // Nearest hypothesis to the point's camera depth, lower index on ties.
    int k_sel = 0;
    double best = std::abs(hyps.depths[0] - cam.z());
    for (int k = 1; k < k_count; ++k) {
      const double dist = std::abs(hyps.depths[size_t(k)] - cam.z());
      if (dist < best) {
        best = dist;
        k_sel = k;
      }
    }
    if (!valid[size_t(k_sel)]) continue;

    double max_cost = 0.0;
    double sum_cost = 0.0;
    bool any = false;
    for (int k = 0; k < k_count; ++k) {
      if (!valid[size_t(k)]) continue;
      if (!any || costs[size_t(k)] > max_cost) max_cost = costs[size_t(k)];
      sum_cost += costs[size_t(k)];
      any = true;
    }
    if (!any || sum_cost <= 0.0) continue;
    likelihood += (max_cost - costs[size_t(k_sel)]) / sum_cost;
  }
  return likelihood;
}

const char* to_string(OracleGraspReport::Reason r) {
  switch (r) {
    case OracleGraspReport::Reason::force_closure_ok: return "force_closure_ok";
    case OracleGraspReport::Reason::no_contact: return "no_contact";
    case OracleGraspReport::Reason::non_antipodal: return "non_antipodal";
    case OracleGraspReport::Reason::collision: return "collision";
  }
  return "unknown";
}

namespace {

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
  int prim;
};

struct LocalBox {
  Vec3 lo, hi;
};

struct GripperSolids {
  std::vector<LocalBox> collision;  // fingers + palm, sweep-extended
  LocalBox prism;                   // closing region
};

GripperSolids gripper_solids(const GripperParams& g) {
  const double L = g.cuboid_extent.x();
  const double W = g.cuboid_extent.y();
  const double H = g.cuboid_extent.z();
  const double fw = g.finger_width;
  const double sweep = L;  // approach travel modeled as a -x extension

  GripperSolids s;
  s.prism = {Vec3(-L / 4, -W / 2, -H / 2), Vec3(L / 4, W / 2, H / 2)};
  // Upper/lower finger slabs, then the palm slab behind the -x face.
  s.collision.push_back({Vec3(-L / 2 - sweep, -W / 2, H / 2), Vec3(L / 4, W / 2, H / 2 + fw)});
  s.collision.push_back({Vec3(-L / 2 - sweep, -W / 2, -H / 2 - fw), Vec3(L / 4, W / 2, -H / 2)});
  s.collision.push_back({Vec3(-L / 2 - g.palm_depth - sweep, -W / 2, -H / 2 - fw),
                         Vec3(-L / 2, W / 2, H / 2 + fw)});
  return s;
}

bool inside_box(const LocalBox& b, const Vec3& q) {
  return q.x() >= b.lo.x() && q.y() >= b.lo.y() && q.z() >= b.lo.z() && q.x() <= b.hi.x() &&
         q.y() <= b.hi.y() && q.z() <= b.hi.z();
}

// World AABB enclosing all gripper solids (for windowed plane sampling).
void gripper_world_bounds(const GripperSolids& solids, const Pose& pose, Vec3* lo, Vec3* hi) {
  *lo = Vec3(1e30, 1e30, 1e30);
  *hi = -*lo;
  auto extend = [&](const LocalBox& b) {
    for (int i = 0; i < 8; ++i) {
      const Vec3 corner(i & 1 ? b.hi.x() : b.lo.x(), i & 2 ? b.hi.y() : b.lo.y(),
                        i & 4 ? b.hi.z() : b.lo.z());
      const Vec3 wc = pose * corner;
      *lo = lo->cwiseMin(wc);
      *hi = hi->cwiseMax(wc);
    }
  };
  for (const auto& b : solids.collision) extend(b);
  extend(solids.prism);
}

void sample_plane(const Primitive& p, const Vec3& lo, const Vec3& hi, double pitch, int prim_idx,
                  std::vector<SurfaceSample>& out) {
  // Window the sampled sub-rect to the gripper's footprint in local coords.
  const Pose inv = p.pose.inverse();
  Vec3 llo(1e30, 1e30, 1e30), lhi = -llo;
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
    const Vec3 q = inv * corner;
    llo = llo.cwiseMin(q);
    lhi = lhi.cwiseMax(q);
  }
  const double x0 = std::max(-p.half_extents.x(), llo.x() - pitch);
  const double x1 = std::min(p.half_extents.x(), lhi.x() + pitch);
  const double y0 = std::max(-p.half_extents.y(), llo.y() - pitch);
  const double y1 = std::min(p.half_extents.y(), lhi.y() + pitch);
  if (x0 > x1 || y0 > y1) return;
  if (llo.z() > pitch || lhi.z() < -pitch) return;
  const Vec3 n = p.pose.linear().col(2);
  for (double x = x0; x <= x1; x += pitch) {
    for (double y = y0; y <= y1; y += pitch) {
      out.push_back({p.pose * Vec3(x, y, 0.0), n, prim_idx});
    }
  }
}

void sample_box(const Primitive& p, double pitch, int prim_idx, std::vector<SurfaceSample>& out) {
  const Vec3& h = p.half_extents;
  for (int axis = 0; axis < 3; ++axis) {
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    for (int side = -1; side <= 1; side += 2) {
      Vec3 n_local = Vec3::Zero();
      n_local[axis] = side;
      const Vec3 n = p.pose.linear() * n_local;
      for (double ua = -h[a]; ua <= h[a]; ua += pitch) {
        for (double ub = -h[b]; ub <= h[b]; ub += pitch) {
          Vec3 q = Vec3::Zero();
          q[axis] = side * h[axis];
          q[a] = ua;
          q[b] = ub;
          out.push_back({p.pose * q, n, prim_idx});
        }
      }
    }
  }
}

void sample_cylinder(const Primitive& p, double pitch, int prim_idx,
                     std::vector<SurfaceSample>& out) {
  auto sample_shell = [&](double rho, double normal_sign) {
    if (rho <= 1e-9) return;
    const int n_theta = std::max(8, int(std::ceil(2.0 * M_PI * rho / pitch)));
    const int n_z = std::max(2, int(std::ceil(p.height / pitch)) + 1);
    for (int it = 0; it < n_theta; ++it) {
      const double theta = 2.0 * M_PI * it / n_theta;
      const Vec3 radial(std::cos(theta), std::sin(theta), 0.0);
      for (int iz = 0; iz < n_z; ++iz) {
        const double z = p.base_center.z() + p.height * iz / (n_z - 1);
        const Vec3 q = Vec3(p.base_center.x(), p.base_center.y(), z) + rho * radial;
        out.push_back({q, normal_sign * radial, prim_idx});
      }
    }
  };
  sample_shell(p.radius, 1.0);
  if (p.wall_thickness > 1e-9) sample_shell(p.radius - p.wall_thickness, -1.0);
}

}  // namespace

OracleGraspReport oracle_grasp_label(const GraspCandidate& candidate, const GripperParams& gripper,
                                     const SceneDescription& scene, double sample_pitch) {
  gripper.validate();
  scene.validate();
  if (!(sample_pitch > 0.0)) throw ValidationError("oracle: sample pitch must be positive");

  const GripperSolids solids = gripper_solids(gripper);
  Vec3 wlo, whi;
  gripper_world_bounds(solids, candidate.pose, &wlo, &whi);

  std::vector<SurfaceSample> samples;
  for (size_t i = 0; i < scene.surfaces.size(); ++i) {
    const Primitive& p = scene.surfaces[i];
    switch (p.kind) {
      case Primitive::Kind::plane: sample_plane(p, wlo, whi, sample_pitch, int(i), samples); break;
      case Primitive::Kind::box: sample_box(p, sample_pitch, int(i), samples); break;
      case Primitive::Kind::cylinder: sample_cylinder(p, sample_pitch, int(i), samples); break;
    }
  }

  const Pose to_local = candidate.pose.inverse();
  bool collision = false;
  bool have_upper = false, have_lower = false;
  SurfaceSample upper{}, lower{};
  double upper_z = -1e30, lower_z = 1e30;
  Vec3 upper_nl = Vec3::Zero(), lower_nl = Vec3::Zero();
  int prism_count = 0;

  for (const auto& s : samples) {
    const Vec3 q = to_local * s.point;
    for (const auto& b : solids.collision) {
      if (inside_box(b, q)) {
        collision = true;
        break;
      }
    }
    if (collision) break;
    if (inside_box(solids.prism, q)) {
      ++prism_count;
      const Vec3 nl = to_local.linear() * s.normal;
      if (q.z() > upper_z) {
        upper_z = q.z();
        upper = s;
        upper_nl = nl;
        have_upper = true;
      }
      if (q.z() < lower_z) {
        lower_z = q.z();
        lower = s;
        lower_nl = nl;
        have_lower = true;
      }
    }
  }

  OracleGraspReport report;
  if (collision) {
    report.reason = OracleGraspReport::Reason::collision;
    return report;
  }
  if (prism_count == 0 || !have_upper || !have_lower) {
    report.reason = OracleGraspReport::Reason::no_contact;
    return report;
  }
  const double cone = std::cos(10.0 * M_PI / 180.0);
  const bool same_prim = upper.prim == lower.prim;
  const bool distinct = (upper_z - lower_z) > 1e-9;
  const bool antipodal = upper_nl.z() >= cone && -lower_nl.z() >= cone;
  if (same_prim && distinct && antipodal) {
    report.graspable = true;
    report.reason = OracleGraspReport::Reason::force_closure_ok;
  } else {
    report.reason = OracleGraspReport::Reason::non_antipodal;
  }
  return report;
}

std::vector<GraspCandidate> scene_grasp_proposals(const SceneDescription& scene,
                                                  const GripperParams& gripper, int per_object,
                                                  uint64_t seed, const ProposalJitter& jitter) {
  gripper.validate();
  Rng rng(seed);
  std::vector<GraspCandidate> out;
  for (const auto& p : scene.surfaces) {
    if (p.kind != Primitive::Kind::cylinder) continue;
    for (int i = 0; i < per_object; ++i) {
      const double theta = rng.uniform(0.0, 2.0 * M_PI);
      const double zf = rng.uniform(0.5, 0.85);
      const Vec3 radial(std::cos(theta), std::sin(theta), 0.0);
      const Vec3 axis_point(p.base_center.x(), p.base_center.y(),
                            p.base_center.z() + zf * p.height);
      const Vec3 approach = -radial;
      const Vec3 closing = Vec3::UnitZ().cross(approach).normalized();
      const double pullback = rng.uniform(-0.004, 0.012);
      Vec3 pos = axis_point - pullback * approach;
      const double ps = jitter.position_sigma;
      pos += Vec3(rng.gaussian(0.0, ps), rng.gaussian(0.0, ps), rng.gaussian(0.0, ps));
      GraspCandidate c = make_candidate(pos, approach, closing);
      const double rs = jitter.rotation_sigma;
      const Mat3 perturb =
          rpy_rotation(rng.gaussian(0.0, rs), rng.gaussian(0.0, rs), rng.gaussian(0.0, rs));
      c.pose.linear() = c.pose.linear() * perturb;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace plenograsp
