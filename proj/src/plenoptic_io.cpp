#include "plenograsp/plenoptic_io.hpp"

#include <json.hpp>

#include <fstream>

#include "plenograsp/errors.hpp"
#include "plenograsp/png_io.hpp"

namespace plenograsp {

using nlohmann::json;

void CameraIntrinsics::validate() const {
  if (!(focal_length_px > 0.0)) throw ValidationError("intrinsics: focal length must be positive");
  if (image_size.x() <= 0 || image_size.y() <= 0) {
    throw ValidationError("intrinsics: image size must be positive");
  }
  if (principal_point.x() < 0.0 || principal_point.x() > image_size.x() - 1 ||
      principal_point.y() < 0.0 || principal_point.y() > image_size.y() - 1) {
    throw ValidationError("intrinsics: principal point outside image bounds");
  }
  if (!(aperture_baseline > 0.0)) {
    throw ValidationError("intrinsics: aperture baseline must be positive");
  }
}

void SubApertureGrid::compute_gradients() {
  gradients.clear();
  gradients.reserve(images.size());
  for (const auto& img : images) gradients.push_back(luminance_gradient(img));
}

void SubApertureGrid::validate() const {
  if (extent_u <= 0 || extent_v <= 0 || images.size() != size_t(extent_u) * extent_v) {
    throw ValidationError("aperture grid: image count does not match extent");
  }
  if (extent_u % 2 == 0 || extent_v % 2 == 0) {
    throw ValidationError("even aperture grid has no center view");
  }
  if (center_u != (extent_u - 1) / 2 || center_v != (extent_v - 1) / 2) {
    throw ValidationError("aperture grid: center index must be the middle view");
  }
  const int w = images.front().width;
  const int h = images.front().height;
  for (const auto& img : images) {
    if (img.width != w || img.height != h || img.channels != 3) {
      throw ValidationError("aperture grid: all images must share dimensions (3-channel)");
    }
  }
  if (gradients.size() != images.size()) {
    throw ValidationError("aperture grid: gradients not computed");
  }
}

void ObservationSet::validate() const {
  intrinsics.validate();
  if (observations.empty()) throw ValidationError("observation set: needs at least one view");
  for (const auto& obs : observations) {
    obs.grid.validate();
    if (orthonormality_error(obs.pose.linear()) > 1e-6 || obs.pose.linear().determinant() < 0.0) {
      throw ValidationError("observation '" + obs.id + "': pose rotation is not orthonormal");
    }
    if (obs.grid.images.front().width != intrinsics.image_size.x() ||
        obs.grid.images.front().height != intrinsics.image_size.y()) {
      throw ValidationError("observation '" + obs.id + "': image size disagrees with intrinsics");
    }
  }
}

SubApertureGrid crop_grid(const SubApertureGrid& grid, int keep_u, int keep_v, int margin) {
  if (keep_u > grid.extent_u || keep_v > grid.extent_v) {
    throw ValidationError("crop: keep extent larger than grid extent");
  }
  if (keep_u % 2 == 0 || keep_v % 2 == 0 || keep_u < 1 || keep_v < 1) {
    throw ValidationError("crop: keep extent must be odd and positive");
  }
  if (margin < 0) throw ValidationError("crop: negative margin");
  const int w = grid.images.front().width;
  const int h = grid.images.front().height;
  if (2 * margin >= w || 2 * margin >= h) {
    throw ValidationError("crop: margin too large for image dimensions");
  }

  const int first_u = grid.center_u - (keep_u - 1) / 2;
  const int first_v = grid.center_v - (keep_v - 1) / 2;

  SubApertureGrid out;
  out.extent_u = keep_u;
  out.extent_v = keep_v;
  out.center_u = (keep_u - 1) / 2;
  out.center_v = (keep_v - 1) / 2;
  out.images.reserve(size_t(keep_u) * keep_v);
  const int cw = w - 2 * margin;
  const int chh = h - 2 * margin;
  for (int v = 0; v < keep_v; ++v) {
    for (int u = 0; u < keep_u; ++u) {
      const Image& src = grid.image(first_u + u, first_v + v);
      Image img(cw, chh, 3);
      for (int y = 0; y < chh; ++y) {
        const float* s = src.at(margin, y + margin);
        std::copy(s, s + size_t(cw) * 3, img.at(0, y));
      }
      out.images.push_back(std::move(img));
    }
  }
  out.compute_gradients();
  return out;
}

namespace {

json intrinsics_to_json(const CameraIntrinsics& intr) {
  return json{{"focal_length_px", intr.focal_length_px},
              {"principal_point", {intr.principal_point.x(), intr.principal_point.y()}},
              {"image_size", {intr.image_size.x(), intr.image_size.y()}},
              {"aperture_baseline", intr.aperture_baseline}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics intr;
  intr.focal_length_px = j.at("focal_length_px").get<double>();
  intr.principal_point = Vec2(j.at("principal_point").at(0).get<double>(),
                              j.at("principal_point").at(1).get<double>());
  intr.image_size = Vec2i(j.at("image_size").at(0).get<int>(),
                          j.at("image_size").at(1).get<int>());
  intr.aperture_baseline = j.at("aperture_baseline").get<double>();
  return intr;
}

}  // namespace

ObservationSet load_observation_set(const std::filesystem::path& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw ValidationError("manifest not found: " + manifest_path.string());
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("manifest parse error: " + std::string(e.what()));
  }

  ObservationSet set;
  try {
    set.intrinsics = intrinsics_from_json(doc.at("intrinsics"));
    const auto base = manifest_path.parent_path();
    for (const auto& jobs : doc.at("observations")) {
      Observation obs;
      obs.id = jobs.at("id").get<std::string>();
      std::array<double, 16> m{};
      const auto& jp = jobs.at("pose");
      if (jp.size() != 16) {
        throw ValidationError("observation '" + obs.id + "': pose must be a 16-element matrix");
      }
      for (int i = 0; i < 16; ++i) m[size_t(i)] = jp.at(i).get<double>();
      obs.pose = pose_from_row_major(m);

      const auto& jgrid = jobs.at("grid");
      obs.grid.extent_u = jgrid.at("extent").at(0).get<int>();
      obs.grid.extent_v = jgrid.at("extent").at(1).get<int>();
      if (obs.grid.extent_u % 2 == 0 || obs.grid.extent_v % 2 == 0) {
        throw ValidationError("observation '" + obs.id + "': even aperture grid has no center view");
      }
      obs.grid.center_u = (obs.grid.extent_u - 1) / 2;
      obs.grid.center_v = (obs.grid.extent_v - 1) / 2;
      const auto& paths = jgrid.at("images");
      if (int(paths.size()) != obs.grid.extent_u * obs.grid.extent_v) {
        throw ValidationError("observation '" + obs.id + "': grid dimension mismatch (" +
                              std::to_string(paths.size()) + " images for " +
                              std::to_string(obs.grid.extent_u) + "x" +
                              std::to_string(obs.grid.extent_v) + " grid)");
      }
      for (const auto& rel : paths) {
        const auto img_path = base / rel.get<std::string>();
        if (!std::filesystem::exists(img_path)) {
          throw ValidationError("observation '" + obs.id +
                                "': missing image file: " + img_path.string());
        }
        obs.grid.images.push_back(read_png(img_path));
      }
      obs.grid.compute_gradients();
      set.observations.push_back(std::move(obs));
    }
  } catch (const json::exception& e) {
    throw ValidationError("manifest field error: " + std::string(e.what()));
  }

  set.validate();
  return set;
}

void save_observation_set(const ObservationSet& set, const std::filesystem::path& manifest_path,
                          uint64_t config_hash) {
  set.validate();
  const auto base = manifest_path.parent_path();
  std::filesystem::create_directories(base / "images");

  json jobs_list = json::array();
  for (const auto& obs : set.observations) {
    const auto dir = base / "images" / obs.id;
    std::filesystem::create_directories(dir);
    json paths = json::array();
    for (int v = 0; v < obs.grid.extent_v; ++v) {
      for (int u = 0; u < obs.grid.extent_u; ++u) {
        const std::string rel = "images/" + obs.id + "/a_" + std::to_string(v) + "_" +
                                std::to_string(u) + ".png";
        write_png(base / rel, obs.grid.image(u, v));
        paths.push_back(rel);
      }
    }
    const auto m = pose_to_row_major(obs.pose);
    jobs_list.push_back(json{{"id", obs.id},
                             {"pose", m},
                             {"grid",
                              {{"extent", {obs.grid.extent_u, obs.grid.extent_v}},
                               {"center", {obs.grid.center_u, obs.grid.center_v}},
                               {"images", paths}}}});
  }

  json doc{{"intrinsics", intrinsics_to_json(set.intrinsics)},
           {"observations", jobs_list},
           {"config_hash", config_hash}};
  std::ofstream f(manifest_path);
  if (!f) throw ValidationError("cannot write manifest: " + manifest_path.string());
  f << doc.dump(2) << "\n";
}

}  // namespace plenograsp
