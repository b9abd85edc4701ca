#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "plenograsp/errors.hpp"
#include "plenograsp/pipeline.hpp"
#include "plenograsp/png_io.hpp"
#include "plenograsp/synth_oracle.hpp"

namespace py = pybind11;
using namespace plenograsp;

namespace {

py::array_t<double> volume_to_array(const DepthLikelihoodVolume& dlv) {
  const auto& r = dlv.spec.resolution;
  py::array_t<double> out({r.z(), r.y(), r.x()});
  auto view = out.mutable_unchecked<3>();
  for (int iz = 0; iz < r.z(); ++iz) {
    for (int iy = 0; iy < r.y(); ++iy) {
      for (int ix = 0; ix < r.x(); ++ix) view(iz, iy, ix) = dlv.at(ix, iy, iz);
    }
  }
  return out;
}

py::array_t<float> tensor_to_array(const FeatureTensor& t) {
  py::array_t<float> out({9, t.size, t.size});
  auto view = out.mutable_unchecked<3>();
  for (int c = 0; c < 9; ++c) {
    const float* src = t.channel(c);
    for (int y = 0; y < t.size; ++y) {
      for (int x = 0; x < t.size; ++x) view(c, y, x) = src[size_t(y) * t.size + x];
    }
  }
  return out;
}

py::dict candidate_to_dict(const GraspCandidate& c) {
  const Quat q(c.pose.linear());
  py::dict out;
  out["position"] = py::make_tuple(c.pose.translation().x(), c.pose.translation().y(),
                                   c.pose.translation().z());
  out["quaternion"] = py::make_tuple(q.w(), q.x(), q.y(), q.z());
  out["confidence"] = c.confidence;
  if (c.graspable_label) out["label"] = *c.graspable_label;
  return out;
}

GraspCandidate candidate_from(const Vec3& position, const Vec3& approach, const Vec3& closing) {
  return make_candidate(position, approach, closing);
}

}  // namespace

PYBIND11_MODULE(_plenograsp, m) {
  m.doc() = "Depth-likelihood-volume grasp detection for transparent scenes";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ComputeError>(m, "ComputeError", PyExc_RuntimeError);

  py::class_<VolumeSpec>(m, "VolumeSpec")
      .def(py::init([](const Vec3& origin, const Vec3& extent, const Vec3i& resolution) {
             VolumeSpec spec;
             spec.origin = origin;
             spec.extent = extent;
             spec.resolution = resolution;
             spec.validate();
             return spec;
           }),
           py::arg("origin"), py::arg("extent"), py::arg("resolution"))
      .def_readonly("origin", &VolumeSpec::origin)
      .def_readonly("extent", &VolumeSpec::extent)
      .def_readonly("resolution", &VolumeSpec::resolution);

  py::class_<DepthLikelihoodVolume>(m, "DepthLikelihoodVolume")
      .def_property_readonly("spec", [](const DepthLikelihoodVolume& d) { return d.spec; })
      .def_readonly("view_count", &DepthLikelihoodVolume::view_count)
      .def("values", &volume_to_array, "Dense likelihoods indexed [z, y, x]")
      .def("query", [](const DepthLikelihoodVolume& d, const Vec3& p) { return query(d, p); })
      .def("save", [](const DepthLikelihoodVolume& d, const std::filesystem::path& p) {
        save_dlv(d, p);
      });

  py::class_<GraspCandidate>(m, "GraspCandidate")
      .def_property_readonly("position",
                             [](const GraspCandidate& c) { return Vec3(c.pose.translation()); })
      .def_readonly("confidence", &GraspCandidate::confidence)
      .def("as_dict", &candidate_to_dict);

  py::class_<GripperParams>(m, "GripperParams")
      .def(py::init<>())
      .def_readwrite("cuboid_extent", &GripperParams::cuboid_extent)
      .def_readwrite("finger_width", &GripperParams::finger_width)
      .def_readwrite("palm_depth", &GripperParams::palm_depth);

  py::class_<ObservationSet>(m, "ObservationSet")
      .def_property_readonly("view_count",
                             [](const ObservationSet& s) { return s.observations.size(); });

  py::class_<SceneDescription>(m, "SceneDescription");

  py::class_<ConvNetClassifier>(m, "ConvNetClassifier")
      .def_static("load", &ConvNetClassifier::load)
      .def("save", &ConvNetClassifier::save)
      .def("final_train_accuracy", &ConvNetClassifier::final_train_accuracy)
      .def("classify", [](const ConvNetClassifier& m_, const py::array_t<float>& tensor) {
        auto view = tensor.unchecked<3>();
        FeatureTensor t;
        t.size = int(view.shape(1));
        t.channels.resize(size_t(9) * t.size * t.size);
        for (int c = 0; c < 9; ++c) {
          for (int y = 0; y < t.size; ++y) {
            for (int x = 0; x < t.size; ++x) {
              t.channel(c)[size_t(y) * t.size + x] = view(c, y, x);
            }
          }
        }
        const auto r = m_.classify(t);
        return py::make_tuple(r.graspable, r.confidence);
      });

  m.def("load_scene", &load_scene, py::arg("path"));
  m.def("load_observation_set", &load_observation_set, py::arg("manifest_path"));
  m.def(
      "render_scene",
      [](const SceneDescription& scene, const std::string& config_json) {
        return capture_scene(scene, config_from_json(config_json));
      },
      py::arg("scene"), py::arg("config_json"), "Render the configured capture of a scene");
  m.def(
      "save_observation_set",
      [](const ObservationSet& set, const std::filesystem::path& path) {
        save_observation_set(set, path);
      },
      py::arg("set"), py::arg("manifest_path"));
  m.def(
      "build_dlv",
      [](const ObservationSet& set, const VolumeSpec& spec, double near, double far, int count,
         int patch_radius, int workers) {
        const auto hyps = DepthHypothesisSet::uniform_inverse_depth(near, far, count);
        PatchSpec patch;
        patch.radius = patch_radius;
        return build_dlv(set, spec, hyps, patch, workers);
      },
      py::arg("observations"), py::arg("spec"), py::arg("near"), py::arg("far"),
      py::arg("hypotheses") = 64, py::arg("patch_radius") = 1, py::arg("workers") = 0);
  m.def(
      "suppress_reflections",
      [](const DepthLikelihoodVolume& dlv, const ObservationSet& set, double near, double far,
         int count, int patch_radius, int workers) {
        const auto hyps = DepthHypothesisSet::uniform_inverse_depth(near, far, count);
        PatchSpec patch;
        patch.radius = patch_radius;
        return suppress_reflections(dlv, set, hyps, patch, SuppressionConfig{}, workers);
      },
      py::arg("dlv"), py::arg("observations"), py::arg("near"), py::arg("far"),
      py::arg("hypotheses") = 64, py::arg("patch_radius") = 1, py::arg("workers") = 0);
  m.def("load_dlv", &load_dlv, py::arg("path"));
  m.def(
      "brute_force_likelihood",
      [](const Vec3& p, const ObservationSet& set, double near, double far, int count,
         int patch_radius) {
        const auto hyps = DepthHypothesisSet::uniform_inverse_depth(near, far, count);
        PatchSpec patch;
        patch.radius = patch_radius;
        return brute_force_likelihood(p, set, hyps, patch);
      },
      py::arg("point"), py::arg("observations"), py::arg("near"), py::arg("far"),
      py::arg("hypotheses") = 64, py::arg("patch_radius") = 1,
      "Reference per-point evaluation used as the engine oracle");
  m.def(
      "grasp_tensor",
      [](const DepthLikelihoodVolume& dlv, const Vec3& position, const Vec3& approach,
         const Vec3& closing, const GripperParams& gripper, const Vec3i& density,
         int tensor_size) {
        const auto candidate = candidate_from(position, approach, closing);
        const auto volume = voxelize_grasp(dlv, candidate, gripper, density);
        return tensor_to_array(assemble_tensor(volume, tensor_size));
      },
      py::arg("dlv"), py::arg("position"), py::arg("approach"), py::arg("closing"),
      py::arg("gripper") = GripperParams{}, py::arg("density") = Vec3i(100, 100, 60),
      py::arg("tensor_size") = 100);
  m.def(
      "sample_candidates",
      [](const VolumeSpec& workspace, int n, uint64_t seed) {
        return sample_candidates(workspace, n, seed);
      },
      py::arg("workspace"), py::arg("n"), py::arg("seed"));
  m.def(
      "oracle_grasp_label",
      [](const SceneDescription& scene, const Vec3& position, const Vec3& approach,
         const Vec3& closing, const GripperParams& gripper) {
        const auto report = oracle_grasp_label(candidate_from(position, approach, closing),
                                               gripper, scene);
        return py::make_tuple(report.graspable, std::string(to_string(report.reason)));
      },
      py::arg("scene"), py::arg("position"), py::arg("approach"), py::arg("closing"),
      py::arg("gripper") = GripperParams{});
  m.def(
      "run_search",
      [](const DepthLikelihoodVolume& dlv, const ConvNetClassifier& model,
         const GripperParams& gripper, uint64_t seed, int particles, int iterations,
         const Vec3i& density, int tensor_size, int workers) {
        SearchConfig cfg;
        cfg.diffusion.particle_count = particles;
        cfg.diffusion.iterations = iterations;
        cfg.feature_density = density;
        cfg.tensor_size = tensor_size;
        cfg.workers = workers;
        return run_search(dlv, gripper, model, dlv.spec, cfg, seed);
      },
      py::arg("dlv"), py::arg("model"), py::arg("gripper") = GripperParams{}, py::arg("seed") = 7,
      py::arg("particles") = 100, py::arg("iterations") = 100,
      py::arg("density") = Vec3i(100, 100, 60), py::arg("tensor_size") = 100,
      py::arg("workers") = 0);
  m.def("default_config", [] { return config_to_json(PipelineConfig{}); });
}
