"""Grasp pose detection for transparent tabletop scenes.

Multi-view sub-aperture observations are fused into a depth likelihood
volume; grasp candidates are featurized from it, classified, and refined
with a particle search. The heavy lifting lives in the native module.
"""

try:  # installed layout: the extension sits inside the package
    from . import _plenograsp as _native
except ImportError:  # build-tree layout: extension on sys.path
    import _plenograsp as _native

ComputeError = _native.ComputeError
ConvNetClassifier = _native.ConvNetClassifier
DepthLikelihoodVolume = _native.DepthLikelihoodVolume
GraspCandidate = _native.GraspCandidate
GripperParams = _native.GripperParams
ObservationSet = _native.ObservationSet
SceneDescription = _native.SceneDescription
ValidationError = _native.ValidationError
VolumeSpec = _native.VolumeSpec
brute_force_likelihood = _native.brute_force_likelihood
build_dlv = _native.build_dlv
default_config = _native.default_config
grasp_tensor = _native.grasp_tensor
load_dlv = _native.load_dlv
load_observation_set = _native.load_observation_set
load_scene = _native.load_scene
oracle_grasp_label = _native.oracle_grasp_label
render_scene = _native.render_scene
run_search = _native.run_search
sample_candidates = _native.sample_candidates
save_observation_set = _native.save_observation_set
suppress_reflections = _native.suppress_reflections

__all__ = [
    "ComputeError",
    "ConvNetClassifier",
    "DepthLikelihoodVolume",
    "GraspCandidate",
    "GripperParams",
    "ObservationSet",
    "SceneDescription",
    "ValidationError",
    "VolumeSpec",
    "brute_force_likelihood",
    "build_dlv",
    "default_config",
    "grasp_tensor",
    "load_dlv",
    "load_observation_set",
    "load_scene",
    "oracle_grasp_label",
    "render_scene",
    "run_search",
    "sample_candidates",
    "save_observation_set",
    "suppress_reflections",
]
