"""Gravity-aware spatial rectification for egocentric scene geometry.

The package provides the geometric core of a multimodal spatial
rectifier: rotations parametrized by gravity/principal-direction pairs,
rotation-induced homography warps with equivariant depth and normal
transports, spherical normal histograms with KL-based rotation
refinement, reference-direction clustering, training losses, evaluation
metrics, a synthetic renderer supplying exact ground truth, and 16-bit
PNG dataset serialization with JSONL manifests.
"""

from .exceptions import (
    AllModesInvalid,
    AntipodalInput,
    DegenerateInput,
    EgorectError,
    EmptyInput,
    EmptySample,
    FileMissing,
    FormatError,
    IntrinsicsMismatch,
    IoError,
    KindMismatch,
    NonPositiveValue,
    NoValidPixels,
    SchemeMismatch,
)
from .geometry import (
    CameraIntrinsics,
    axis_angle_rotation,
    geodesic_angle,
    homography_from_rotation,
    pitch_rotation,
    pixel_grid,
    ray_z_factor,
    roll_rotation,
    rotation_between,
    rotation_from_gravity_principal,
    warp_point,
)
from .frames import DEFAULT_D_MAX, DepthMap, FrameBundle, NormalMap
from .sphere import (
    DEFAULT_SCHEME,
    NormalSample,
    SphereHistogram,
    angular_resolution_deg,
    assign_bins,
    build_histogram,
    cluster_distribution,
    kl_divergence,
    principal_direction,
    refine_rotation_kl,
    register_scheme,
    scheme_centers,
)
from .warp import unwarp_depth_prediction, unwarp_normal_prediction, warp_bundle
from .clustering import (
    ReferenceDirectionClustering,
    ReferenceSet,
    cluster_references,
    k_medoids,
    load_reference_set,
    save_reference_set,
)
from .rectifier import (
    ConstantPredictor,
    GeometryPredictor,
    ModeAssignment,
    OraclePredictor,
    assign_mode,
    loss_geo,
    loss_sr,
    loss_total,
    rectify_predict,
)
from .synthetic import (
    Box,
    CameraPose,
    Plane,
    Scene,
    render_view,
    scene_from_json,
    scene_to_json,
    standard_intrinsics,
    standard_scene,
    standard_tilt_suite,
)
from .metrics import DepthMetrics, NormalMetrics, depth_metrics, normal_metrics, scale_align
from .dataio import (
    Manifest,
    SampleRecord,
    load_sample,
    normals_from_depth,
    read_manifest,
    write_manifest,
    write_sample,
)

__version__ = "0.1.0"
