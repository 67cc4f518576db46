"""Point-cloud based image warping for novel view synthesis.

Back-projection through a pinhole camera, rigid transforms, forward/backward
warping with z-buffering, occlusion-aware coarse view construction,
multi-view fusion, reconstruction losses, and an analytic scene renderer
used as a ground-truth oracle in the test suite.
"""

from .errors import InputError
from .geometry import (
    CameraIntrinsics,
    DepthMap,
    FlowField,
    OrbitPose,
    PointCloud,
    ProjectedPoints,
    RigidTransform,
    backproject,
    compose,
    flow_field,
    invert,
    pose_from_orbit,
    project,
    relative_pose,
    transform_cloud,
)
from .losses import (
    LossBreakdown,
    SsimParams,
    completion_losses,
    depth_loss,
    l1_metric,
    local_ssim,
    mean_normalized_inverse_depth,
    min_projection_mask,
    photometric_loss,
    photometric_loss_grad,
    smoothness_loss,
    smoothness_loss_grad,
    ssim,
)
from .multiview import ViewRecord, coarse_from_fused, fuse_clouds, reconstruct_360
from .oracle import CheckerTexture, Primitive, SceneSpec, analytic_flow, render
from .warping import (
    CoarseView,
    NormalMap,
    SymmetryPlane,
    backface_cull,
    backward_warp,
    bilinear_sample,
    coarse_view,
    estimate_normals,
    forward_warp,
    splat_cloud,
    symmetrize,
)

__version__ = "0.1.0"

__all__ = [
    "InputError",
    "CameraIntrinsics",
    "DepthMap",
    "RigidTransform",
    "PointCloud",
    "FlowField",
    "OrbitPose",
    "ProjectedPoints",
    "backproject",
    "project",
    "transform_cloud",
    "flow_field",
    "compose",
    "invert",
    "relative_pose",
    "pose_from_orbit",
    "CoarseView",
    "NormalMap",
    "SymmetryPlane",
    "bilinear_sample",
    "forward_warp",
    "backward_warp",
    "estimate_normals",
    "backface_cull",
    "symmetrize",
    "splat_cloud",
    "coarse_view",
    "SsimParams",
    "LossBreakdown",
    "l1_metric",
    "ssim",
    "local_ssim",
    "photometric_loss",
    "photometric_loss_grad",
    "smoothness_loss",
    "smoothness_loss_grad",
    "mean_normalized_inverse_depth",
    "min_projection_mask",
    "depth_loss",
    "completion_losses",
    "ViewRecord",
    "fuse_clouds",
    "coarse_from_fused",
    "reconstruct_360",
    "CheckerTexture",
    "Primitive",
    "SceneSpec",
    "render",
    "analytic_flow",
]
