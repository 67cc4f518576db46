"""Point-cloud fusion across views and 360-degree reconstruction.

Each view contributes an independently back-projected cloud; clouds are
expressed in a shared reference camera frame and simply concatenated (no
deduplication), so splatted coarse views get denser as views are added.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError
from .geometry import (
    CameraIntrinsics,
    DepthMap,
    PointCloud,
    RigidTransform,
    backproject,
    compose,
    invert,
    transform_cloud,
)
from .warping import CoarseView, SymmetryPlane, backface_cull, estimate_normals, splat_cloud, symmetrize

__all__ = ["ViewRecord", "fuse_clouds", "coarse_from_fused", "reconstruct_360"]


@dataclass
class ViewRecord:
    """One input view: image, depth, intrinsics, absolute camera-to-world pose."""

    image: np.ndarray
    depth: DepthMap
    k: CameraIntrinsics
    pose: RigidTransform

    def __post_init__(self):
        if self.depth.values.shape != (self.k.height, self.k.width):
            raise InputError("view depth does not match intrinsics size")
        if self.image.shape[:2] != (self.k.height, self.k.width):
            raise InputError("view image does not match intrinsics size")


def fuse_clouds(views: list[ViewRecord], reference: int = 0) -> PointCloud:
    """Back-project every view and concatenate in the reference camera frame.

    Points keep their source pixel, gain the index of their view, and carry
    per-pixel estimated normals (zero rows where estimation failed) so that
    downstream culling still works. Point order follows view order, then
    row-major pixels within each view.
    """
    if not views:
        raise InputError("need at least one view to fuse")
    if not 0 <= reference < len(views):
        raise InputError(f"reference index {reference} out of range")

    ref_from_world = invert(views[reference].pose)
    points, colors, pixels, ids, normals = [], [], [], [], []
    for i, view in enumerate(views):
        cloud = backproject(view.depth, view.k, view.image)
        nm = estimate_normals(view.depth, view.k)
        rows = cloud.source_pixels[:, 0]
        cols = cloud.source_pixels[:, 1]
        n = np.where(nm.valid[rows, cols, None], nm.normals[rows, cols], 0.0)
        cloud = transform_cloud(
            PointCloud(
                points=cloud.points,
                colors=cloud.colors,
                source_pixels=cloud.source_pixels,
                normals=n,
            ),
            compose(ref_from_world, view.pose),
        )
        points.append(cloud.points)
        colors.append(cloud.colors)
        pixels.append(cloud.source_pixels)
        normals.append(cloud.normals)
        ids.append(np.full(len(cloud), i, dtype=np.int32))

    return PointCloud(
        points=np.concatenate(points) if points else np.zeros((0, 3)),
        colors=np.concatenate(colors),
        source_pixels=np.concatenate(pixels),
        view_ids=np.concatenate(ids),
        normals=np.concatenate(normals),
    )


def coarse_from_fused(
    cloud: PointCloud,
    k: CameraIntrinsics,
    target_pose: RigidTransform,
    *,
    cull: bool = False,
    eps: float = 0.0,
    symmetry: SymmetryPlane | None = None,
    symmetry_frame: RigidTransform | None = None,
) -> CoarseView:
    """Splat a fused cloud into a target view.

    ``target_pose`` maps reference-camera coordinates to target-camera
    coordinates. Culling uses the normals carried by the cloud; symmetry
    mirrors across ``symmetry`` expressed in the frame reached via
    ``symmetry_frame`` (reference-camera frame when None).
    """
    if cull:
        cloud = backface_cull(cloud, None, target_pose, eps)
    if symmetry is not None:
        cloud = symmetrize(cloud, symmetry, frame=symmetry_frame)
    return splat_cloud(transform_cloud(cloud, target_pose), k)


def reconstruct_360(views: list[ViewRecord], *, prune: bool = False) -> PointCloud:
    """Stitch orbit views into a single cloud in the first view's frame.

    With ``prune`` enabled, points whose nearest-neighbor distance exceeds
    mean + 3*std are removed (an export-quality cleanup, off by default).
    """
    if len(views) < 2:
        raise InputError("360-degree reconstruction needs at least two views")
    cloud = fuse_clouds(views, reference=0)
    if prune and len(cloud) >= 2:
        dist, _ = cKDTree(cloud.points).query(cloud.points, k=2)
        nn = dist[:, 1]
        keep = nn <= nn.mean() + 3.0 * nn.std()
        cloud = cloud.take(np.nonzero(keep)[0])
    return cloud
