"""Forward/backward image warping, surface normals, occlusion removal and
left-right symmetrization.

Forward warping splats each valid source pixel to the nearest integer target
pixel, resolving collisions with a z-buffer (smallest target depth wins; at
exactly equal depth the first point in input order wins, which for a
back-projected image means row-major source order). The result is
deliberately sparse: one splat per source pixel, no hole filling.

Backward warping produces a dense image by sampling the target image with
bilinear interpolation at each source pixel's flow location.
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
    flow_field,
    invert,
    project,
    transform_cloud,
)

__all__ = [
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
]


@dataclass
class CoarseView:
    """Sparse warped view: RGB, coverage mask and per-pixel nearest depth.

    ``rgb`` is zero wherever ``coverage`` is False and ``zbuffer`` is
    positive exactly where ``coverage`` is True (0 means empty).
    """

    rgb: np.ndarray
    coverage: np.ndarray
    zbuffer: np.ndarray

    def __post_init__(self):
        if self.rgb.shape[:2] != self.coverage.shape or self.coverage.shape != self.zbuffer.shape:
            raise InputError("coarse view component shapes disagree")
        if self.rgb[~self.coverage].any():
            raise InputError("rgb must be zero outside coverage")
        if not np.array_equal(self.zbuffer > 0, self.coverage):
            raise InputError("zbuffer must be positive exactly where covered")

    def coverage_count(self) -> int:
        return int(np.count_nonzero(self.coverage))


@dataclass
class NormalMap:
    """Per-pixel unit surface normals in the camera frame.

    ``normals`` is (H, W, 3); entries are meaningful only where ``valid``.
    Valid normals are unit length and point toward the camera side of the
    surface (a fronto-parallel wall facing the camera has normal (0,0,-1)).
    """

    normals: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if self.normals.shape[:2] != self.valid.shape or self.normals.shape[2:] != (3,):
            raise InputError("normal map component shapes disagree")


@dataclass(frozen=True)
class SymmetryPlane:
    """Mirror plane ``{x : normal . x = offset}`` with a unit normal."""

    normal: tuple[float, float, float] = (1.0, 0.0, 0.0)
    offset: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if abs(np.linalg.norm(n) - 1.0) > 1e-6:
            raise InputError(f"symmetry plane normal must be unit length, got {self.normal}")


def bilinear_sample(image: np.ndarray, u, v) -> np.ndarray:
    """Sample ``image`` at continuous pixel coordinates with zero padding.

    Standard 4-neighbor bilinear interpolation; taps outside the image
    contribute zero, so the result ramps continuously to 0 within one pixel
    of the border and is exactly 0 beyond it. ``u``/``v`` may be scalars or
    arrays of any matching shape; a channel axis on ``image`` is preserved.
    """
    image = np.asarray(image, dtype=np.float64)
    gray = image.ndim == 2
    if gray:
        image = image[..., None]
    h, w = image.shape[:2]

    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    scalar = u.ndim == 0
    u, v = np.atleast_1d(u), np.atleast_1d(v)

    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    fx = u - x0
    fy = v - y0

    out = np.zeros(u.shape + image.shape[2:], dtype=np.float64)
    for dy, dx, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (0, 1, fx * (1 - fy)),
        (1, 0, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xs = x0 + dx
        ys = y0 + dy
        ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
        if ok.any():
            vals = image[ys[ok], xs[ok]]
            out[ok] += wgt[ok][..., None] * vals

    if gray:
        out = out[..., 0]
    return out[0] if scalar else out


def splat_cloud(cloud: PointCloud, k: CameraIntrinsics) -> CoarseView:
    """Project a cloud and splat it into a z-buffered sparse view.

    Each point with positive depth lands on the nearest integer pixel
    (round half up); collisions keep the smallest depth, ties keep the
    earliest point in cloud order. Out-of-bounds splats are dropped.
    """
    h, w = k.height, k.width
    rgb = np.zeros((h, w, 3), dtype=np.float32)
    zbuf = np.zeros((h, w), dtype=np.float64)
    cover = np.zeros((h, w), dtype=bool)
    if len(cloud) == 0:
        return CoarseView(rgb=rgb, coverage=cover, zbuffer=zbuf)

    proj = project(cloud, k)
    ui = np.floor(proj.u + 0.5).astype(np.int64)
    vi = np.floor(proj.v + 0.5).astype(np.int64)
    inb = (ui >= 0) & (ui < w) & (vi >= 0) & (vi < h)
    if not inb.any():
        return CoarseView(rgb=rgb, coverage=cover, zbuffer=zbuf)

    tidx = vi[inb] * w + ui[inb]
    depth = proj.depth[inb]
    colors = proj.colors[inb]
    order = np.arange(len(tidx))

    srt = np.lexsort((order, depth, tidx))
    tidx_s = tidx[srt]
    first = np.ones(len(tidx_s), dtype=bool)
    first[1:] = tidx_s[1:] != tidx_s[:-1]
    win = srt[first]

    flat_rgb = rgb.reshape(-1, 3)
    flat_z = zbuf.reshape(-1)
    flat_c = cover.reshape(-1)
    flat_rgb[tidx[win]] = colors[win]
    flat_z[tidx[win]] = depth[win]
    flat_c[tidx[win]] = True
    return CoarseView(rgb=rgb, coverage=cover, zbuffer=zbuf)


def forward_warp(
    image: np.ndarray, depth: DepthMap, k: CameraIntrinsics, theta: RigidTransform
) -> CoarseView:
    """Warp a source image into the target view by point splatting.

    Back-projects every valid pixel, applies ``theta`` and splats with a
    z-buffer; equals :func:`coarse_view` with all options disabled.
    """
    return splat_cloud(transform_cloud(backproject(depth, k, image), theta), k)


def backward_warp(
    target_image: np.ndarray,
    source_depth: DepthMap,
    k: CameraIntrinsics,
    theta: RigidTransform,
) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct the source view by sampling the target image.

    Every valid-depth source pixel receives the bilinear sample of
    ``target_image`` at its flow location, giving a dense image. The mask is
    False where the source depth is invalid, the flow lands behind the
    camera, or the sample point falls entirely outside the target support.
    Occluded regions are sampled anyway and may contain artifacts.
    """
    target_image = np.asarray(target_image)
    if target_image.shape[:2] != (k.height, k.width):
        raise InputError("target image does not match intrinsics size")
    ff = flow_field(source_depth, k, theta)
    h, w = k.height, k.width

    sampled = bilinear_sample(target_image, ff.u, ff.v)
    support = (ff.u > -1) & (ff.u < w) & (ff.v > -1) & (ff.v < h)
    mask = ff.valid & support
    out = np.zeros_like(sampled)
    out[mask] = sampled[mask]
    return out.astype(np.float32), mask


def estimate_normals(depth: DepthMap, k: CameraIntrinsics) -> NormalMap:
    """Surface normals from back-projected depth gradients.

    The tangent vectors toward the +u and +v neighbors are crossed and
    normalized; pixels at the right/bottom image edge fall back to backward
    differences. A pixel is invalid when its own depth or a needed
    neighbor's depth is invalid, or the tangents are degenerate.
    """
    if depth.values.shape != (k.height, k.width):
        raise InputError("depth map does not match intrinsics size")
    h, w = k.height, k.width
    if h < 2 or w < 2:
        raise InputError("normal estimation needs at least a 2x2 depth map")

    d = depth.values
    vmask = depth.valid_mask
    us = np.arange(w)
    vs = np.arange(h)
    uu, vv = np.meshgrid(us, vs)
    pts = np.stack(
        [d * (uu - k.cx) / k.fx, d * (vv - k.cy) / k.fy, d], axis=-1
    )

    iu = np.where(uu < w - 1, uu + 1, uu - 1)
    su = np.where(uu < w - 1, 1.0, -1.0)
    iv = np.where(vv < h - 1, vv + 1, vv - 1)
    sv = np.where(vv < h - 1, 1.0, -1.0)

    tan_u = (pts[vv, iu] - pts) * su[..., None]
    tan_v = (pts[iv, uu] - pts) * sv[..., None]
    normal = np.cross(tan_v, tan_u)
    norm = np.linalg.norm(normal, axis=-1)

    valid = vmask & vmask[vv, iu] & vmask[iv, uu] & (norm > 1e-15)
    out = np.zeros_like(normal)
    np.divide(normal, norm[..., None], out=out, where=valid[..., None])
    return NormalMap(normals=out, valid=valid)


def _cloud_normals(cloud: PointCloud, normals) -> tuple[np.ndarray, np.ndarray]:
    """Per-point normals + validity from a NormalMap, raw array or the cloud."""
    if isinstance(normals, NormalMap):
        if cloud.source_pixels is None:
            raise InputError("cloud lacks source pixels; cannot look up per-pixel normals")
        rows = cloud.source_pixels[:, 0]
        cols = cloud.source_pixels[:, 1]
        return normals.normals[rows, cols], normals.valid[rows, cols]
    if normals is None:
        if cloud.normals is None:
            raise InputError("no normals supplied and the cloud carries none")
        n = cloud.normals
    else:
        n = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        if len(n) != len(cloud):
            raise InputError("normals length does not match cloud")
    return n, np.linalg.norm(n, axis=1) > 1e-9


def backface_cull(
    cloud: PointCloud,
    normals,
    theta: RigidTransform,
    eps: float = 0.0,
) -> PointCloud:
    """Drop points whose transformed normal faces away from the target camera.

    A point is removed iff ``(R n) . dir > eps`` where ``dir`` is the unit
    direction from the target camera center to the transformed point.
    ``normals`` may be a :class:`NormalMap` (looked up via the cloud's source
    pixels), an (N, 3) array, or None to use ``cloud.normals``. Points
    without a valid normal are kept.
    """
    if len(cloud) == 0:
        return cloud
    n, n_valid = _cloud_normals(cloud, normals)
    n_t = n @ theta.rotation.T
    p_t = theta.apply(cloud.points)
    dist = np.linalg.norm(p_t, axis=1)
    safe = dist > 1e-15
    dot = np.einsum("ij,ij->i", n_t, p_t)
    with np.errstate(invalid="ignore"):
        dot = np.where(safe, dot / np.where(safe, dist, 1.0), 0.0)
    keep = ~(n_valid & safe & (dot > eps))
    return cloud.take(np.nonzero(keep)[0])


def symmetrize(
    cloud: PointCloud,
    plane: SymmetryPlane,
    merge_radius: float = 1e-6,
    frame: RigidTransform | None = None,
) -> PointCloud:
    """Append the mirror image of a cloud across ``plane``.

    ``frame`` optionally maps cloud coordinates into the frame in which the
    plane is expressed (e.g. source camera to object-centered); reflection
    happens there and results are mapped back. Reflected points closer than
    ``merge_radius`` to an existing point are dropped. Colors are copied;
    normals, if present, are mirrored alongside.
    """
    if len(cloud) == 0:
        return cloud
    n = np.asarray(plane.normal, dtype=np.float64)
    pts = cloud.points if frame is None else frame.apply(cloud.points)
    dist = pts @ n - plane.offset
    refl = pts - 2.0 * dist[:, None] * n

    nn_dist, _ = cKDTree(pts).query(refl)
    keep = nn_dist > merge_radius
    if not keep.any():
        return cloud

    refl = refl[keep]
    if frame is not None:
        refl = invert(frame).apply(refl)

    refl_normals = None
    if cloud.normals is not None:
        m = cloud.normals if frame is None else cloud.normals @ frame.rotation.T
        m = m - 2.0 * (m @ n)[:, None] * n
        if frame is not None:
            m = m @ invert(frame).rotation.T
        refl_normals = np.concatenate([cloud.normals, m[keep]])

    def _extend(attr):
        return None if attr is None else np.concatenate([attr, attr[keep]])

    return PointCloud(
        points=np.concatenate([cloud.points, refl]),
        colors=np.concatenate([cloud.colors, cloud.colors[keep]]),
        source_pixels=_extend(cloud.source_pixels),
        view_ids=_extend(cloud.view_ids),
        normals=refl_normals,
    )


def coarse_view(
    image: np.ndarray,
    depth: DepthMap,
    k: CameraIntrinsics,
    theta: RigidTransform,
    *,
    cull: bool = False,
    eps: float = 0.0,
    symmetry: SymmetryPlane | None = None,
    symmetry_frame: RigidTransform | None = None,
) -> CoarseView:
    """Occlusion-aware sparse target view.

    Pipeline: back-project, optionally remove back-facing points
    (``cull``/``eps``), optionally mirror across a symmetry plane
    (``symmetry``, expressed in the frame reached via ``symmetry_frame``),
    then transform and splat with a z-buffer. With all options off this is
    exactly :func:`forward_warp`.
    """
    cloud = backproject(depth, k, image)
    if cull:
        cloud = backface_cull(cloud, estimate_normals(depth, k), theta, eps)
    if symmetry is not None:
        cloud = symmetrize(cloud, symmetry, frame=symmetry_frame)
    return splat_cloud(transform_cloud(cloud, theta), k)
