"""Analytic test scenes: ray-traced renders with exact depth and normals.

Scenes are built from checker-textured primitives (finite plane, cube,
sphere). Rays are cast through pixel centers with no anti-aliasing, so the
rendered depth satisfies the projection equations exactly and texture colors
have a closed form at every hit point. Background pixels are black with
depth 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .geometry import (
    CameraIntrinsics,
    DepthMap,
    FlowField,
    RigidTransform,
    invert,
    pixel_grid,
)
from .warping import NormalMap

__all__ = ["CheckerTexture", "Primitive", "SceneSpec", "render", "analytic_flow"]

_EPS = 1e-12


@dataclass(frozen=True)
class CheckerTexture:
    """Two-color checkerboard evaluated in the primitive's local frame.

    ``origin`` shifts the checker grid along the first two local texture
    axes; an origin of half a period centers a cell on the axis, which makes
    the pattern mirror-symmetric about it.
    """

    period: float
    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float]
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.period > 0:
            raise InputError(f"texture period must be positive, got {self.period}")

    def colors(self, parity: np.ndarray) -> np.ndarray:
        a = np.asarray(self.color_a, dtype=np.float64)
        b = np.asarray(self.color_b, dtype=np.float64)
        return np.where(parity[..., None] == 0, a, b)


@dataclass
class Primitive:
    """One scene element: ``kind`` is "plane", "cube" or "sphere".

    ``size`` is the full extent (plane side length, cube edge, sphere
    diameter); ``pose`` places the local frame in the world. A plane spans
    its local XY square at z=0; the cube is axis-aligned in its local frame
    and centered at the local origin; the sphere is centered at the local
    origin.
    """

    kind: str
    size: float
    texture: CheckerTexture
    pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if self.kind not in ("plane", "cube", "sphere"):
            raise InputError(f"unknown primitive kind {self.kind!r}")
        if not self.size > 0:
            raise InputError(f"primitive size must be positive, got {self.size}")

    @classmethod
    def from_dict(cls, d: dict) -> "Primitive":
        try:
            tex = d["texture"]
            texture = CheckerTexture(
                period=float(tex["period"]),
                color_a=tuple(float(c) for c in tex["color_a"]),
                color_b=tuple(float(c) for c in tex["color_b"]),
                origin=tuple(float(o) for o in tex.get("origin", (0.0, 0.0))),
            )
            kind = d["kind"]
            size = float(d["size"])
        except KeyError as exc:
            raise InputError(f"primitive record missing key: {exc}") from exc
        if "pose" in d:
            pose = RigidTransform(np.asarray(d["pose"], dtype=np.float64))
        elif "center" in d:
            pose = RigidTransform.from_translation(d["center"])
        else:
            pose = RigidTransform.identity()
        return cls(kind=kind, size=size, texture=texture, pose=pose)


@dataclass
class SceneSpec:
    """A list of primitives plus a hint that the scene is left-right symmetric
    about the world x=0 plane (used by symmetry-aware callers, not enforced)."""

    primitives: list[Primitive]
    symmetric: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        prims = d.get("primitives")
        if prims is None:
            raise InputError("scene record must contain a 'primitives' list")
        return cls(
            primitives=[Primitive.from_dict(p) for p in prims],
            symmetric=bool(d.get("symmetric", False)),
        )


def _checker2d(x, y, tex: CheckerTexture):
    ox, oy = tex.origin
    return (
        np.floor((x - ox) / tex.period) + np.floor((y - oy) / tex.period)
    ).astype(np.int64) & 1


def _checker3d(x, y, z, tex: CheckerTexture):
    ox, oy = tex.origin
    return (
        np.floor((x - ox) / tex.period)
        + np.floor((y - oy) / tex.period)
        + np.floor(z / tex.period)
    ).astype(np.int64) & 1


def _intersect(prim: Primitive, origins: np.ndarray, dirs: np.ndarray):
    """Ray/primitive intersection for (N, 3) world rays.

    Returns (t, normal_world, color) with t = +inf where there is no hit.
    ``t`` is the ray parameter; directions are not normalized by the caller,
    so camera depth recovery is the caller's concern.
    """
    world_from_local = prim.pose
    local_from_world = invert(world_from_local)
    o = local_from_world.apply(origins)
    d = dirs @ local_from_world.rotation.T

    n = len(o)
    t = np.full(n, np.inf)
    normal_l = np.zeros((n, 3))
    color = np.zeros((n, 3))
    half = prim.size / 2.0

    if prim.kind == "plane":
        dz = d[:, 2]
        movable = np.abs(dz) > _EPS
        tt = np.where(movable, -o[:, 2] / np.where(movable, dz, 1.0), np.inf)
        tt_safe = np.where(movable, tt, 0.0)
        hit_xy = o[:, :2] + tt_safe[:, None] * d[:, :2]
        hit = (
            movable
            & (tt > _EPS)
            & (np.abs(hit_xy[:, 0]) <= half)
            & (np.abs(hit_xy[:, 1]) <= half)
        )
        t[hit] = tt[hit]
        # two-sided: face the incoming ray
        normal_l[hit] = np.where(dz[hit, None] < 0, [0.0, 0.0, 1.0], [0.0, 0.0, -1.0])
        parity = _checker2d(hit_xy[hit, 0], hit_xy[hit, 1], prim.texture)
        color[hit] = prim.texture.colors(parity)

    elif prim.kind == "cube":
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_d = 1.0 / d
            lo = (-half - o) * inv_d
            hi = (half - o) * inv_d
        # rays parallel to a slab (NaN/inf slab bounds): inside iff |o| <= half
        parallel = np.abs(d) <= _EPS
        inside_slab = np.abs(o) <= half
        with np.errstate(invalid="ignore"):
            tmin_axis = np.minimum(lo, hi)
            tmax_axis = np.maximum(lo, hi)
        tmin_axis = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), tmin_axis)
        tmax_axis = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), tmax_axis)
        tmin = tmin_axis.max(axis=1)
        tmax = tmax_axis.min(axis=1)
        hit = (tmax >= tmin) & (tmin > _EPS)
        t[hit] = tmin[hit]
        entry_axis = np.argmax(tmin_axis, axis=1)
        hit_pts = o + tmin[:, None] * d
        idx = np.nonzero(hit)[0]
        axes = entry_axis[idx]
        normal_l[idx, axes] = -np.sign(d[idx, axes])
        # checker over the two in-face axes
        other = np.array([[1, 2], [0, 2], [0, 1]])[axes]
        fa = hit_pts[idx, other[:, 0]]
        fb = hit_pts[idx, other[:, 1]]
        parity = _checker2d(fa, fb, prim.texture)
        color[idx] = prim.texture.colors(parity)

    else:  # sphere
        radius = half
        b = np.sum(o * d, axis=1)
        a = np.sum(d * d, axis=1)
        c = np.sum(o * o, axis=1) - radius * radius
        disc = b * b - a * c
        has = disc >= 0
        sq = np.sqrt(np.where(has, disc, 0.0))
        t0 = (-b - sq) / np.where(a > 0, a, 1.0)
        t1 = (-b + sq) / np.where(a > 0, a, 1.0)
        tt = np.where(t0 > _EPS, t0, t1)
        hit = has & (tt > _EPS)
        t[hit] = tt[hit]
        hp = o[hit] + tt[hit, None] * d[hit]
        normal_l[hit] = hp / radius
        parity = _checker3d(hp[:, 0], hp[:, 1], hp[:, 2], prim.texture)
        color[hit] = prim.texture.colors(parity)

    normal_w = normal_l @ world_from_local.rotation.T
    return t, normal_w, color


def _cast(scene: SceneSpec, k: CameraIntrinsics, pose: RigidTransform):
    """Ray-cast all pixels; returns (depth, normal_world, color, hit_points_world).

    Ray directions have unit camera-frame Z, so the ray parameter equals the
    camera depth.
    """
    u, v = pixel_grid(k)
    dirs_cam = np.stack(
        [(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1
    ).reshape(-1, 3)
    cam_to_world = invert(pose)
    origin = cam_to_world.translation
    dirs_w = dirs_cam @ cam_to_world.rotation.T
    origins = np.broadcast_to(origin, dirs_w.shape)

    n = len(dirs_w)
    best_t = np.full(n, np.inf)
    best_n = np.zeros((n, 3))
    best_c = np.zeros((n, 3))
    for prim in scene.primitives:
        t, nw, c = _intersect(prim, origins, dirs_w)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_n[closer] = nw[closer]
        best_c[closer] = c[closer]

    hit = np.isfinite(best_t)
    depth = np.where(hit, best_t, 0.0)
    pts_w = np.zeros_like(dirs_w)
    pts_w[hit] = origin + best_t[hit, None] * dirs_w[hit]
    shape = (k.height, k.width)
    return (
        depth.reshape(shape),
        best_n.reshape(shape + (3,)),
        best_c.reshape(shape + (3,)),
        pts_w.reshape(shape + (3,)),
        hit.reshape(shape),
    )


def render(
    scene: SceneSpec, k: CameraIntrinsics, pose: RigidTransform
) -> tuple[np.ndarray, DepthMap, NormalMap]:
    """Render ``scene`` from a world-to-camera ``pose``.

    Returns the (H, W, 3) float32 image, the exact DepthMap (camera-space Z)
    and the analytic NormalMap in the camera frame. Normals point toward the
    camera side of each surface.
    """
    depth, normal_w, color, _, hit = _cast(scene, k, pose)
    normal_cam = normal_w @ pose.rotation.T
    return (
        color.astype(np.float32),
        DepthMap(depth),
        NormalMap(normals=normal_cam, valid=hit),
    )


def analytic_flow(
    scene: SceneSpec,
    k: CameraIntrinsics,
    pose_s: RigidTransform,
    pose_t: RigidTransform,
) -> FlowField:
    """Exact source-to-target correspondence field for an analytic scene.

    Casts source rays to world hit points and reprojects them into the target
    view directly (no depth-map back-projection), giving an independent
    reference for depth-based flow computation.
    """
    _, _, _, pts_w, hit = _cast(scene, k, pose_s)
    pts_t = pts_w.reshape(-1, 3) @ pose_t.rotation.T + pose_t.translation
    z = pts_t[:, 2].reshape(k.height, k.width)
    valid = hit & (z > 0)

    u = np.zeros_like(z)
    v = np.zeros_like(z)
    d = np.zeros_like(z)
    x = pts_t[:, 0].reshape(z.shape)
    y = pts_t[:, 1].reshape(z.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(k.fx * x, z, out=u, where=valid)
        np.divide(k.fy * y, z, out=v, where=valid)
    u[valid] += k.cx
    v[valid] += k.cy
    d[valid] = z[valid]
    return FlowField(u=u, v=v, depth=d, valid=valid)
