"""Pinhole camera model, rigid transforms, point clouds, and flow fields.

Conventions used throughout the package:

* Pixel ``(u, v)`` addresses the pixel center; ``u`` is the column index,
  ``v`` the row index, ``(0, 0)`` is the top-left pixel. No half-pixel offset.
* Camera frame is right-handed with +Z pointing into the scene, +X to the
  image right and +Y down in image space.
* Depth maps use ``0.0`` as the background/invalid sentinel; valid depths are
  strictly positive camera-space Z.
* Geometry is computed in float64; image colors are float32 in [0, 1].
* ``RigidTransform`` poses returned by :func:`pose_from_orbit` map world
  coordinates to camera coordinates (the classic extrinsic matrix). Relative
  poses map source-camera coordinates to target-camera coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = [
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
]

_ROT_TOL = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics (zero skew).

    ``fx, fy`` are focal lengths in pixels, ``(cx, cy)`` the principal point
    in pixel coordinates, ``width``/``height`` the image size.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InputError(
                f"principal point ({self.cx}, {self.cy}) outside image "
                f"{self.width}x{self.height}"
            )

    def matrix(self) -> np.ndarray:
        """3x3 projection matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )

    def inverse_matrix(self) -> np.ndarray:
        """Closed-form K^-1."""
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ],
            dtype=np.float64,
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        try:
            return cls(
                fx=float(d["fx"]),
                fy=float(d["fy"]),
                cx=float(d["cx"]),
                cy=float(d["cy"]),
                width=int(d["width"]),
                height=int(d["height"]),
            )
        except KeyError as exc:
            raise InputError(f"intrinsics record missing key: {exc}") from exc


class DepthMap:
    """Per-pixel metric depth with ``0.0`` marking background/invalid pixels.

    Values are stored as float64; every entry is either exactly 0.0 or a
    finite, strictly positive depth in scene units.
    """

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise InputError(f"depth map must be 2-D, got shape {values.shape}")
        bad = ~np.isfinite(values) | (values < 0)
        if bad.any():
            raise InputError("depth values must be finite and >= 0 (0 marks invalid)")
        self.values = values

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def valid_mask(self) -> np.ndarray:
        """Boolean mask of pixels carrying a real depth."""
        return self.values > 0

    def valid_count(self) -> int:
        return int(np.count_nonzero(self.values))

    def __repr__(self):
        return f"DepthMap({self.width}x{self.height}, {self.valid_count()} valid)"


class RigidTransform:
    """SE(3) transform stored as a 4x4 row-major homogeneous matrix.

    The rotation block must be orthonormal with determinant +1 (checked to
    1e-6) and the bottom row exactly ``[0, 0, 0, 1]``.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise InputError(f"rigid transform must be 4x4, got {matrix.shape}")
        if not np.array_equal(matrix[3], [0.0, 0.0, 0.0, 1.0]):
            raise InputError("bottom row must be exactly [0, 0, 0, 1]")
        r = matrix[:3, :3]
        if not np.allclose(r.T @ r, np.eye(3), atol=_ROT_TOL):
            raise InputError("rotation block is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ROT_TOL:
            raise InputError("rotation block must have determinant +1")
        self.matrix = matrix

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(4))

    @classmethod
    def from_rotation_translation(cls, rotation: np.ndarray, translation) -> "RigidTransform":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = np.asarray(translation, dtype=np.float64)
        return cls(m)

    @classmethod
    def from_translation(cls, translation) -> "RigidTransform":
        return cls.from_rotation_translation(np.eye(3), translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to an (N, 3) array of points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def __repr__(self):
        return f"RigidTransform(\n{self.matrix}\n)"


@dataclass
class PointCloud:
    """Colored 3-D points in some camera (or object) frame.

    ``points`` is (N, 3) float64, ``colors`` (N, 3) float32 in [0, 1].
    ``source_pixels`` optionally records the originating (row, col) pixel of
    each point; ``view_ids`` the originating view index after fusion.
    ``normals`` optionally carries per-point unit surface normals expressed in
    the same frame as ``points`` (rows of zeros mean "unknown").
    """

    points: np.ndarray
    colors: np.ndarray
    source_pixels: np.ndarray | None = None
    view_ids: np.ndarray | None = None
    normals: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float32).reshape(-1, 3)
        n = len(self.points)
        if len(self.colors) != n:
            raise InputError(f"points ({n}) and colors ({len(self.colors)}) length mismatch")
        if not np.isfinite(self.points).all():
            raise InputError("point coordinates must be finite")
        if self.source_pixels is not None:
            self.source_pixels = np.asarray(self.source_pixels, dtype=np.int64).reshape(-1, 2)
            if len(self.source_pixels) != n:
                raise InputError("source_pixels length mismatch")
        if self.view_ids is not None:
            self.view_ids = np.asarray(self.view_ids, dtype=np.int32).reshape(-1)
            if len(self.view_ids) != n:
                raise InputError("view_ids length mismatch")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(self.normals) != n:
                raise InputError("normals length mismatch")

    def __len__(self):
        return len(self.points)

    def take(self, indices) -> "PointCloud":
        """Subset by index array, keeping all per-point attributes aligned."""
        return PointCloud(
            points=self.points[indices],
            colors=self.colors[indices],
            source_pixels=None if self.source_pixels is None else self.source_pixels[indices],
            view_ids=None if self.view_ids is None else self.view_ids[indices],
            normals=None if self.normals is None else self.normals[indices],
        )

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(points=np.zeros((0, 3)), colors=np.zeros((0, 3), dtype=np.float32))


@dataclass
class FlowField:
    """Per-source-pixel continuous target coordinates and target depth.

    ``u``/``v`` hold the target pixel coordinates of each source pixel,
    ``depth`` the corresponding target-camera depth. Entries are meaningful
    only where ``valid`` is True (source depth valid and target depth > 0).
    """

    u: np.ndarray
    v: np.ndarray
    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        shapes = {self.u.shape, self.v.shape, self.depth.shape, self.valid.shape}
        if len(shapes) != 1:
            raise InputError("flow field components must share one shape")


@dataclass(frozen=True)
class OrbitPose:
    """Camera on a sphere around the origin, looking at the origin.

    ``azimuth``/``elevation`` in degrees, ``radius`` in scene units. Azimuth 0,
    elevation 0 places the camera at ``(0, 0, -radius)``; azimuth rotates the
    position about the world +Y (up) axis toward +X, positive elevation lifts
    it toward +Y.
    """

    azimuth: float
    elevation: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InputError(f"orbit radius must be positive, got {self.radius}")
        if not (0.0 <= self.azimuth < 360.0):
            raise InputError(f"azimuth must lie in [0, 360), got {self.azimuth}")
        if not (-90.0 <= self.elevation <= 90.0):
            raise InputError(f"elevation must lie in [-90, 90], got {self.elevation}")


@dataclass
class ProjectedPoints:
    """Result of projecting a point cloud: one row per point with Z > 0.

    ``kept`` holds the index of each projected point in the input cloud, in
    input order; ``dropped`` counts points discarded for Z <= 0.
    """

    u: np.ndarray
    v: np.ndarray
    depth: np.ndarray
    colors: np.ndarray
    kept: np.ndarray
    dropped: int


def _check_dims(k: CameraIntrinsics, **named_shapes):
    for name, shape in named_shapes.items():
        if shape[:2] != (k.height, k.width):
            raise InputError(
                f"{name} shape {shape[:2]} does not match intrinsics "
                f"{k.height}x{k.width}"
            )


def pixel_grid(k: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """(u, v) pixel-center coordinate grids, each of shape (height, width)."""
    u, v = np.meshgrid(
        np.arange(k.width, dtype=np.float64),
        np.arange(k.height, dtype=np.float64),
    )
    return u, v


def backproject(depth: DepthMap, k: CameraIntrinsics, image: np.ndarray) -> PointCloud:
    """Lift every valid depth pixel to a colored 3-D point in the camera frame.

    Each pixel maps to ``K^-1 * D(u, v) * [u, v, 1]^T``, i.e.
    ``(D*(u-cx)/fx, D*(v-cy)/fy, D)``. Colors are copied from ``image``
    ((H, W, 3), float in [0, 1]); invalid pixels produce no point. The
    resulting cloud is ordered row-major over the source pixels and records
    each point's source (row, col).
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InputError(f"image must be (H, W, 3), got {image.shape}")
    _check_dims(k, depth=depth.values.shape, image=image.shape)

    mask = depth.valid_mask
    vs, us = np.nonzero(mask)
    d = depth.values[vs, us]
    x = d * (us - k.cx) / k.fx
    y = d * (vs - k.cy) / k.fy
    return PointCloud(
        points=np.stack([x, y, d], axis=1),
        colors=image[vs, us].astype(np.float32),
        source_pixels=np.stack([vs, us], axis=1),
    )


def project(cloud: PointCloud, k: CameraIntrinsics) -> ProjectedPoints:
    """Project cloud points through K; points with Z <= 0 are dropped.

    Returns continuous pixel coordinates ``u = fx*X/Z + cx``,
    ``v = fy*Y/Z + cy`` together with the camera depth Z and the point's
    color. Order of the surviving points follows the input cloud.
    """
    z = cloud.points[:, 2]
    keep = z > 0
    dropped = int(len(cloud) - np.count_nonzero(keep))
    pts = cloud.points[keep]
    u = k.fx * pts[:, 0] / pts[:, 2] + k.cx
    v = k.fy * pts[:, 1] / pts[:, 2] + k.cy
    return ProjectedPoints(
        u=u,
        v=v,
        depth=pts[:, 2].copy(),
        colors=cloud.colors[keep],
        kept=np.nonzero(keep)[0],
        dropped=dropped,
    )


def transform_cloud(cloud: PointCloud, theta: RigidTransform) -> PointCloud:
    """Apply ``P -> R*P + t`` to every point; colors, order and per-point
    attributes are preserved. Normals, if present, rotate with R."""
    return PointCloud(
        points=theta.apply(cloud.points),
        colors=cloud.colors,
        source_pixels=cloud.source_pixels,
        view_ids=cloud.view_ids,
        normals=None if cloud.normals is None else cloud.normals @ theta.rotation.T,
    )


def flow_field(depth: DepthMap, k: CameraIntrinsics, theta: RigidTransform) -> FlowField:
    """Per-pixel map from source pixels to target-view pixel coordinates.

    Computes ``K * theta * K^-1 * D * [u, v, 1]^T`` per valid source pixel;
    the homogeneous result ``[x, y, z]`` yields target coordinates
    ``(x/z, y/z)`` and target depth ``z``. Entries with invalid source depth
    or ``z <= 0`` are flagged invalid.
    """
    _check_dims(k, depth=depth.values.shape)
    km = k.matrix()
    a = km @ theta.rotation @ k.inverse_matrix()
    b = km @ theta.translation

    u, v = pixel_grid(k)
    d = depth.values
    # homogeneous source point scaled by depth: D * [u, v, 1]
    p = np.stack([d * u, d * v, d], axis=-1)
    q = p @ a.T + b
    z = q[..., 2]

    valid = depth.valid_mask & (z > 0)
    out_u = np.zeros_like(d)
    out_v = np.zeros_like(d)
    out_d = np.zeros_like(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(q[..., 0], z, out=out_u, where=valid)
        np.divide(q[..., 1], z, out=out_v, where=valid)
    out_d[valid] = z[valid]
    return FlowField(u=out_u, v=out_v, depth=out_d, valid=valid)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform applying ``b`` first, then ``a`` (matrix product a @ b)."""
    m = a.matrix @ b.matrix
    m[3] = [0.0, 0.0, 0.0, 1.0]
    return RigidTransform(m)


def invert(a: RigidTransform) -> RigidTransform:
    """Exact SE(3) inverse: ``[R^T | -R^T t]``."""
    r = a.rotation.T
    return RigidTransform.from_rotation_translation(r, -r @ a.translation)


def relative_pose(source: RigidTransform, target: RigidTransform) -> RigidTransform:
    """Source-camera to target-camera transform from two world-to-camera poses.

    Equals ``target o invert(source)``; applying it to source-camera
    coordinates yields target-camera coordinates.
    """
    return compose(target, invert(source))


def pose_from_orbit(pose: OrbitPose) -> RigidTransform:
    """World-to-camera transform of an orbit camera looking at the origin.

    The camera sits at
    ``r * (cos(el)*sin(az), sin(el), -cos(el)*cos(az))`` with the world +Y
    axis as the up direction. Elevation of exactly +/-90 degrees makes the
    up vector degenerate and is rejected.
    """
    if abs(pose.elevation) >= 90.0:
        raise InputError("elevation of +/-90 degrees makes the up vector degenerate")
    az = math.radians(pose.azimuth)
    el = math.radians(pose.elevation)
    eye = pose.radius * np.array(
        [math.cos(el) * math.sin(az), math.sin(el), -math.cos(el) * math.cos(az)]
    )
    return look_at(eye, np.zeros(3))


def look_at(eye: np.ndarray, target: np.ndarray) -> RigidTransform:
    """World-to-camera transform for a camera at ``eye`` looking at ``target``.

    Uses world +Y as up. In this package's camera frame (+Y down in image
    space) the camera axes in world coordinates are ``z = normalize(target -
    eye)``, ``x = normalize(z x up)`` and ``y = z x x``.
    """
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(forward)
    if norm == 0:
        raise InputError("look_at eye and target coincide")
    forward = forward / norm
    up = np.array([0.0, 1.0, 0.0])
    x = np.cross(forward, up)
    xn = np.linalg.norm(x)
    if xn < 1e-12:
        raise InputError("viewing direction parallel to the up vector")
    x = x / xn
    y = np.cross(forward, x)
    # rows of R are the camera axes -> world-to-camera rotation
    r = np.stack([x, y, forward])
    return RigidTransform.from_rotation_translation(r, -r @ eye)
