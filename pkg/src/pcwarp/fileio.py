"""File formats: 8-bit PNG images, PFM depth maps, PLY point clouds and the
JSON configuration records (intrinsics, poses, scenes).

All writers are atomic (write to a temp file in the destination directory,
then rename), so interrupted runs never leave truncated outputs.
"""

from __future__ import annotations

import io
import json
import os
import tempfile

import numpy as np
from PIL import Image

from .errors import InputError
from .geometry import (
    CameraIntrinsics,
    DepthMap,
    OrbitPose,
    PointCloud,
    RigidTransform,
    invert,
    pose_from_orbit,
    relative_pose,
)
from .oracle import SceneSpec

__all__ = [
    "load_image",
    "save_image",
    "load_depth",
    "save_depth",
    "save_ply",
    "load_ply",
    "load_intrinsics",
    "load_pose",
    "load_view_pose",
    "pose_from_obj",
    "load_scene",
    "atomic_write_bytes",
]


def atomic_write_bytes(path: str, data: bytes):
    """Write bytes to ``path`` via a temp file + rename in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# PNG images
# --------------------------------------------------------------------------


def load_image(path: str) -> np.ndarray:
    """Load an 8-bit RGB or RGBA PNG as (H, W, 3) float32 in [0, 1].

    Alpha, if present, is dropped. Other modes (palette, grayscale, 16-bit)
    are rejected.
    """
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    if img.mode not in ("RGB", "RGBA"):
        raise InputError(
            f"unsupported image mode {img.mode!r} in {path}: need 8-bit RGB or RGBA"
        )
    arr = np.asarray(img, dtype=np.uint8)[..., :3]
    return arr.astype(np.float32) / np.float32(255.0)


def save_image(path: str, image: np.ndarray):
    """Save a float RGB image in [0, 1] as an 8-bit PNG (round half up)."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InputError(f"image must be (H, W, 3), got {image.shape}")
    u8 = np.clip(np.floor(image.astype(np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8, mode="RGB").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def mask_to_image(mask: np.ndarray) -> np.ndarray:
    """Boolean mask as a black/white float RGB image."""
    return np.repeat(mask.astype(np.float32)[..., None], 3, axis=2)


# --------------------------------------------------------------------------
# PFM depth maps (single channel)
# --------------------------------------------------------------------------


def save_depth(path: str, depth: DepthMap):
    """Write a single-channel little-endian PFM (scale line "-1.0").

    Values are stored as float32, rows bottom-to-top per the format; a
    float32 round trip is bit exact and the 0.0 sentinel is preserved.
    """
    values = depth.values.astype("<f4")
    header = f"Pf\n{depth.width} {depth.height}\n-1.0\n".encode("ascii")
    atomic_write_bytes(path, header + np.flipud(values).tobytes())


def _read_pfm_line(f, what: str) -> tuple[bytes, int]:
    line = f.readline()
    if not line.endswith(b"\n"):
        raise InputError(
            f"truncated PFM file: {what} line unterminated at byte offset {f.tell()}"
        )
    return line.strip(), f.tell()


def load_depth(path: str) -> DepthMap:
    """Read a single-channel PFM depth map.

    Handles both little-endian (negative scale line) and big-endian
    (positive scale) files; the scale magnitude is ignored, as is common.
    """
    with open(path, "rb") as f:
        magic, _ = _read_pfm_line(f, "header")
        if magic == b"PF":
            raise InputError(f"{path}: color (3-channel) PFM is not supported")
        if magic != b"Pf":
            raise InputError(f"{path}: not a PFM file (header {magic!r})")
        dims, _ = _read_pfm_line(f, "dimension")
        try:
            width, height = (int(t) for t in dims.split())
        except ValueError as exc:
            raise InputError(f"{path}: malformed PFM dimension line {dims!r}") from exc
        if width <= 0 or height <= 0:
            raise InputError(f"{path}: invalid PFM dimensions {width}x{height}")
        scale_raw, data_start = _read_pfm_line(f, "scale")
        try:
            scale = float(scale_raw)
        except ValueError as exc:
            raise InputError(f"{path}: malformed PFM scale line {scale_raw!r}") from exc
        dtype = "<f4" if scale < 0 else ">f4"
        need = width * height * 4
        buf = f.read(need)
        if len(buf) != need:
            raise InputError(
                f"{path}: truncated PFM data: expected {need} bytes at offset "
                f"{data_start}, file ends at byte offset {data_start + len(buf)}"
            )
    values = np.frombuffer(buf, dtype=dtype).reshape(height, width)
    return DepthMap(np.flipud(values).astype(np.float64))


# --------------------------------------------------------------------------
# PLY point clouds
# --------------------------------------------------------------------------

_PLY_PROPERTIES = [
    "property float x",
    "property float y",
    "property float z",
    "property uchar red",
    "property uchar green",
    "property uchar blue",
]


def save_ply(cloud: PointCloud, path: str, binary: bool = False):
    """Write x,y,z float32 + red,green,blue uchar PLY (ascii or binary LE)."""
    fmt = "binary_little_endian" if binary else "ascii"
    header = "\n".join(
        ["ply", f"format {fmt} 1.0", f"element vertex {len(cloud)}"]
        + _PLY_PROPERTIES
        + ["end_header", ""]
    ).encode("ascii")

    pts = cloud.points.astype("<f4")
    rgb = np.clip(np.floor(cloud.colors.astype(np.float64) * 255.0 + 0.5), 0, 255).astype(
        np.uint8
    )
    if binary:
        rec = np.zeros(
            len(cloud),
            dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                   ("red", "u1"), ("green", "u1"), ("blue", "u1")],
        )
        rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
        rec["red"], rec["green"], rec["blue"] = rgb[:, 0], rgb[:, 1], rgb[:, 2]
        body = rec.tobytes()
    else:
        lines = [
            "%.9g %.9g %.9g %d %d %d" % (p[0], p[1], p[2], c[0], c[1], c[2])
            for p, c in zip(pts, rgb)
        ]
        body = ("\n".join(lines) + ("\n" if lines else "")).encode("ascii")
    atomic_write_bytes(path, header + body)


def load_ply(path: str) -> PointCloud:
    """Read a PLY written by :func:`save_ply` (same property layout)."""
    with open(path, "rb") as f:
        data = f.read()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply\n") or end < 0:
        raise InputError(f"{path}: not a PLY file")
    header_lines = data[: end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]

    fmt = None
    count = None
    props = []
    for line in header_lines[1:]:
        if line.startswith("format "):
            fmt = line.split()[1]
        elif line.startswith("element vertex "):
            count = int(line.split()[-1])
        elif line.startswith("element "):
            raise InputError(f"{path}: unsupported PLY element {line!r}")
        elif line.startswith("property "):
            props.append(line)
    if fmt not in ("ascii", "binary_little_endian"):
        raise InputError(f"{path}: unsupported PLY format {fmt!r}")
    if count is None or props != _PLY_PROPERTIES:
        raise InputError(f"{path}: unsupported PLY vertex layout")

    if count == 0:
        return PointCloud.empty()
    if fmt == "ascii":
        try:
            rows = np.loadtxt(io.BytesIO(body), dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise InputError(f"{path}: malformed PLY body: {exc}") from exc
        if rows.shape != (count, 6):
            raise InputError(f"{path}: PLY body does not match vertex count")
        pts = rows[:, :3].astype(np.float32).astype(np.float64)
        rgb = rows[:, 3:].astype(np.float32) / 255.0
    else:
        if len(body) < count * 15:
            raise InputError(f"{path}: truncated PLY body")
        rec = np.frombuffer(
            body[: count * 15],
            dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                   ("red", "u1"), ("green", "u1"), ("blue", "u1")],
        )
        pts = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
        rgb = np.stack([rec["red"], rec["green"], rec["blue"]], axis=1).astype(np.float32) / 255.0
    return PointCloud(points=pts, colors=rgb)


# --------------------------------------------------------------------------
# JSON configuration records
# --------------------------------------------------------------------------


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc


def load_intrinsics(path: str) -> CameraIntrinsics:
    """Intrinsics from ``{"fx":..,"fy":..,"cx":..,"cy":..,"width":..,"height":..}``."""
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise InputError(f"{path}: intrinsics file must hold a JSON object")
    return CameraIntrinsics.from_dict(obj)


def _orbit_from_dict(d: dict) -> OrbitPose:
    try:
        return OrbitPose(
            azimuth=float(d["azimuth"]),
            elevation=float(d["elevation"]),
            radius=float(d["radius"]),
        )
    except KeyError as exc:
        raise InputError(f"orbit record missing key: {exc}") from exc


def pose_from_obj(obj) -> RigidTransform:
    """Parse a pose JSON value.

    Accepted forms:
      * a 4x4 row-major matrix (nested list), used verbatim;
      * ``{"matrix": [[...]]}``, same;
      * an orbit record ``{"azimuth":..,"elevation":..,"radius":..}``, giving
        the world-to-camera transform of that orbit camera;
      * ``{"from": <pose>, "to": <pose>}``, giving the relative
        source-to-target transform between two world-to-camera poses.
    """
    if isinstance(obj, list):
        return RigidTransform(np.asarray(obj, dtype=np.float64))
    if isinstance(obj, dict):
        if "matrix" in obj:
            return RigidTransform(np.asarray(obj["matrix"], dtype=np.float64))
        if "from" in obj or "to" in obj:
            if "from" not in obj or "to" not in obj:
                raise InputError("relative pose needs both 'from' and 'to'")
            return relative_pose(pose_from_obj(obj["from"]), pose_from_obj(obj["to"]))
        if "azimuth" in obj:
            return pose_from_orbit(_orbit_from_dict(obj))
    raise InputError(f"unrecognized pose record: {obj!r}")


def load_pose(path: str) -> RigidTransform:
    """Pose from a JSON file; see :func:`pose_from_obj` for accepted forms."""
    return pose_from_obj(_load_json(path))


def load_view_pose(path: str) -> RigidTransform:
    """Absolute camera-to-world pose of a view.

    Matrix records are taken as camera-to-world verbatim; orbit records are
    converted (an orbit record defines a world-to-camera extrinsic, which is
    inverted here).
    """
    obj = _load_json(path)
    if isinstance(obj, dict) and "azimuth" in obj and "matrix" not in obj:
        return invert(pose_from_orbit(_orbit_from_dict(obj)))
    return pose_from_obj(obj)


def load_scene(path: str) -> SceneSpec:
    """Scene description from JSON; see :class:`pcwarp.oracle.SceneSpec`."""
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise InputError(f"{path}: scene file must hold a JSON object")
    return SceneSpec.from_dict(obj)
