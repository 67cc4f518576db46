"""Shared fixtures: a standard camera and the analytic scenes used as ground
truth throughout the suite."""

import numpy as np
import pytest

from pcwarp import (
    CameraIntrinsics,
    CheckerTexture,
    OrbitPose,
    Primitive,
    RigidTransform,
    SceneSpec,
    pose_from_orbit,
)

ORBIT_RADIUS = 3.0


def orbit(azimuth, elevation=0.0, radius=ORBIT_RADIUS) -> RigidTransform:
    """World-to-camera pose for an orbit camera looking at the origin."""
    return pose_from_orbit(OrbitPose(azimuth, elevation, radius))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_pose(rng: np.random.Generator, t_scale=1.0) -> RigidTransform:
    return RigidTransform.from_rotation_translation(
        random_rotation(rng), rng.uniform(-t_scale, t_scale, size=3)
    )


@pytest.fixture(scope="session")
def k192() -> CameraIntrinsics:
    return CameraIntrinsics(fx=190.0, fy=190.0, cx=95.5, cy=95.5, width=192, height=192)


@pytest.fixture(scope="session")
def k65() -> CameraIntrinsics:
    return CameraIntrinsics(fx=100.0, fy=100.0, cx=32.0, cy=32.0, width=65, height=65)


@pytest.fixture(scope="session")
def cube_scene() -> SceneSpec:
    tex = CheckerTexture(
        period=0.3, color_a=(0.6, 0.45, 0.35), color_b=(0.4, 0.55, 0.65)
    )
    return SceneSpec([Primitive(kind="cube", size=1.2, texture=tex)])


@pytest.fixture(scope="session")
def plane_scene() -> SceneSpec:
    tex = CheckerTexture(
        period=0.4, color_a=(0.6, 0.45, 0.35), color_b=(0.4, 0.55, 0.65)
    )
    return SceneSpec([Primitive(kind="plane", size=4.0, texture=tex)])


@pytest.fixture(scope="session")
def chair_scene() -> SceneSpec:
    """Left-right symmetric two-plane scene (seat + back).

    Checker cells are centered on the local x=0 line (texture origin at half
    a period), so the appearance mirrors exactly about the world x=0 plane.
    The back panel at +z makes the scene asymmetric fore-aft.
    """
    tex_seat = CheckerTexture(
        period=0.3, color_a=(0.7, 0.45, 0.3), color_b=(0.35, 0.5, 0.65), origin=(0.15, 0.0)
    )
    tex_back = CheckerTexture(
        period=0.25, color_a=(0.5, 0.6, 0.3), color_b=(0.3, 0.4, 0.6), origin=(0.125, 0.0)
    )
    # seat: local +Z rotated onto world +Y
    rx = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    seat = Primitive(
        kind="plane",
        size=1.2,
        texture=tex_seat,
        pose=RigidTransform.from_rotation_translation(rx, [0.0, -0.1, 0.0]),
    )
    back = Primitive(
        kind="plane",
        size=1.2,
        texture=tex_back,
        pose=RigidTransform.from_translation([0.0, 0.5, 0.55]),
    )
    return SceneSpec([seat, back], symmetric=True)
