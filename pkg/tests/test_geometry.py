"""Camera model, rigid transforms and flow fields.

Expected values for the non-trivial cases are recomputed in the tests from
first principles (explicit K^-1 * D * p products, hand-built rotation
matrices, or the explicit backproject -> transform -> project chain).
"""

import numpy as np
import pytest

from pcwarp import (
    CameraIntrinsics,
    DepthMap,
    InputError,
    OrbitPose,
    PointCloud,
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

from conftest import orbit, random_pose, random_rotation


def _cloud(points, colors=None):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if colors is None:
        colors = np.zeros((len(points), 3), dtype=np.float32)
    return PointCloud(points=points, colors=colors)


class TestTypes:
    def test_intrinsics_validation(self):
        CameraIntrinsics(fx=100, fy=100, cx=32, cy=32, width=64, height=64)
        with pytest.raises(InputError):
            CameraIntrinsics(fx=0, fy=100, cx=32, cy=32, width=64, height=64)
        with pytest.raises(InputError):
            CameraIntrinsics(fx=100, fy=100, cx=64, cy=32, width=64, height=64)

    def test_depth_map_rejects_bad_values(self):
        with pytest.raises(InputError):
            DepthMap(np.array([[1.0, -0.5]]))
        with pytest.raises(InputError):
            DepthMap(np.array([[np.nan, 1.0]]))
        with pytest.raises(InputError):
            DepthMap(np.array([[np.inf, 1.0]]))

    def test_depth_map_valid_mask(self):
        d = DepthMap(np.array([[0.0, 2.0], [1.5, 0.0]]))
        assert d.valid_mask.tolist() == [[False, True], [True, False]]
        assert d.valid_count() == 2

    def test_rigid_transform_validation(self):
        RigidTransform.identity()
        m = np.eye(4)
        m[0, 0] = 2.0  # not orthonormal
        with pytest.raises(InputError):
            RigidTransform(m)
        m = np.eye(4)
        m[3, 3] = 1.0 + 1e-9  # bottom row must be exact
        with pytest.raises(InputError):
            RigidTransform(m)
        m = np.diag([1.0, 1.0, -1.0, 1.0])  # det -1 reflection
        with pytest.raises(InputError):
            RigidTransform(m)

    def test_point_cloud_validation(self):
        with pytest.raises(InputError):
            PointCloud(points=np.zeros((2, 3)), colors=np.zeros((3, 3)))
        with pytest.raises(InputError):
            PointCloud(points=np.array([[np.inf, 0, 0]]), colors=np.zeros((1, 3)))


class TestBackproject:
    def test_principal_ray(self):
        k = CameraIntrinsics(fx=1, fy=1, cx=0, cy=0, width=3, height=3)
        d = np.zeros((3, 3))
        d[0, 0] = 1.0
        cloud = backproject(DepthMap(d), k, np.zeros((3, 3, 3), np.float32))
        np.testing.assert_array_equal(cloud.points, [[0.0, 0.0, 1.0]])

    def test_hand_matrix_multiply(self):
        # K^-1 * D * [u, v, 1] computed explicitly for pixel (u=2, v=1), D=2
        k = CameraIntrinsics(fx=1, fy=1, cx=0, cy=0, width=3, height=3)
        expected = np.linalg.inv(k.matrix()) @ (2.0 * np.array([2.0, 1.0, 1.0]))
        np.testing.assert_allclose(expected, [4.0, 2.0, 2.0])

        d = np.zeros((3, 3))
        d[1, 2] = 2.0  # row v=1, col u=2
        img = np.zeros((3, 3, 3), np.float32)
        img[1, 2] = (0.25, 0.5, 0.75)
        cloud = backproject(DepthMap(d), k, img)
        np.testing.assert_allclose(cloud.points, [expected], atol=1e-15)
        np.testing.assert_array_equal(cloud.colors, [[0.25, 0.5, 0.75]])
        np.testing.assert_array_equal(cloud.source_pixels, [[1, 2]])

    def test_all_invalid_gives_empty_cloud(self):
        k = CameraIntrinsics(fx=1, fy=1, cx=0, cy=0, width=4, height=4)
        cloud = backproject(DepthMap(np.zeros((4, 4))), k, np.zeros((4, 4, 3), np.float32))
        assert len(cloud) == 0

    def test_dimension_mismatch(self):
        k = CameraIntrinsics(fx=1, fy=1, cx=0, cy=0, width=4, height=4)
        with pytest.raises(InputError):
            backproject(DepthMap(np.ones((3, 4))), k, np.zeros((4, 4, 3), np.float32))
        with pytest.raises(InputError):
            backproject(DepthMap(np.ones((4, 4))), k, np.zeros((3, 4, 3), np.float32))


class TestProject:
    def test_unit_point(self):
        k = CameraIntrinsics(fx=1, fy=1, cx=0, cy=0, width=4, height=4)
        p = project(_cloud([[0, 0, 1]]), k)
        assert (p.u[0], p.v[0], p.depth[0]) == (0.0, 0.0, 1.0)
        assert p.dropped == 0

    def test_inverse_of_backproject_example(self):
        k = CameraIntrinsics(fx=1, fy=1, cx=0, cy=0, width=4, height=4)
        p = project(_cloud([[4, 2, 2]]), k)
        np.testing.assert_allclose([p.u[0], p.v[0], p.depth[0]], [2.0, 1.0, 2.0])

    def test_behind_camera_dropped_and_counted(self):
        k = CameraIntrinsics(fx=1, fy=1, cx=0, cy=0, width=4, height=4)
        p = project(_cloud([[0, 0, -1], [0, 0, 2], [0, 0, 0]]), k)
        assert p.dropped == 2
        np.testing.assert_array_equal(p.kept, [1])

    def test_round_trip_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            w = h = 32
            k = CameraIntrinsics(
                fx=rng.uniform(20, 400),
                fy=rng.uniform(20, 400),
                cx=rng.uniform(8, 24),
                cy=rng.uniform(8, 24),
                width=w,
                height=h,
            )
            depth = DepthMap(rng.uniform(0.5, 10.0, size=(h, w)))
            cloud = backproject(depth, k, np.zeros((h, w, 3), np.float32))
            p = project(cloud, k)
            us = cloud.source_pixels[:, 1].astype(float)
            vs = cloud.source_pixels[:, 0].astype(float)
            assert np.abs(p.u - us).max() < 1e-5
            assert np.abs(p.v - vs).max() < 1e-5
            assert np.abs(p.depth - depth.values[depth.valid_mask]).max() < 1e-9


class TestTransformCloud:
    def test_identity_bit_for_bit(self):
        cloud = _cloud([[0.1, -0.2, 0.3], [1, 2, 3]])
        out = transform_cloud(cloud, RigidTransform.identity())
        assert np.array_equal(out.points, cloud.points)
        assert np.array_equal(out.colors, cloud.colors)

    def test_pure_translation(self):
        theta = RigidTransform.from_translation([1, 0, 0])
        out = transform_cloud(_cloud([[0, 0, 1]]), theta)
        np.testing.assert_array_equal(out.points, [[1.0, 0.0, 1.0]])

    def test_90_degree_yaw(self):
        # right-handed rotation about +Y by 90 degrees, matrix built by hand
        ry = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
        theta = RigidTransform.from_rotation_translation(ry, [0, 0, 0])
        out = transform_cloud(_cloud([[1, 0, 0]]), theta)
        np.testing.assert_allclose(out.points, [[0.0, 0.0, -1.0]], atol=1e-15)

    def test_invalid_rotation_rejected(self):
        m = np.eye(4)
        m[:3, :3] *= 1.1
        with pytest.raises(InputError):
            transform_cloud(_cloud([[0, 0, 1]]), RigidTransform(m))

    def test_rigidity_preserves_distances(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(40, 3))
        cloud = _cloud(pts)
        for _ in range(10):
            out = transform_cloud(cloud, random_pose(rng, t_scale=5.0))
            d0 = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
            d1 = np.linalg.norm(out.points[:, None] - out.points[None], axis=-1)
            assert np.abs(d0 - d1).max() < 1e-9


class TestFlowField:
    def test_identity_is_identity_map(self):
        k = CameraIntrinsics(fx=37.0, fy=53.0, cx=7.5, cy=6.5, width=16, height=14)
        rng = np.random.default_rng(3)
        depth = DepthMap(rng.uniform(0.5, 10.0, size=(14, 16)))
        ff = flow_field(depth, k, RigidTransform.identity())
        u, v = np.meshgrid(np.arange(16.0), np.arange(14.0))
        assert ff.valid.all()
        assert np.abs(ff.u - u).max() < 1e-9
        assert np.abs(ff.v - v).max() < 1e-9
        assert np.abs(ff.depth - depth.values).max() < 1e-12

    def test_z_translation_magnifies_from_principal_point(self):
        # halving the depth doubles the offset from the principal point
        k = CameraIntrinsics(fx=50, fy=50, cx=2.0, cy=1.5, width=4, height=4)
        depth = DepthMap(np.full((4, 4), 2.0))
        theta = RigidTransform.from_translation([0, 0, -1.0])
        ff = flow_field(depth, k, theta)
        u, v = np.meshgrid(np.arange(4.0), np.arange(4.0))
        np.testing.assert_allclose(ff.u, k.cx + 2.0 * (u - k.cx), atol=1e-12)
        np.testing.assert_allclose(ff.v, k.cy + 2.0 * (v - k.cy), atol=1e-12)
        np.testing.assert_allclose(ff.depth, 1.0)

    def test_matches_explicit_composition(self):
        # oracle: the explicit backproject -> transform -> project chain
        rng = np.random.default_rng(17)
        k = CameraIntrinsics(fx=80, fy=95, cx=15.5, cy=16.5, width=32, height=32)
        img = np.zeros((32, 32, 3), np.float32)
        compared = 0
        for _ in range(25):
            depth = DepthMap(rng.uniform(0.5, 10.0, size=(32, 32)))
            theta = random_pose(rng, t_scale=0.3)
            ff = flow_field(depth, k, theta)
            cloud = backproject(depth, k, img)
            proj = project(transform_cloud(cloud, theta), k)
            vs = cloud.source_pixels[proj.kept, 0]
            us = cloud.source_pixels[proj.kept, 1]
            # grazing projections (z -> 0) make pixel coordinates unbounded,
            # so no absolute pixel tolerance applies there
            sel = ff.valid[vs, us] & (proj.depth > 0.05)
            if not sel.any():
                continue  # pose looks entirely away from the scene
            compared += int(sel.sum())
            assert np.abs(ff.u[vs, us][sel] - proj.u[sel]).max() < 1e-9
            assert np.abs(ff.v[vs, us][sel] - proj.v[sel]).max() < 1e-9
            assert np.abs(ff.depth[vs, us][sel] - proj.depth[sel]).max() < 1e-9
        assert compared > 1000

    def test_composition_of_poses_chains(self):
        rng = np.random.default_rng(23)
        k = CameraIntrinsics(fx=60, fy=60, cx=7.5, cy=7.5, width=16, height=16)
        img = np.zeros((16, 16, 3), np.float32)
        depth = DepthMap(rng.uniform(1.0, 5.0, size=(16, 16)))
        t1 = random_pose(rng, t_scale=0.2)
        t2 = random_pose(rng, t_scale=0.2)
        ff = flow_field(depth, k, compose(t2, t1))
        chained = project(
            transform_cloud(transform_cloud(backproject(depth, k, img), t1), t2), k
        )
        cloud = backproject(depth, k, img)
        vs = cloud.source_pixels[chained.kept, 0]
        us = cloud.source_pixels[chained.kept, 1]
        sel = ff.valid[vs, us]
        assert np.abs(ff.u[vs, us][sel] - chained.u[sel]).max() < 1e-9
        assert np.abs(ff.v[vs, us][sel] - chained.v[sel]).max() < 1e-9


class TestComposeInvert:
    def test_compose_identity(self):
        x = random_pose(np.random.default_rng(1))
        out = compose(RigidTransform.identity(), x)
        np.testing.assert_array_equal(out.matrix, x.matrix)

    def test_invert_translation(self):
        t = RigidTransform.from_translation([1, -2, 3])
        np.testing.assert_allclose(invert(t).translation, [-1, 2, -3], atol=1e-15)

    def test_compose_with_inverse_is_identity(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            a = random_pose(rng, t_scale=10.0)
            np.testing.assert_allclose(
                compose(a, invert(a)).matrix, np.eye(4), atol=1e-9
            )

    def test_associativity(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a, b, c = (random_pose(rng) for _ in range(3))
            m1 = compose(compose(a, b), c).matrix
            m2 = compose(a, compose(b, c)).matrix
            assert np.abs(m1 - m2).max() < 1e-12


class TestOrbit:
    def test_convention_anchor(self):
        # az=0, el=0, r=2: camera at (0,0,-2), principal ray through the origin
        pose = pose_from_orbit(OrbitPose(0.0, 0.0, 2.0))
        center = invert(pose).translation
        np.testing.assert_allclose(center, [0.0, 0.0, -2.0], atol=1e-12)
        np.testing.assert_allclose(pose.apply([[0.0, 0.0, 0.0]]), [[0.0, 0.0, 2.0]], atol=1e-12)

    def test_opposite_azimuths_differ_by_half_turn_about_up(self):
        p0 = orbit(0.0, 0.0, 2.0)
        p180 = orbit(180.0, 0.0, 2.0)
        rel = relative_pose(p0, p180)
        r = rel.rotation
        # 180-degree rotation: trace == -1
        assert abs(np.trace(r) + 1.0) < 1e-9
        # rotation axis expressed in world coordinates is the up axis
        w, vecs = np.linalg.eigh((r + r.T) / 2.0)
        axis_cam = vecs[:, np.argmax(w)]
        axis_world = p0.rotation.T @ axis_cam
        np.testing.assert_allclose(np.abs(axis_world), [0.0, 1.0, 0.0], atol=1e-9)
        # the object center stays at the same camera coordinates
        np.testing.assert_allclose(rel.apply([[0.0, 0.0, 2.0]]), [[0.0, 0.0, 2.0]], atol=1e-9)

    def test_pose_to_itself_is_identity(self):
        p = orbit(40.0, 10.0, 3.0)
        np.testing.assert_allclose(relative_pose(p, p).matrix, np.eye(4), atol=1e-12)

    def test_degenerate_elevation_rejected(self):
        with pytest.raises(InputError):
            pose_from_orbit(OrbitPose(0.0, 90.0, 1.0))
        with pytest.raises(InputError):
            pose_from_orbit(OrbitPose(0.0, -90.0, 1.0))

    def test_orbit_pose_validation(self):
        with pytest.raises(InputError):
            OrbitPose(azimuth=0.0, elevation=0.0, radius=0.0)
        with pytest.raises(InputError):
            OrbitPose(azimuth=360.0, elevation=0.0, radius=1.0)
        with pytest.raises(InputError):
            OrbitPose(azimuth=0.0, elevation=95.0, radius=1.0)

    def test_elevation_lifts_camera(self):
        center = invert(orbit(0.0, 30.0, 2.0)).translation
        assert center[1] == pytest.approx(2.0 * np.sin(np.radians(30.0)))
