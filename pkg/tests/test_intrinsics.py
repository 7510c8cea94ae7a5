"""Planar-target calibration: homographies, closed form, joint refinement.

Synthetic targets are rendered from known cameras, so every estimate has an
exact ground truth to land on. Noiseless data must be recovered to near
machine precision; noisy data must settle at the injected noise level.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from groundcam.geometry import (
    CameraIntrinsics,
    CameraPose,
    Distortion,
    axis_angle_from_rotation,
    project_points,
    rotation_from_axis_angle,
)
from groundcam.intrinsics import (
    CalibrationSolution,
    DegenerateConfiguration,
    InsufficientViews,
    NonPositiveDefinite,
    PlanarView,
    calibrate_intrinsics,
    estimate_homography,
    extrinsics_from_homography,
    homography_from_points,
    reprojection_rmse,
    refine_calibration,
    zhang_closed_form,
)

# ---------------------------------------------------------------------------
# Synthetic target builders
# ---------------------------------------------------------------------------

TRUE_K = CameraIntrinsics(642.41, 642.54, 322.80, 239.76)


def _pattern(cols: int = 9, rows: int = 6, square: float = 25.0) -> np.ndarray:
    xs, ys = np.meshgrid(np.arange(cols) * square, np.arange(rows) * square)
    return np.column_stack([xs.ravel(), ys.ravel()]).astype(float)


def _random_target_pose(rng: np.random.Generator) -> CameraPose:
    """Tilted target pose keeping the whole pattern in front of the camera."""
    tilt = np.array(
        [
            rng.choice([-1.0, 1.0]) * rng.uniform(0.15, 0.5),
            rng.choice([-1.0, 1.0]) * rng.uniform(0.15, 0.5),
            rng.uniform(-0.5, 0.5),
        ]
    )
    r = rotation_from_axis_angle(tilt)
    t = np.array(
        [
            -100.0 + rng.uniform(-40, 40),
            -62.5 + rng.uniform(-30, 30),
            rng.uniform(500, 900),
        ]
    )
    return CameraPose(r, t)


def _synthetic_views(
    k: CameraIntrinsics,
    n_views: int,
    rng: np.random.Generator,
    noise_px: float = 0.0,
) -> tuple[list[PlanarView], list[CameraPose]]:
    pattern = _pattern()
    world = np.column_stack([pattern, np.zeros(len(pattern))])
    views, poses = [], []
    for i in range(n_views):
        pose = _random_target_pose(rng)
        pixels = project_points(world, k, pose)
        if noise_px > 0:
            pixels = pixels + rng.normal(0.0, noise_px, pixels.shape)
        views.append(PlanarView(view_id=f"view{i}", pixels=pixels, pattern=pattern))
        poses.append(pose)
    return views, poses


def _rotation_gap_rad(a: CameraPose, b: CameraPose) -> float:
    return float(np.linalg.norm(axis_angle_from_rotation(a.rotation.T @ b.rotation)))


# ---------------------------------------------------------------------------
# Homography estimation
# ---------------------------------------------------------------------------


class TestHomography:
    def test_identity_mapping(self):
        pts = _pattern(4, 3, 30.0)
        h = homography_from_points(pts, pts)
        assert np.allclose(h, np.eye(3), atol=1e-10)

    def test_recovers_known_projective_map(self, rng):
        true_h = np.array(
            [
                [1.2, 0.1, 15.0],
                [-0.05, 0.9, -22.0],
                [1e-4, -2e-4, 1.0],
            ]
        )
        src = rng.uniform(-200, 200, (25, 2))
        hom = np.column_stack([src, np.ones(len(src))]) @ true_h.T
        dst = hom[:, :2] / hom[:, 2:]
        est = homography_from_points(src, dst)
        assert np.allclose(est / est[2, 2], true_h, atol=1e-8)

    def test_estimated_map_reproduces_points(self, rng):
        view, _ = _synthetic_views(TRUE_K, 1, rng)
        h = estimate_homography(view[0])
        hom = np.column_stack(
            [view[0].pattern, np.ones(len(view[0]))]
        ) @ h.T
        mapped = hom[:, :2] / hom[:, 2:]
        assert np.max(np.abs(mapped - view[0].pixels)) < 1e-8

    def test_collinear_points_rejected(self):
        src = np.column_stack([np.arange(6.0), np.zeros(6)])
        dst = src * 2.0
        with pytest.raises(DegenerateConfiguration):
            homography_from_points(src, dst)

    def test_too_few_points_rejected(self):
        pts = _pattern(3, 1, 10.0)
        with pytest.raises(DegenerateConfiguration):
            homography_from_points(pts, pts)

    def test_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            homography_from_points(np.zeros((5, 2)), np.zeros((4, 2)))


# ---------------------------------------------------------------------------
# Closed-form intrinsics
# ---------------------------------------------------------------------------


class TestZhangClosedForm:
    def test_recovers_camera_from_exact_views(self, rng):
        views, _ = _synthetic_views(TRUE_K, 10, rng)
        hs = [estimate_homography(v) for v in views]
        k = zhang_closed_form(hs, assume_zero_skew=True)
        assert k.alpha_x == pytest.approx(TRUE_K.alpha_x, rel=1e-6)
        assert k.alpha_y == pytest.approx(TRUE_K.alpha_y, rel=1e-6)
        assert k.u0 == pytest.approx(TRUE_K.u0, rel=1e-6)
        assert k.v0 == pytest.approx(TRUE_K.v0, rel=1e-6)
        assert k.gamma == 0.0

    def test_recovers_skewed_camera(self, rng):
        skewed = CameraIntrinsics(600.0, 620.0, 310.0, 250.0, gamma=3.5)
        views, _ = _synthetic_views(skewed, 8, rng)
        hs = [estimate_homography(v) for v in views]
        k = zhang_closed_form(hs, assume_zero_skew=False)
        assert k.alpha_x == pytest.approx(600.0, rel=1e-6)
        assert k.alpha_y == pytest.approx(620.0, rel=1e-6)
        assert k.gamma == pytest.approx(3.5, abs=1e-4)

    def test_two_views_suffice_with_zero_skew(self, rng):
        views, _ = _synthetic_views(TRUE_K, 2, rng)
        hs = [estimate_homography(v) for v in views]
        k = zhang_closed_form(hs, assume_zero_skew=True)
        assert k.alpha_x == pytest.approx(TRUE_K.alpha_x, rel=1e-5)

    def test_frontoparallel_views_degenerate(self):
        # Pure translations of the target leave multiple conics consistent.
        pattern = _pattern()
        world = np.column_stack([pattern, np.zeros(len(pattern))])
        hs = []
        for tx in (-120.0, -100.0, -80.0):
            pose = CameraPose(np.eye(3), np.array([tx, -60.0, 700.0]))
            pixels = project_points(world, TRUE_K, pose)
            hs.append(
                estimate_homography(
                    PlanarView(view_id="flat", pixels=pixels, pattern=pattern)
                )
            )
        with pytest.raises(NonPositiveDefinite):
            zhang_closed_form(hs, assume_zero_skew=True)

    def test_view_count_enforced(self):
        with pytest.raises(InsufficientViews):
            zhang_closed_form([np.eye(3)], assume_zero_skew=True)
        with pytest.raises(InsufficientViews):
            zhang_closed_form([np.eye(3), np.eye(3)], assume_zero_skew=False)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            zhang_closed_form([np.eye(3), np.eye(4)], assume_zero_skew=True)


class TestExtrinsicsFromHomography:
    def test_recovers_view_poses(self, rng):
        views, poses = _synthetic_views(TRUE_K, 6, rng)
        for view, truth in zip(views, poses):
            est = extrinsics_from_homography(TRUE_K, estimate_homography(view))
            assert _rotation_gap_rad(est, truth) < 1e-8
            assert np.max(np.abs(est.translation - truth.translation)) < 1e-6

    def test_frontoparallel_view(self):
        pattern = _pattern()
        world = np.column_stack([pattern, np.zeros(len(pattern))])
        truth = CameraPose(np.eye(3), np.array([-100.0, -60.0, 650.0]))
        pixels = project_points(world, TRUE_K, truth)
        view = PlanarView(view_id="flat", pixels=pixels, pattern=pattern)
        est = extrinsics_from_homography(TRUE_K, estimate_homography(view))
        assert _rotation_gap_rad(est, truth) < 1e-8
        assert est.translation[2] > 0

    def test_homography_sign_does_not_matter(self, rng):
        views, poses = _synthetic_views(TRUE_K, 1, rng)
        h = estimate_homography(views[0])
        a = extrinsics_from_homography(TRUE_K, h)
        b = extrinsics_from_homography(TRUE_K, -h)
        assert np.allclose(a.rotation, b.rotation, atol=1e-12)
        assert np.allclose(a.translation, b.translation, atol=1e-12)


# ---------------------------------------------------------------------------
# Joint refinement and the full pipeline
# ---------------------------------------------------------------------------


class TestCalibratePipeline:
    def test_noiseless_views_recover_camera_exactly(self, rng):
        views, _ = _synthetic_views(TRUE_K, 10, rng)
        solution = calibrate_intrinsics(views)
        k = solution.intrinsics
        assert solution.rmse_px < 1e-8
        assert k.alpha_x == pytest.approx(TRUE_K.alpha_x, rel=1e-8)
        assert k.alpha_y == pytest.approx(TRUE_K.alpha_y, rel=1e-8)
        assert k.u0 == pytest.approx(TRUE_K.u0, rel=1e-8)
        assert k.v0 == pytest.approx(TRUE_K.v0, rel=1e-8)

    def test_noiseless_views_recover_lens_model(self, rng):
        true_k = TRUE_K.with_distortion(
            Distortion(k1=-0.1, k2=0.02, p1=1e-4, p2=-5e-5)
        )
        views, _ = _synthetic_views(true_k, 10, rng)
        solution = calibrate_intrinsics(views)
        k = solution.intrinsics
        assert solution.rmse_px < 1e-7
        assert k.alpha_x == pytest.approx(true_k.alpha_x, rel=1e-6)
        assert k.distortion.k1 == pytest.approx(-0.1, abs=1e-6)
        assert k.distortion.k2 == pytest.approx(0.02, abs=1e-6)
        assert k.distortion.p1 == pytest.approx(1e-4, abs=1e-7)
        assert k.distortion.p2 == pytest.approx(-5e-5, abs=1e-7)
        assert k.distortion.k3 == 0.0
        assert k.gamma == 0.0

    def test_noisy_views_settle_at_noise_level(self, rng):
        views, _ = _synthetic_views(TRUE_K, 20, rng, noise_px=0.5)
        solution = calibrate_intrinsics(views)
        assert 0.3 < solution.rmse_px < 0.7
        assert solution.intrinsics.alpha_x == pytest.approx(
            TRUE_K.alpha_x, rel=0.02
        )

    def test_refinement_never_increases_rmse(self, rng):
        views, _ = _synthetic_views(TRUE_K, 5, rng, noise_px=1.0)
        hs = [estimate_homography(v) for v in views]
        k0 = zhang_closed_form(hs, assume_zero_skew=True)
        poses = tuple(extrinsics_from_homography(k0, h) for h in hs)
        init = CalibrationSolution(
            intrinsics=k0,
            poses=poses,
            rmse_px=reprojection_rmse(views, k0, list(poses)),
        )
        refined = refine_calibration(views, init)
        assert refined.rmse_px <= init.rmse_px + 1e-12

    def test_skew_fit_when_unpinned(self, rng):
        skewed = CameraIntrinsics(600.0, 620.0, 310.0, 250.0, gamma=3.5)
        views, _ = _synthetic_views(skewed, 8, rng)
        solution = calibrate_intrinsics(views, fix_skew=False)
        assert solution.intrinsics.gamma == pytest.approx(3.5, abs=1e-4)
        assert solution.rmse_px < 1e-7

    def test_view_count_enforced(self, rng):
        views, _ = _synthetic_views(TRUE_K, 1, rng)
        with pytest.raises(InsufficientViews):
            calibrate_intrinsics(views)
        with pytest.raises(InsufficientViews):
            calibrate_intrinsics(views * 2, fix_skew=False)

    def test_pose_count_mismatch_rejected(self, rng):
        views, poses = _synthetic_views(TRUE_K, 3, rng)
        init = CalibrationSolution(
            intrinsics=TRUE_K,
            poses=tuple(poses[:2]),
            rmse_px=0.0,
        )
        with pytest.raises(ValueError):
            refine_calibration(views, init)


class TestReprojectionRmse:
    def test_zero_for_exact_views(self, rng):
        views, poses = _synthetic_views(TRUE_K, 3, rng)
        assert reprojection_rmse(views, TRUE_K, poses) < 1e-12

    def test_uniform_offset_gives_its_magnitude(self, rng):
        # Shifting every pixel by (3, 4) adds 9 and 16 to the stacked
        # squares, so the RMS over scalars is 5 / sqrt(2).
        views, poses = _synthetic_views(TRUE_K, 2, rng)
        shifted = [
            PlanarView(
                view_id=v.view_id,
                pixels=v.pixels + np.array([3.0, 4.0]),
                pattern=v.pattern,
            )
            for v in views
        ]
        rmse = reprojection_rmse(shifted, TRUE_K, poses)
        assert rmse == pytest.approx(5.0 / math.sqrt(2.0), abs=1e-9)


# ---------------------------------------------------------------------------
# PlanarView validation
# ---------------------------------------------------------------------------


class TestPlanarView:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            PlanarView("v", np.zeros((5, 2)), np.zeros((5, 3)))

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            PlanarView("v", np.zeros((3, 2)), _pattern(3, 1, 10.0)[:3])

    def test_non_finite_rejected(self):
        pattern = _pattern(2, 2, 10.0)
        pixels = pattern.copy()
        pixels[0, 0] = math.nan
        with pytest.raises(ValueError):
            PlanarView("v", pixels, pattern)

    def test_duplicate_pattern_points_rejected(self):
        pattern = _pattern(2, 2, 10.0).copy()
        pattern[3] = pattern[0]
        with pytest.raises(ValueError):
            PlanarView("v", pattern, pattern)

    def test_len_and_read_only(self):
        pattern = _pattern(3, 2, 10.0)
        view = PlanarView("v", pattern, pattern)
        assert len(view) == 6
        with pytest.raises(ValueError):
            view.pixels[0, 0] = 1.0
