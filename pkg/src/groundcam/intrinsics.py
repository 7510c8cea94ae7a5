"""Planar-target intrinsic calibration.

Pipeline: normalized DLT homographies per view, closed-form recovery of the
calibration matrix from absolute-conic constraints, per-view extrinsics from
each homography, then a joint Levenberg-Marquardt refinement of intrinsics,
lens coefficients, and all view poses against total reprojection error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    CameraIntrinsics,
    CameraPose,
    Distortion,
    axis_angle_from_rotation,
    nearest_rotation,
    project_points,
    rotation_from_axis_angle,
)
from .optim import (
    LeastSquaresProblem,
    LmOptions,
    levenberg_marquardt,
)


class CalibrationError(ValueError):
    """Base class for calibration failure modes."""


class DegenerateConfiguration(CalibrationError):
    """Point layout does not determine a unique homography."""


class InsufficientViews(CalibrationError):
    """Too few planar views for the closed-form intrinsic solution."""


class NonPositiveDefinite(CalibrationError):
    """Absolute-conic solution is not a valid camera (degenerate motions)."""


@dataclass(frozen=True, eq=False)
class PlanarView:
    """One photographed planar target: pixels (n, 2) against pattern xy (n, 2).

    Pattern coordinates are millimeters on the target plane (z = 0 implied).
    """

    view_id: str
    pixels: np.ndarray
    pattern: np.ndarray

    def __post_init__(self) -> None:
        px = np.array(self.pixels, dtype=float)
        pt = np.array(self.pattern, dtype=float)
        if px.ndim != 2 or px.shape[1] != 2 or px.shape != pt.shape:
            raise ValueError("pixels and pattern must both be (n, 2) arrays")
        if px.shape[0] < 4:
            raise ValueError("a planar view needs at least 4 correspondences")
        if not (np.all(np.isfinite(px)) and np.all(np.isfinite(pt))):
            raise ValueError("correspondences must be finite")
        if len(np.unique(pt, axis=0)) != pt.shape[0]:
            raise ValueError("pattern points must be distinct")
        px.setflags(write=False)
        pt.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "pattern", pt)

    def __len__(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class CalibrationSolution:
    """Intrinsics plus one target-to-camera pose per view and the pixel RMSE."""

    intrinsics: CameraIntrinsics
    poses: tuple[CameraPose, ...]
    rmse_px: float


def _normalization(points: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin and mean distance to sqrt(2)."""
    centroid = points.mean(axis=0)
    distances = np.linalg.norm(points - centroid, axis=1)
    mean = distances.mean()
    scale = math.sqrt(2.0) / mean if mean > 0 else 1.0
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def homography_from_points(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """DLT homography mapping src (n, 2) to dst (n, 2), normalized, H33 = 1.

    Raises DegenerateConfiguration for fewer than 4 points or a layout whose
    constraint system keeps more than a one-dimensional null space (all points
    collinear, coincident, or otherwise rank deficient).
    """
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    if src.shape[0] != dst.shape[0]:
        raise ValueError("correspondence counts differ")
    n = src.shape[0]
    if n < 4:
        raise DegenerateConfiguration(f"need at least 4 correspondences, got {n}")
    t_src = _normalization(src)
    t_dst = _normalization(dst)
    sh = np.column_stack([src, np.ones(n)]) @ t_src.T
    dh = np.column_stack([dst, np.ones(n)]) @ t_dst.T

    rows = np.zeros((2 * n, 9))
    rows[0::2, 0:3] = sh
    rows[0::2, 6:9] = -dh[:, 0:1] * sh
    rows[1::2, 3:6] = sh
    rows[1::2, 6:9] = -dh[:, 1:2] * sh
    _, s, vt = np.linalg.svd(rows)
    if s[7] < 1e-10 * s[0]:
        raise DegenerateConfiguration(
            "points do not determine a unique homography "
            f"(singular values {s[7]:.3g} and {s[8]:.3g} of {s[0]:.3g})"
        )
    h_norm = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_norm @ t_src
    if abs(h[2, 2]) < 1e-12:
        raise DegenerateConfiguration("homography maps the origin to infinity")
    return h / h[2, 2]


def estimate_homography(view: PlanarView) -> np.ndarray:
    """Homography taking pattern xy coordinates to pixels for one view."""
    return homography_from_points(view.pattern, view.pixels)


def _vij(h: np.ndarray, i: int, j: int) -> np.ndarray:
    return np.array(
        [
            h[0, i] * h[0, j],
            h[0, i] * h[1, j] + h[1, i] * h[0, j],
            h[1, i] * h[1, j],
            h[2, i] * h[0, j] + h[0, i] * h[2, j],
            h[2, i] * h[1, j] + h[1, i] * h[2, j],
            h[2, i] * h[2, j],
        ]
    )


def zhang_closed_form(
    homographies: list[np.ndarray], assume_zero_skew: bool = False
) -> CameraIntrinsics:
    """Closed-form intrinsics from planar homographies, zero lens model.

    Each homography contributes the two absolute-conic constraints
    v12.b = 0 and (v11 - v22).b = 0. Needs three views in general
    orientation, or two when skew is pinned to zero. Raises
    NonPositiveDefinite when the constraints do not describe a physical
    camera (for example all views frontoparallel or pure translations).
    """
    needed = 2 if assume_zero_skew else 3
    if len(homographies) < needed:
        raise InsufficientViews(
            f"need at least {needed} views, got {len(homographies)}"
        )
    rows = []
    for h in homographies:
        h = np.asarray(h, dtype=float)
        if h.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {h.shape}")
        rows.append(_vij(h, 0, 1))
        rows.append(_vij(h, 0, 0) - _vij(h, 1, 1))
    if assume_zero_skew:
        rows.append(np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]))
    v = np.vstack(rows)
    _, s, vt = np.linalg.svd(v)
    if s[4] < 1e-10 * s[0]:
        raise NonPositiveDefinite(
            "view orientations are degenerate; the conic constraints keep "
            "a multi-dimensional null space"
        )
    b = vt[-1]
    b11, b12, b22, b13, b23, b33 = b
    if b11 < 0:
        b11, b12, b22, b13, b23, b33 = -b11, -b12, -b22, -b13, -b23, -b33
    denom = b11 * b22 - b12 * b12
    if b11 <= 0 or denom <= 0:
        raise NonPositiveDefinite("conic solution is not positive definite")
    v0 = (b12 * b13 - b11 * b23) / denom
    lam = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11
    if lam <= 0:
        raise NonPositiveDefinite("conic solution yields a non-positive scale")
    alpha_x = math.sqrt(lam / b11)
    alpha_y = math.sqrt(lam * b11 / denom)
    gamma = -b12 * alpha_x * alpha_x * alpha_y / lam
    u0 = gamma * v0 / alpha_y - b13 * alpha_x * alpha_x / lam
    if assume_zero_skew:
        gamma = 0.0
    return CameraIntrinsics(alpha_x, alpha_y, u0, v0, gamma)


def extrinsics_from_homography(
    k: CameraIntrinsics, h: np.ndarray
) -> CameraPose:
    """Target-plane pose from one homography: r1, r2 from scaled Kinv columns,
    r3 = r1 x r2, projected to the nearest rotation; sign chosen so the target
    sits in front of the camera."""
    h = np.asarray(h, dtype=float)
    kinv = np.linalg.inv(k.matrix)
    a1 = kinv @ h[:, 0]
    a2 = kinv @ h[:, 1]
    a3 = kinv @ h[:, 2]
    scale = 1.0 / np.linalg.norm(a1)
    r1, r2, t = scale * a1, scale * a2, scale * a3
    if t[2] < 0:
        r1, r2, t = -r1, -r2, -t
    r = nearest_rotation(np.column_stack([r1, r2, np.cross(r1, r2)]))
    return CameraPose(r, t)


def _pack(
    k: CameraIntrinsics,
    poses: list[CameraPose],
    fix_skew: bool,
    fix_k3: bool,
) -> np.ndarray:
    d = k.distortion
    head = [k.alpha_x, k.alpha_y]
    if not fix_skew:
        head.append(k.gamma)
    head += [k.u0, k.v0, d.k1, d.k2]
    if not fix_k3:
        head.append(d.k3)
    head += [d.p1, d.p2]
    parts = [np.array(head)]
    for pose in poses:
        parts.append(axis_angle_from_rotation(pose.rotation))
        parts.append(pose.translation)
    return np.concatenate(parts)


def _shared_count(fix_skew: bool, fix_k3: bool) -> int:
    return 10 - int(fix_skew) - int(fix_k3)


def _unpack_intrinsics(x: np.ndarray, fix_skew: bool, fix_k3: bool) -> CameraIntrinsics:
    i = 0

    def take() -> float:
        nonlocal i
        i += 1
        return float(x[i - 1])

    alpha_x = take()
    alpha_y = take()
    gamma = 0.0 if fix_skew else take()
    u0 = take()
    v0 = take()
    k1 = take()
    k2 = take()
    k3 = 0.0 if fix_k3 else take()
    p1 = take()
    p2 = take()
    return CameraIntrinsics(
        alpha_x, alpha_y, u0, v0, gamma, Distortion(k1, k2, k3, p1, p2)
    )


def _unpack_pose(x: np.ndarray, n_shared: int, view_index: int) -> CameraPose:
    i = n_shared + 6 * view_index
    return CameraPose(rotation_from_axis_angle(x[i : i + 3]), x[i + 3 : i + 6])


def _unpack(
    x: np.ndarray, n_views: int, fix_skew: bool, fix_k3: bool
) -> tuple[CameraIntrinsics, list[CameraPose]]:
    k = _unpack_intrinsics(x, fix_skew, fix_k3)
    n_shared = _shared_count(fix_skew, fix_k3)
    poses = [_unpack_pose(x, n_shared, v) for v in range(n_views)]
    return k, poses


def reprojection_rmse(
    views: list[PlanarView], k: CameraIntrinsics, poses: list[CameraPose]
) -> float:
    """Root mean square of the stacked pixel residuals across every view.

    The u and v errors enter as separate scalars, so a fit to noise of
    standard deviation sigma settles near sigma rather than sigma*sqrt(2).
    """
    total = 0.0
    count = 0
    for view, pose in zip(views, poses):
        world = np.column_stack([view.pattern, np.zeros(len(view))])
        predicted = project_points(world, k, pose, clamp_depth=True)
        total += float(np.sum((predicted - view.pixels) ** 2))
        count += 2 * len(view)
    return math.sqrt(total / count)


def refine_calibration(
    views: list[PlanarView],
    init: CalibrationSolution,
    fix_skew: bool = True,
    fix_k3: bool = True,
    options: LmOptions = LmOptions(),
) -> CalibrationSolution:
    """Jointly refine intrinsics, lens model, and all view poses.

    Parameter order: alpha_x, alpha_y, (gamma), u0, v0, k1, k2, (k3), p1, p2,
    then per view an axis-angle rotation and translation. The returned RMSE
    never exceeds the initialization's because only cost-decreasing steps are
    accepted. With fix_skew the output gamma is exactly 0, with fix_k3 the
    output k3 is exactly 0.
    """
    if len(views) != len(init.poses):
        raise ValueError("one initial pose per view is required")
    worlds = [np.column_stack([v.pattern, np.zeros(len(v))]) for v in views]
    observed = np.vstack([v.pixels for v in views])
    n_points = observed.shape[0]
    n_views = len(views)

    start_k = init.intrinsics
    if fix_skew and start_k.gamma != 0.0:
        start_k = CameraIntrinsics(
            start_k.alpha_x, start_k.alpha_y, start_k.u0, start_k.v0,
            0.0, start_k.distortion,
        )
    if fix_k3 and start_k.distortion.k3 != 0.0:
        d = start_k.distortion
        start_k = start_k.with_distortion(Distortion(d.k1, d.k2, 0.0, d.p1, d.p2))
    x0 = _pack(start_k, list(init.poses), fix_skew, fix_k3)

    def residual(x: np.ndarray) -> np.ndarray:
        k, poses = _unpack(x, n_views, fix_skew, fix_k3)
        rows = [
            project_points(world, k, pose, clamp_depth=True)
            for world, pose in zip(worlds, poses)
        ]
        return (np.vstack(rows) - observed).ravel()

    n_params = x0.shape[0]
    n_shared = _shared_count(fix_skew, fix_k3)
    starts = np.cumsum([0] + [len(v) for v in views])

    def jacobian(x: np.ndarray, base_step: float = 1e-6) -> np.ndarray:
        # Central differences exploiting the problem's block structure: a
        # shared intrinsic column touches every row but leaves the poses
        # untouched, and a view's six pose columns touch only that view's
        # rows and leave the intrinsics untouched.
        k0, poses0 = _unpack(x, n_views, fix_skew, fix_k3)
        jac = np.zeros((2 * n_points, n_params))
        for i in range(n_params):
            h = max(base_step, base_step * abs(x[i]))
            forward = x.copy()
            forward[i] += h
            backward = x.copy()
            backward[i] -= h
            if i < n_shared:
                kf = _unpack_intrinsics(forward, fix_skew, fix_k3)
                kb = _unpack_intrinsics(backward, fix_skew, fix_k3)
                for v, (world, pose) in enumerate(zip(worlds, poses0)):
                    rows = slice(2 * starts[v], 2 * starts[v + 1])
                    diff = project_points(world, kf, pose, clamp_depth=True) \
                        - project_points(world, kb, pose, clamp_depth=True)
                    jac[rows, i] = diff.ravel() / (2.0 * h)
            else:
                v = (i - n_shared) // 6
                rows = slice(2 * starts[v], 2 * starts[v + 1])
                pf = _unpack_pose(forward, n_shared, v)
                pb = _unpack_pose(backward, n_shared, v)
                diff = project_points(worlds[v], k0, pf, clamp_depth=True) \
                    - project_points(worlds[v], k0, pb, clamp_depth=True)
                jac[rows, i] = diff.ravel() / (2.0 * h)
        return jac

    problem = LeastSquaresProblem(
        residual=residual,
        n_params=n_params,
        n_residuals=2 * n_points,
        jacobian=jacobian,
    )
    result = levenberg_marquardt(problem, x0, options)
    k, poses = _unpack(result.x, n_views, fix_skew, fix_k3)
    rmse = math.sqrt(result.cost / n_points)
    return CalibrationSolution(intrinsics=k, poses=tuple(poses), rmse_px=rmse)


def calibrate_intrinsics(
    views: list[PlanarView],
    fix_skew: bool = True,
    fix_k3: bool = True,
    options: LmOptions = LmOptions(),
) -> CalibrationSolution:
    """Full pipeline: homographies, closed form, per-view extrinsics, refinement."""
    needed = 2 if fix_skew else 3
    if len(views) < needed:
        raise InsufficientViews(f"need at least {needed} views, got {len(views)}")
    homographies = [estimate_homography(v) for v in views]
    k0 = zhang_closed_form(homographies, assume_zero_skew=fix_skew)
    poses = [extrinsics_from_homography(k0, h) for h in homographies]
    init = CalibrationSolution(
        intrinsics=k0,
        poses=tuple(poses),
        rmse_px=reprojection_rmse(views, k0, poses),
    )
    return refine_calibration(views, init, fix_skew=fix_skew, fix_k3=fix_k3, options=options)
