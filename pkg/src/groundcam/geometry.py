"""Pinhole camera geometry: projection, lens distortion, ground-plane back-projection.

Coordinate conventions used throughout the package:

* World (field) frame: right handed, millimeters, z up; z = 0 is the carpet.
* Camera frame: x right, y down, z forward along the optical axis.
* Image frame: u rightward, v downward, pixels, origin at the top-left corner.
* ``CameraPose`` holds the world-to-camera rotation R and translation t, so a
  world point p has camera coordinates R @ p + t and the camera center in
  world coordinates is -R.T @ t.
* Euler angles (omega, phi, kappa) are degrees at the API boundary and
  compose as R = Rz(kappa) @ Ry(phi) @ Rx(omega).

Every type is immutable after construction and every function is pure, so the
whole module is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Vec = np.ndarray
Mat = np.ndarray

MIN_PROJECTION_DEPTH_MM = 1e-9
RAY_NORMAL_EPS = 1e-12
ROTATION_TOL = 1e-9
UNDISTORT_MAX_ITERATIONS = 20
UNDISTORT_STEP_TOL = 1e-12
UNDISTORT_RESIDUAL_TOL = 1e-8


class GeometryError(ValueError):
    """Base class for geometric failure modes."""


class PointBehindCamera(GeometryError):
    """World point has non-positive depth in the camera frame."""


class RayParallelToPlane(GeometryError):
    """Viewing ray never meets the requested horizontal plane."""


class PointNotOnGround(GeometryError):
    """Plane intersection lies behind the camera (pixel above the horizon)."""


class NonConvergence(GeometryError):
    """Iterative undistortion failed to invert the lens model."""


class GimbalLock(GeometryError):
    """Euler angles are not uniquely recoverable (|cos phi| ~ 0)."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, slots=True)
class Distortion:
    """Brown-Conrady lens coefficients: radial k1..k3, tangential p1, p2."""

    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("k1", "k2", "k3", "p1", "p2"):
            object.__setattr__(self, name, float(getattr(self, name)))
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"distortion coefficient {name} must be finite")

    @property
    def is_zero(self) -> bool:
        return self.k1 == self.k2 == self.k3 == self.p1 == self.p2 == 0.0


@dataclass(frozen=True, slots=True)
class CameraIntrinsics:
    """Focal lengths and principal point in pixels, plus the lens model.

    gamma is the skew term; it multiplies the normalized y coordinate in the
    pixel-u equation and is 0 for square-pixel sensors.
    """

    alpha_x: float
    alpha_y: float
    u0: float
    v0: float
    gamma: float = 0.0
    distortion: Distortion = field(default_factory=Distortion)

    def __post_init__(self) -> None:
        for name in ("alpha_x", "alpha_y", "u0", "v0", "gamma"):
            object.__setattr__(self, name, float(getattr(self, name)))
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"intrinsic parameter {name} must be finite")
        if not (self.alpha_x > 0 and self.alpha_y > 0):
            raise ValueError("focal lengths must be positive")

    @property
    def matrix(self) -> Mat:
        """3x3 calibration matrix K."""
        return np.array(
            [
                [self.alpha_x, self.gamma, self.u0],
                [0.0, self.alpha_y, self.v0],
                [0.0, 0.0, 1.0],
            ]
        )

    def normalized_from_pixel(self, u: float, v: float) -> tuple[float, float]:
        """Invert K for one pixel, ignoring distortion."""
        y = (v - self.v0) / self.alpha_y
        x = (u - self.u0 - self.gamma * y) / self.alpha_x
        return x, y

    def pixel_from_normalized(self, x: float, y: float) -> tuple[float, float]:
        return (
            self.alpha_x * x + self.gamma * y + self.u0,
            self.alpha_y * y + self.v0,
        )

    def with_distortion(self, distortion: Distortion) -> "CameraIntrinsics":
        return CameraIntrinsics(
            self.alpha_x, self.alpha_y, self.u0, self.v0, self.gamma, distortion
        )


@dataclass(frozen=True, slots=True)
class WorldPoint:
    """Point in the field frame, millimeters."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not all(map(math.isfinite, (self.x, self.y, self.z))):
            raise ValueError("world coordinates must be finite")

    @property
    def array(self) -> Vec:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True, slots=True)
class PixelPoint:
    """Image location in pixels; may fall outside the sensor bounds."""

    u: float
    v: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "v", float(self.v))
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError("pixel coordinates must be finite")

    @property
    def array(self) -> Vec:
        return np.array([self.u, self.v])


@dataclass(frozen=True, slots=True)
class EulerAngles:
    """Rotation as (omega, phi, kappa) degrees, each in (-180, 180]."""

    omega: float
    phi: float
    kappa: float

    def __post_init__(self) -> None:
        for name in ("omega", "phi", "kappa"):
            object.__setattr__(self, name, float(getattr(self, name)))
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"angle {name} must be finite")
            if not -180.0 < value <= 180.0:
                raise ValueError(f"angle {name}={value} outside (-180, 180]")


@dataclass(frozen=True, eq=False)
class CameraPose:
    """World-to-camera rigid transform: rotation (3,3) and translation (3,)."""

    rotation: Mat
    translation: Vec

    def __post_init__(self) -> None:
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ValueError("pose entries must be finite")
        if np.max(np.abs(r.T @ r - np.eye(3))) > ROTATION_TOL:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > ROTATION_TOL:
            raise ValueError("rotation determinant must be +1")
        object.__setattr__(self, "rotation", _readonly(r))
        object.__setattr__(self, "translation", _readonly(t))


def _rot_x(a: float) -> Mat:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a: float) -> Mat:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a: float) -> Mat:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def nearest_rotation(m: Mat) -> Mat:
    """Orthonormal matrix closest to m in the Frobenius sense, det +1."""
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return r


def rotation_from_axis_angle(rvec: Vec) -> Mat:
    """Rodrigues map from a 3-vector whose norm is the angle in radians."""
    rvec = np.asarray(rvec, dtype=float).reshape(3)
    angle = np.linalg.norm(rvec)
    if angle < 1e-12:
        return np.eye(3)
    k = rvec / angle
    kx = np.array(
        [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]]
    )
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


def axis_angle_from_rotation(r: Mat) -> Vec:
    """Inverse Rodrigues map; returns the zero vector for the identity."""
    r = np.asarray(r, dtype=float)
    cos_a = max(-1.0, min(1.0, (np.trace(r) - 1.0) / 2.0))
    angle = math.acos(cos_a)
    if angle < 1e-12:
        return np.zeros(3)
    if angle > math.pi - 1e-6:
        # Near pi the off-diagonal difference vanishes; recover the axis from
        # the symmetric part instead.
        m = (r + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(m), 0.0))
        idx = int(np.argmax(axis))
        if axis[idx] > 0:
            axis = axis / axis[idx] * math.sqrt(m[idx, idx])
            if m[idx, (idx + 1) % 3] < 0:
                axis[(idx + 1) % 3] = -abs(axis[(idx + 1) % 3])
            if m[idx, (idx + 2) % 3] < 0:
                axis[(idx + 2) % 3] = -abs(axis[(idx + 2) % 3])
        norm = np.linalg.norm(axis)
        if norm == 0:
            return np.zeros(3)
        return axis / norm * angle
    v = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return v / (2.0 * math.sin(angle)) * angle


def distort_normalized(x: float, y: float, d: Distortion) -> tuple[float, float]:
    """Apply the Brown-Conrady model to one normalized image coordinate."""
    r2 = x * x + y * y
    radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3))
    xd = x * radial + 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x)
    yd = y * radial + d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y
    return xd, yd


def project(p: WorldPoint, k: CameraIntrinsics, pose: CameraPose) -> PixelPoint:
    """Project a world point to a pixel, applying the lens model.

    Raises PointBehindCamera when the camera-frame depth is <= 1e-9 mm.
    """
    pc = pose.rotation @ p.array + pose.translation
    if pc[2] <= MIN_PROJECTION_DEPTH_MM:
        raise PointBehindCamera(
            f"point ({p.x}, {p.y}, {p.z}) has camera depth {pc[2]:.6g} mm"
        )
    x = pc[0] / pc[2]
    y = pc[1] / pc[2]
    xd, yd = distort_normalized(x, y, k.distortion)
    return PixelPoint(*k.pixel_from_normalized(xd, yd))


def project_points(
    points: np.ndarray,
    k: CameraIntrinsics,
    pose: CameraPose,
    clamp_depth: bool = False,
) -> np.ndarray:
    """Vectorized projection of an (n, 3) array of world points to (n, 2) pixels.

    With clamp_depth the depth magnitude is floored at 1e-9 mm, sign preserved,
    so optimizer trial poses produce large finite residuals instead of raising.
    Without it a point at or behind the camera raises PointBehindCamera.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    pc = pts @ pose.rotation.T + pose.translation
    z = pc[:, 2]
    if clamp_depth:
        small = np.abs(z) < MIN_PROJECTION_DEPTH_MM
        z = np.where(small, np.where(z < 0, -1.0, 1.0) * MIN_PROJECTION_DEPTH_MM, z)
    elif np.any(z <= MIN_PROJECTION_DEPTH_MM):
        bad = np.nonzero(z <= MIN_PROJECTION_DEPTH_MM)[0]
        raise PointBehindCamera(f"points at indices {bad.tolist()} are behind the camera")
    x = pc[:, 0] / z
    y = pc[:, 1] / z
    d = k.distortion
    if d.is_zero:
        xd, yd = x, y
    else:
        r2 = x * x + y * y
        radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3))
        xd = x * radial + 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x)
        yd = y * radial + d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y
    u = k.alpha_x * xd + k.gamma * yd + k.u0
    v = k.alpha_y * yd + k.v0
    return np.column_stack([u, v])


def distort(px: PixelPoint, k: CameraIntrinsics) -> PixelPoint:
    """Push an ideal pinhole pixel through the lens model."""
    x, y = k.normalized_from_pixel(px.u, px.v)
    xd, yd = distort_normalized(x, y, k.distortion)
    return PixelPoint(*k.pixel_from_normalized(xd, yd))


def undistort(px: PixelPoint, k: CameraIntrinsics) -> PixelPoint:
    """Invert the lens model by fixed-point iteration on normalized coordinates.

    Runs at most 20 iterations, stopping early when the step drops below
    1e-12. With an all-zero lens model the input is returned unchanged.
    Raises NonConvergence when the forward-distorted result still misses the
    observed coordinate by more than 1e-8.
    """
    d = k.distortion
    if d.is_zero:
        return px
    xd, yd = k.normalized_from_pixel(px.u, px.v)
    x, y = xd, yd
    for _ in range(UNDISTORT_MAX_ITERATIONS):
        r2 = x * x + y * y
        radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3))
        if radial <= 1e-8:
            raise NonConvergence(
                f"radial factor collapsed at r2={r2:.6g} while undistorting"
            )
        tx = 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x)
        ty = d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y
        x_next = (xd - tx) / radial
        y_next = (yd - ty) / radial
        step = max(abs(x_next - x), abs(y_next - y))
        x, y = x_next, y_next
        if step < UNDISTORT_STEP_TOL:
            break
    fx, fy = distort_normalized(x, y, d)
    if max(abs(fx - xd), abs(fy - yd)) > UNDISTORT_RESIDUAL_TOL:
        raise NonConvergence(
            f"undistortion of ({px.u:.3f}, {px.v:.3f}) did not reach 1e-8 "
            f"in {UNDISTORT_MAX_ITERATIONS} iterations"
        )
    return PixelPoint(*k.pixel_from_normalized(x, y))


def pixel_ray(
    px: PixelPoint, k: CameraIntrinsics, pose: CameraPose
) -> tuple[Vec, Vec]:
    """World-frame viewing ray of an ideal (already undistorted) pixel.

    Returns (origin, direction): the camera center and the unnormalized
    direction R.T @ Kinv @ (u, v, 1).
    """
    x, y = k.normalized_from_pixel(px.u, px.v)
    direction = pose.rotation.T @ np.array([x, y, 1.0])
    origin = -pose.rotation.T @ pose.translation
    return origin, direction


def back_project_to_plane(
    px: PixelPoint,
    k: CameraIntrinsics,
    pose: CameraPose,
    plane_z: float = 0.0,
) -> WorldPoint:
    """Intersect the pixel's viewing ray with the horizontal plane z = plane_z.

    The pixel must already be undistorted. The returned point carries
    z = plane_z exactly. Raises RayParallelToPlane when the ray's vertical
    component vanishes and PointNotOnGround when the intersection lies at or
    behind the camera (pixel on or above the horizon).
    """
    origin, direction = pixel_ray(px, k, pose)
    if abs(direction[2]) < RAY_NORMAL_EPS:
        raise RayParallelToPlane(
            f"pixel ({px.u:.3f}, {px.v:.3f}) views along the plane z={plane_z}"
        )
    s = (plane_z - origin[2]) / direction[2]
    if s <= 0.0:
        raise PointNotOnGround(
            f"pixel ({px.u:.3f}, {px.v:.3f}) meets plane z={plane_z} at "
            f"non-positive ray parameter {s:.6g}"
        )
    hit = origin + s * direction
    return WorldPoint(hit[0], hit[1], plane_z)


def pose_from_euler(e: EulerAngles, center: WorldPoint) -> CameraPose:
    """Build the world-to-camera pose from Euler angles and the camera center."""
    r = (
        _rot_z(math.radians(e.kappa))
        @ _rot_y(math.radians(e.phi))
        @ _rot_x(math.radians(e.omega))
    )
    t = -r @ center.array
    return CameraPose(r, t)


def euler_from_pose(pose: CameraPose) -> tuple[EulerAngles, WorldPoint]:
    """Recover (omega, phi, kappa) degrees and the camera center from a pose.

    Raises GimbalLock when |cos phi| < 1e-9; omega and kappa are then not
    separable.
    """
    r = pose.rotation
    sin_phi = -r[2, 0]
    cos_phi = math.sqrt(max(0.0, 1.0 - sin_phi * sin_phi))
    if cos_phi < 1e-9:
        raise GimbalLock("phi is within 1e-9 of +-90 degrees")
    phi = math.asin(max(-1.0, min(1.0, sin_phi)))
    omega = math.atan2(r[2, 1], r[2, 2])
    kappa = math.atan2(r[1, 0], r[0, 0])

    def to_range(deg: float) -> float:
        return 180.0 if deg <= -180.0 else deg

    angles = EulerAngles(
        to_range(math.degrees(omega)),
        to_range(math.degrees(phi)),
        to_range(math.degrees(kappa)),
    )
    return angles, camera_center(pose)


def camera_center(pose: CameraPose) -> WorldPoint:
    """Camera center in world coordinates, -R.T @ t."""
    c = -pose.rotation.T @ pose.translation
    return WorldPoint(c[0], c[1], c[2])
