"""Camera models, rigid transforms, rotations, and the projection chain.

Conventions used throughout the package:

* World and MoCap coordinates are metric (meters); image coordinates are
  pixels; angles are radians unless a name says otherwise.
* Rotation matrices act on column vectors. A camera maps world points to
  its own frame as ``X_cam = R_c @ X_world + t_c`` (x right, y down,
  z along the optical axis).
* Euler angles follow the intrinsic Z(gamma) Y(beta) X(alpha) order:
  ``R = Rz(gamma) @ Ry(beta) @ Rx(alpha)``.
* Lens distortion is the Brown-Conrady model ``(k1, k2, p1, p2, k3)``
  applied to normalized image coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonFiniteProjectionError

# Orthonormality tolerance for rotations accepted by constructors.
ROTATION_TOL = 1e-9

# A projection ray closer than this to the principal plane has no pixel.
MIN_ABS_DEPTH = 1e-12


def _as_array(value, shape: tuple[int, ...], name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    out = arr.copy()
    out.setflags(write=False)
    return out


def _check_rotation(matrix: np.ndarray, name: str, tol: float = ROTATION_TOL) -> None:
    err = np.abs(matrix @ matrix.T - np.eye(3)).max()
    if err > tol:
        raise ValueError(f"{name} is not orthonormal (max deviation {err:.3e})")
    det = float(np.linalg.det(matrix))
    if abs(det - 1.0) > 1e-6:
        raise ValueError(f"{name} must have determinant +1, got {det:.6f}")


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation plus translation, mapping points as ``R @ p + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _as_array(self.rotation, (3, 3), "rotation"))
        object.__setattr__(self, "translation", _as_array(self.translation, (3,), "translation"))
        _check_rotation(self.rotation, "rotation")

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point ``(3,)`` or a batch ``(..., 3)``."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return the transform applying ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)


@dataclass(frozen=True)
class DistortionCoeffs:
    """Brown-Conrady coefficients: radial k1, k2, k3 and tangential p1, p2."""

    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    k3: float = 0.0

    def __post_init__(self):
        for name in ("k1", "k2", "p1", "p2", "k3"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"distortion coefficient {name} must be finite")
            object.__setattr__(self, name, value)

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.k1, self.k2, self.p1, self.p2, self.k3)


@dataclass(frozen=True, eq=False)
class CameraModel:
    """A calibrated pinhole camera with optional lens distortion.

    ``intrinsics`` is an upper-triangular 3x3 matrix (fx, fy > 0, optional
    skew); ``rotation``/``translation`` map world points into the camera
    frame. ``image_size`` is (width, height) in pixels when known.
    """

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    distortion: Optional[DistortionCoeffs] = None
    image_size: Optional[tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "intrinsics", _as_array(self.intrinsics, (3, 3), "intrinsics"))
        object.__setattr__(self, "rotation", _as_array(self.rotation, (3, 3), "rotation"))
        object.__setattr__(self, "translation", _as_array(self.translation, (3,), "translation"))
        _check_rotation(self.rotation, "camera rotation")
        k = self.intrinsics
        if k[1, 0] != 0.0 or k[2, 0] != 0.0 or k[2, 1] != 0.0 or k[2, 2] != 1.0:
            raise ValueError("intrinsics must be upper triangular with K[2,2] == 1")
        if k[0, 0] <= 0.0 or k[1, 1] <= 0.0:
            raise ValueError("focal lengths must be positive")
        if self.image_size is not None:
            w, h = self.image_size
            if int(w) <= 0 or int(h) <= 0:
                raise ValueError("image_size must be positive")
            object.__setattr__(self, "image_size", (int(w), int(h)))

    @property
    def fx(self) -> float:
        return float(self.intrinsics[0, 0])

    @property
    def fy(self) -> float:
        return float(self.intrinsics[1, 1])

    @property
    def cx(self) -> float:
        return float(self.intrinsics[0, 2])

    @property
    def cy(self) -> float:
        return float(self.intrinsics[1, 2])

    @property
    def skew(self) -> float:
        return float(self.intrinsics[0, 1])


@dataclass(frozen=True, eq=False)
class EulerPose:
    """A pose parameterized as ZYX Euler angles plus a translation."""

    alpha: float
    beta: float
    gamma: float
    translation: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"angle {name} must be finite")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "translation", _as_array(self.translation, (3,), "translation"))

    def as_vector(self) -> np.ndarray:
        """Pack as ``[alpha, beta, gamma, tx, ty, tz]``."""
        return np.concatenate(([self.alpha, self.beta, self.gamma], self.translation))

    @staticmethod
    def from_vector(vec: np.ndarray) -> "EulerPose":
        vec = np.asarray(vec, dtype=np.float64)
        return EulerPose(float(vec[0]), float(vec[1]), float(vec[2]), vec[3:6])

    def to_transform(self) -> RigidTransform:
        return RigidTransform(rotation_zyx(self.alpha, self.beta, self.gamma), self.translation)


@dataclass(frozen=True, eq=False)
class Projection:
    """A projected pixel together with its camera-frame depth."""

    pixel: np.ndarray
    depth: float


def rotation_zyx(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Build ``Rz(gamma) @ Ry(beta) @ Rx(alpha)`` directly."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    return np.array(
        [
            [cg * cb, cg * sb * sa - sg * ca, cg * sb * ca + sg * sa],
            [sg * cb, sg * sb * sa + cg * ca, sg * sb * ca - cg * sa],
            [-sb, cb * sa, cb * ca],
        ]
    )


def rotation_zyx_derivatives(
    alpha: float, beta: float, gamma: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``R`` and its partial derivatives w.r.t. each angle."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rz = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    drx = np.array([[0.0, 0.0, 0.0], [0.0, -sa, -ca], [0.0, ca, -sa]])
    dry = np.array([[-sb, 0.0, cb], [0.0, 0.0, 0.0], [-cb, 0.0, -sb]])
    drz = np.array([[-sg, -cg, 0.0], [cg, -sg, 0.0], [0.0, 0.0, 0.0]])
    rot = rz @ ry @ rx
    return rot, rz @ ry @ drx, rz @ dry @ rx, drz @ ry @ rx


def euler_to_rotation(pose: EulerPose) -> np.ndarray:
    """Rotation matrix of ``pose`` (translation is ignored)."""
    return rotation_zyx(pose.alpha, pose.beta, pose.gamma)


def rotation_to_euler(rotation: np.ndarray) -> tuple[float, float, float]:
    """Recover ZYX Euler angles ``(alpha, beta, gamma)`` from a rotation.

    Away from gimbal lock the angles are the unique triple with
    ``beta`` in the open interval (-pi/2, pi/2). At gimbal lock
    (``|cos beta|`` below 1e-9) only ``gamma - alpha`` (for beta = +pi/2)
    or ``gamma + alpha`` (for beta = -pi/2) is observable; the convention
    here pins ``alpha = 0`` and folds everything into ``gamma``.
    """
    rot = np.asarray(rotation, dtype=np.float64)
    _check_rotation(rot, "rotation", tol=1e-6)
    cos_beta = math.hypot(rot[2, 1], rot[2, 2])
    beta = math.asin(max(-1.0, min(1.0, -rot[2, 0])))
    if cos_beta < 1e-9:
        alpha = 0.0
        gamma = math.atan2(-rot[0, 1], rot[1, 1])
    else:
        alpha = math.atan2(rot[2, 1], rot[2, 2])
        gamma = math.atan2(rot[1, 0], rot[0, 0])
    return alpha, beta, gamma


def distort_normalized(coeffs: DistortionCoeffs, xy: np.ndarray) -> np.ndarray:
    """Apply Brown-Conrady distortion to normalized points ``(..., 2)``."""
    xy = np.asarray(xy, dtype=np.float64)
    x, y = xy[..., 0], xy[..., 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (coeffs.k1 + r2 * (coeffs.k2 + r2 * coeffs.k3))
    xd = x * radial + 2.0 * coeffs.p1 * x * y + coeffs.p2 * (r2 + 2.0 * x * x)
    yd = y * radial + coeffs.p1 * (r2 + 2.0 * y * y) + 2.0 * coeffs.p2 * x * y
    return np.stack([xd, yd], axis=-1)


def undistort_normalized(
    coeffs: DistortionCoeffs,
    xy: np.ndarray,
    iterations: int = 10,
    tol: float = 1e-10,
) -> np.ndarray:
    """Invert :func:`distort_normalized` by fixed-point iteration.

    Starts from the distorted point and iterates
    ``x <- xd - (distort(x) - x)`` up to ``iterations`` times, stopping
    early once the update falls below ``tol``.
    """
    distorted = np.asarray(xy, dtype=np.float64)
    current = distorted.copy()
    for _ in range(iterations):
        nxt = distorted - (distort_normalized(coeffs, current) - current)
        if np.abs(nxt - current).max() < tol:
            current = nxt
            break
        current = nxt
    return current


def distortion_jacobian(coeffs: DistortionCoeffs, xy: np.ndarray) -> np.ndarray:
    """Jacobian of the distortion map at ``xy``, shape ``(..., 2, 2)``."""
    xy = np.asarray(xy, dtype=np.float64)
    x, y = xy[..., 0], xy[..., 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (coeffs.k1 + r2 * (coeffs.k2 + r2 * coeffs.k3))
    dradial = coeffs.k1 + r2 * (2.0 * coeffs.k2 + 3.0 * coeffs.k3 * r2)
    jac = np.empty(xy.shape[:-1] + (2, 2))
    jac[..., 0, 0] = radial + 2.0 * x * x * dradial + 2.0 * coeffs.p1 * y + 6.0 * coeffs.p2 * x
    jac[..., 0, 1] = 2.0 * x * y * dradial + 2.0 * coeffs.p1 * x + 2.0 * coeffs.p2 * y
    jac[..., 1, 0] = jac[..., 0, 1]
    jac[..., 1, 1] = radial + 2.0 * y * y * dradial + 6.0 * coeffs.p1 * y + 2.0 * coeffs.p2 * x
    return jac


def project_points(
    camera: CameraModel, transform: RigidTransform, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Project MoCap-frame points through ``transform`` and ``camera``.

    Vectorized and exception-free: returns ``(pixels (..., 2), depths)``
    where pixels of points near the principal plane come out non-finite.
    Callers gate on depth.
    """
    pts = np.asarray(points, dtype=np.float64)
    world = pts @ transform.rotation.T + transform.translation
    cam_pts = world @ camera.rotation.T + camera.translation
    depths = cam_pts[..., 2]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        xn = cam_pts[..., 0] / depths
        yn = cam_pts[..., 1] / depths
        norm = np.stack([xn, yn], axis=-1)
        if camera.distortion is not None:
            norm = distort_normalized(camera.distortion, norm)
        u = camera.fx * norm[..., 0] + camera.skew * norm[..., 1] + camera.cx
        v = camera.fy * norm[..., 1] + camera.cy
    return np.stack([u, v], axis=-1), depths


def project(camera: CameraModel, transform: RigidTransform, point: np.ndarray) -> Projection:
    """Project a single MoCap-frame point, checking for a defined pixel.

    Raises :class:`NonFiniteProjectionError` when the point sits on the
    camera's principal plane (|depth| < 1e-12). Negative depths project
    fine; it is the caller's job to treat them as behind the camera.
    """
    pt = _as_array(point, (3,), "point")
    pixel, depth = project_points(camera, transform, pt)
    depth = float(depth)
    if abs(depth) < MIN_ABS_DEPTH:
        raise NonFiniteProjectionError(
            f"point {pt.tolist()} lies on the principal plane (depth {depth:.3e})"
        )
    return Projection(pixel=pixel, depth=depth)


def rotation_geodesic_deg(rot_a: np.ndarray, rot_b: np.ndarray) -> float:
    """Geodesic distance between two rotations, in degrees."""
    rot_a = np.asarray(rot_a, dtype=np.float64)
    rot_b = np.asarray(rot_b, dtype=np.float64)
    cos_angle = (np.trace(rot_a.T @ rot_b) - 1.0) / 2.0
    return math.degrees(math.acos(max(-1.0, min(1.0, cos_angle))))


def nearest_rotation(matrix: np.ndarray) -> np.ndarray:
    """Orthonormal projection of ``matrix`` (polar factor via SVD)."""
    u, _, vt = np.linalg.svd(np.asarray(matrix, dtype=np.float64))
    rot = u @ vt
    if np.linalg.det(rot) < 0.0:
        rot = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return rot
