"""Minimal three-point pose solver and MoCap pose recovery.

Solves the classical perspective-three-point problem: given three known
3D points and the unit bearing vectors under which one camera sees them,
find the camera-from-points rigid transform. The solver reduces the three
law-of-cosines constraints to a quartic in the ratio of two point ranges,
polishes the candidate ranges with Newton steps, and lifts each range
triple to a pose by aligning point sets (Kabsch). Combined with
:func:`recover_mocap_pose` this turns a camera-frame answer into the
MoCap-to-world transform the rest of the package estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError
from .geometry import CameraModel, RigidTransform, undistort_normalized

# Minimal triangle area (m^2) below which a sample is treated as collinear.
MIN_TRIANGLE_AREA = 1e-9

# Reprojection bound, in normalized image coordinates, for accepting a
# candidate pose produced from one root of the quartic.
NORMALIZED_REPROJ_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class MinimalProblem:
    """Three world points and the unit bearings observing them.

    ``world_points`` is (3, 3) with one point per row; ``bearings`` is
    (3, 3) with unit-norm rows in the camera frame. Construction rejects
    non-unit bearings and coincident world points outright; collinearity
    is checked by :func:`solve_p3p` so callers can distinguish the two.
    """

    world_points: np.ndarray
    bearings: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.world_points, dtype=np.float64)
        brs = np.asarray(self.bearings, dtype=np.float64)
        if pts.shape != (3, 3) or brs.shape != (3, 3):
            raise ValueError("world_points and bearings must both be (3, 3)")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(brs))):
            raise ValueError("world_points and bearings must be finite")
        norms = np.linalg.norm(brs, axis=1)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValueError("bearings must be unit vectors")
        for i in range(3):
            for j in range(i + 1, 3):
                if np.linalg.norm(pts[i] - pts[j]) < 1e-12:
                    raise DegenerateConfigurationError(
                        f"world points {i} and {j} coincide"
                    )
        pts = pts.copy()
        brs = brs.copy()
        pts.setflags(write=False)
        brs.setflags(write=False)
        object.__setattr__(self, "world_points", pts)
        object.__setattr__(self, "bearings", brs)

    @classmethod
    def from_observations(
        cls, camera: CameraModel, world_points: np.ndarray, pixels: np.ndarray
    ) -> "MinimalProblem":
        """Build a problem from pixel observations of three points.

        Pixels are mapped back through the intrinsics (honoring skew) and
        the distortion model to normalized coordinates, then lifted to
        unit bearings.
        """
        pts = np.asarray(world_points, dtype=np.float64).reshape(3, 3)
        pix = np.asarray(pixels, dtype=np.float64).reshape(3, 2)
        yn = (pix[:, 1] - camera.cy) / camera.fy
        xn = (pix[:, 0] - camera.cx - camera.skew * yn) / camera.fx
        norm = np.stack([xn, yn], axis=-1)
        if camera.distortion is not None:
            norm = undistort_normalized(camera.distortion, norm)
        rays = np.concatenate([norm, np.ones((3, 1))], axis=1)
        rays /= np.linalg.norm(rays, axis=1, keepdims=True)
        return cls(world_points=pts, bearings=rays)


@dataclass(frozen=True, eq=False)
class P3PSolutionSet:
    """Up to four camera-from-points transforms consistent with a sample."""

    solutions: tuple[RigidTransform, ...]

    def __post_init__(self):
        if len(self.solutions) > 4:
            raise ValueError("a minimal sample admits at most four poses")

    def __len__(self) -> int:
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def __getitem__(self, idx: int) -> RigidTransform:
        return self.solutions[idx]


def _grunert_quartic(a2, b2, c2, ca, cb, cg):
    """Quartic coefficients in v = s3/s1 after eliminating the other ranges."""
    A = a2 / b2
    B = c2 / b2
    ca2 = ca * ca
    cb2 = cb * cb
    cg2 = cg * cg
    c4 = (A - B - 1.0) ** 2 - 4.0 * B * ca2
    c3 = -4.0 * (
        A * A * cb
        - 2.0 * A * B * cb
        - A * ca * cg
        - A * cb
        + B * B * cb
        - 2.0 * B * ca2 * cb
        - B * ca * cg
        + B * cb
        + ca * cg
    )
    c2_ = 2.0 * (
        2.0 * A * A * cb2
        + A * A
        - 4.0 * A * B * cb2
        - 2.0 * A * B
        - 4.0 * A * ca * cb * cg
        - 2.0 * A * cg2
        + 2.0 * B * B * cb2
        + B * B
        - 2.0 * B * ca2
        - 4.0 * B * ca * cb * cg
        + 2.0 * ca2
        + 2.0 * cg2
        - 1.0
    )
    c1 = -4.0 * (
        A * A * cb
        - 2.0 * A * B * cb
        - A * ca * cg
        - 2.0 * A * cb * cg2
        + A * cb
        + B * B * cb
        - B * ca * cg
        - B * cb
        + ca * cg
    )
    c0 = (A - B + 1.0) ** 2 - 4.0 * A * cg2
    return np.array([c4, c3, c2_, c1, c0]), A, B


def _real_roots(coeffs: np.ndarray) -> np.ndarray:
    """Real roots of the quartic, polished by two Newton steps each."""
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) < 1e-8].real
    if real.size == 0:
        return real
    deriv = np.polyder(coeffs)
    for _ in range(2):
        val = np.polyval(coeffs, real)
        dval = np.polyval(deriv, real)
        safe = np.abs(dval) > 1e-300
        real = np.where(safe, real - val / np.where(safe, dval, 1.0), real)
    return real


def _polish_ranges(s1, s2, s3, a2, b2, c2, ca, cb, cg):
    """Newton steps on the three law-of-cosines residuals in (s1, s2, s3).

    The Jacobian has a zero diagonal, so the 3x3 solve unrolls to short
    Cramer expressions; a near-singular Jacobian stops the polish early.
    """
    for _ in range(2):
        f0 = s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * ca - a2
        f1 = s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * cb - b2
        f2 = s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cg - c2
        j01 = 2.0 * (s2 - s3 * ca)
        j02 = 2.0 * (s3 - s2 * ca)
        j10 = 2.0 * (s1 - s3 * cb)
        j12 = 2.0 * (s3 - s1 * cb)
        j20 = 2.0 * (s1 - s2 * cg)
        j21 = 2.0 * (s2 - s1 * cg)
        det = j01 * j12 * j20 + j02 * j10 * j21
        if abs(det) < 1e-300:
            break
        d0 = -f0 * j12 * j21 + j01 * j12 * f2 + j02 * f1 * j21
        d1 = f0 * j12 * j20 + j02 * j10 * f2 - j02 * f1 * j20
        d2 = -j01 * j10 * f2 + j01 * f1 * j20 + f0 * j10 * j21
        s1 -= d0 / det
        s2 -= d1 / det
        s3 -= d2 / det
    return s1, s2, s3


def _align_point_sets(world: np.ndarray, cam: np.ndarray):
    """Kabsch: least-squares rigid transform taking world points to cam points.

    Returns raw ``(rotation, translation)`` arrays; validated transforms
    are only built for candidates that survive verification.
    """
    wc = world.mean(axis=0)
    cc = cam.mean(axis=0)
    h = (world - wc).T @ (cam - cc)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    if not np.all(np.isfinite(rot)):
        return None
    return rot, cc - rot @ wc


def solve_p3p(problem: MinimalProblem) -> P3PSolutionSet:
    """Enumerate camera-from-points poses for a minimal sample.

    Returns between zero and four transforms, each verified to reproject
    all three points onto their bearings within 1e-8 in normalized image
    coordinates with strictly positive depths. Raises
    :class:`DegenerateConfigurationError` for collinear samples, which
    admit a one-parameter family of poses rather than a finite set.
    """
    pts = problem.world_points
    f1, f2, f3 = problem.bearings

    e1 = pts[1] - pts[0]
    e2 = pts[2] - pts[0]
    cross = (
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    )
    area = 0.5 * math.sqrt(cross[0] ** 2 + cross[1] ** 2 + cross[2] ** 2)
    if area < MIN_TRIANGLE_AREA:
        raise DegenerateConfigurationError(
            f"sample triangle area {area:.3e} m^2 is below {MIN_TRIANGLE_AREA:.0e}"
        )

    a2 = float(np.dot(pts[1] - pts[2], pts[1] - pts[2]))
    b2 = float(np.dot(pts[0] - pts[2], pts[0] - pts[2]))
    c2 = float(np.dot(pts[0] - pts[1], pts[0] - pts[1]))
    ca = float(np.dot(f2, f3))
    cb = float(np.dot(f1, f3))
    cg = float(np.dot(f1, f2))

    coeffs, A, B = _grunert_quartic(a2, b2, c2, ca, cb, cg)
    candidates: list[tuple[np.ndarray, np.ndarray]] = []
    residuals: list[float] = []
    observed = problem.bearings / problem.bearings[:, 2:3]

    for v in _real_roots(coeffs):
        denom_sq = 1.0 + v * v - 2.0 * v * cb
        if denom_sq <= 0.0:
            continue
        s1 = math.sqrt(b2 / denom_sq)
        # Back-substitute for u = s2/s1; fall back to the quadratic
        # constraint when the linear denominator vanishes.
        den = 2.0 * (cg - v * ca)
        term1 = v * v * (1.0 - A) + 2.0 * v * A * cb - A
        term2 = -B * v * v + 2.0 * B * v * cb + 1.0 - B
        u_values: list[float]
        if abs(den) > 1e-12:
            u_values = [(term2 - term1) / den]
        else:
            disc = cg * cg - (1.0 - B * denom_sq)
            if disc < 0.0:
                continue
            root = math.sqrt(disc)
            u_values = [cg + root, cg - root]
        for u in u_values:
            ranges = _polish_ranges(s1, u * s1, v * s1, a2, b2, c2, ca, cb, cg)
            if any(not math.isfinite(r) or r <= 0.0 for r in ranges):
                continue
            cam_pts = np.array(ranges)[:, None] * problem.bearings
            aligned = _align_point_sets(pts, cam_pts)
            if aligned is None:
                continue
            rot, trans = aligned
            proj = pts @ rot.T + trans
            depths = proj[:, 2]
            if np.any(depths <= 0.0):
                continue
            reproj = proj / depths[:, None]
            err = np.abs(reproj[:, :2] - observed[:, :2]).max()
            if not np.isfinite(err) or err > NORMALIZED_REPROJ_TOL:
                continue
            candidates.append((rot, trans))
            residuals.append(float(err))

    # Deduplicate near-identical poses arising from clustered roots.
    order = np.argsort(residuals) if residuals else []
    unique: list[tuple[np.ndarray, np.ndarray]] = []
    for idx in order:
        rot, trans = candidates[idx]
        dup = any(
            np.linalg.norm(rot - kept_rot) < 1e-6
            and np.linalg.norm(trans - kept_trans) < 1e-6
            for kept_rot, kept_trans in unique
        )
        if not dup:
            unique.append((rot, trans))
        if len(unique) == 4:
            break
    return P3PSolutionSet(
        solutions=tuple(
            RigidTransform(rotation=rot, translation=trans) for rot, trans in unique
        )
    )


def recover_mocap_pose(cam_from_points: RigidTransform, camera: CameraModel) -> RigidTransform:
    """Convert a camera-frame P3P answer into the MoCap-to-world transform.

    If the camera maps world points via (R_c, t_c) and the solver found
    the camera-from-points pose (R, t), the points' frame sits in the
    world at R_m = R_c^T R and t_m = R_c^T (t - t_c).
    """
    rot = camera.rotation.T @ cam_from_points.rotation
    trans = camera.rotation.T @ (cam_from_points.translation - camera.translation)
    return RigidTransform(rotation=rot, translation=trans)
