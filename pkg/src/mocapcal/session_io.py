"""Reading and writing capture sessions and calibration reports.

A session file is a single JSON document holding the calibrated cameras,
the MoCap 3D keypoint block (frames x joints x 3), and one 2D detection
block per camera (cameras x frames x joints x (u, v, validity)). Reports
are flat JSON documents with a stable key order and full-precision
floats, so reruns with identical inputs produce byte-identical files
apart from timing.

Loaders are strict: shape disagreements, unsupported versions, and
non-finite numbers each raise a dedicated error naming the offending
field. Camera rotations with tiny orthonormality drift (at most 1e-6)
are projected back onto the rotation group and reported as warnings
instead of failing the load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonFiniteValueError,
    ParseError,
    UnsupportedVersionError,
)
from .geometry import (
    CameraModel,
    DistortionCoeffs,
    EulerPose,
    RigidTransform,
    nearest_rotation,
)
from .pipeline import CalibrationReport, CorrespondenceCounts, Timing
from .ransac import CorrespondenceSet

FORMAT_VERSION = 1

# Rotation drift policy: accept up to ORTHO_STRICT silently, repair and
# warn up to ORTHO_REPAIR, reject beyond that.
ORTHO_STRICT = 1e-9
ORTHO_REPAIR = 1e-6


@dataclass(frozen=True, eq=False)
class SessionData:
    """A loaded session: correspondences, optional ground truth, warnings."""

    correspondences: CorrespondenceSet
    gt_extrinsic: Optional[RigidTransform]
    warnings: tuple[str, ...]


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise ParseError(f"{context} is missing required field '{key}'")
    return obj[key]


def _as_float_array(value, shape: tuple[int, ...], name: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"cannot parse {name} as a numeric array: {exc}") from exc
    if arr.shape != shape:
        raise DimensionMismatchError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        idx = tuple(int(v) for v in np.argwhere(~np.isfinite(arr))[0])
        raise NonFiniteValueError(f"{name}{list(idx)} is not finite")
    return arr


def _block_array(value, name: str, ndim: int) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"cannot parse {name} as a numeric array: {exc}") from exc
    if arr.ndim != ndim:
        raise DimensionMismatchError(
            f"{name} must be a {ndim}-dimensional array, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        idx = np.argwhere(~np.isfinite(arr))[0]
        loc = "".join(f"[{int(v)}]" for v in idx)
        raise NonFiniteValueError(f"{name}{loc} is not finite")
    return arr


def _checked_rotation(raw: np.ndarray, name: str, warnings: list[str]) -> np.ndarray:
    drift = float(np.abs(raw @ raw.T - np.eye(3)).max())
    det = float(np.linalg.det(raw))
    if det < 0.0:
        raise ParseError(f"{name} is a reflection (determinant {det:.6f})")
    if drift <= ORTHO_STRICT:
        return raw
    if drift <= ORTHO_REPAIR:
        warnings.append(
            f"{name}: orthonormality drift {drift:.3e} repaired by projection"
        )
        return nearest_rotation(raw)
    raise ParseError(f"{name} is not a rotation (orthonormality drift {drift:.3e})")


def _parse_camera(raw, index: int, scale: float, warnings: list[str]) -> CameraModel:
    name = f"cameras[{index}]"
    if not isinstance(raw, dict):
        raise ParseError(f"{name} must be an object")
    intr = _as_float_array(_require(raw, "intrinsics", name), (9,), f"{name}.intrinsics")
    rot = _as_float_array(_require(raw, "rotation", name), (9,), f"{name}.rotation")
    trans = _as_float_array(_require(raw, "translation", name), (3,), f"{name}.translation")
    rotation = _checked_rotation(rot.reshape(3, 3), f"{name}.rotation", warnings)
    distortion = None
    if raw.get("distortion") is not None:
        coeffs = _as_float_array(raw["distortion"], (5,), f"{name}.distortion")
        distortion = DistortionCoeffs(*coeffs)
    image_size = None
    if raw.get("image_size") is not None:
        size = _as_float_array(raw["image_size"], (2,), f"{name}.image_size")
        image_size = (int(size[0]), int(size[1]))
    try:
        return CameraModel(
            intrinsics=intr.reshape(3, 3),
            rotation=rotation,
            translation=trans * scale,
            distortion=distortion,
            image_size=image_size,
        )
    except ValueError as exc:
        raise ParseError(f"{name}: {exc}") from exc


def load_session(path: str) -> SessionData:
    """Load a session file into a correspondence set.

    One correspondence is created per (camera, frame, joint) whose
    validity flag is 1; rows flagged 0 carry no information beyond their
    absence. Lengths in millimeters are converted to meters.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    if not isinstance(doc, dict):
        raise ParseError("session document must be a JSON object")
    version = _require(doc, "format_version", "session")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"session format_version {version!r} is not supported (expected {FORMAT_VERSION})"
        )

    units = doc.get("units", {})
    if not isinstance(units, dict):
        raise ParseError("units must be an object")
    length_unit = units.get("length", "m")
    pixel_unit = units.get("pixels", "px")
    if length_unit not in ("m", "mm"):
        raise ParseError(f"unsupported length unit {length_unit!r} (expected 'm' or 'mm')")
    if pixel_unit != "px":
        raise ParseError(f"unsupported pixel unit {pixel_unit!r} (expected 'px')")
    scale = 1e-3 if length_unit == "mm" else 1.0

    raw_cameras = _require(doc, "cameras", "session")
    if not isinstance(raw_cameras, list) or len(raw_cameras) == 0:
        raise ParseError("cameras must be a non-empty array")
    warnings: list[str] = []
    cameras = [
        _parse_camera(raw, i, scale, warnings) for i, raw in enumerate(raw_cameras)
    ]

    kp3d = _block_array(_require(doc, "keypoints3d", "session"), "keypoints3d", 3) * scale
    if kp3d.shape[2] != 3:
        raise DimensionMismatchError(
            f"keypoints3d must be frames x joints x 3, got {kp3d.shape}"
        )
    n_frames, n_joints = kp3d.shape[0], kp3d.shape[1]
    kp2d = _block_array(_require(doc, "keypoints2d", "session"), "keypoints2d", 4)
    expected = (len(cameras), n_frames, n_joints, 3)
    if kp2d.shape != expected:
        raise DimensionMismatchError(
            f"keypoints2d must have shape {expected} "
            f"(cameras x frames x joints x (u, v, validity)), got {kp2d.shape}"
        )
    validity = kp2d[..., 2]
    if not np.all((validity == 0.0) | (validity == 1.0)):
        idx = np.argwhere((validity != 0.0) & (validity != 1.0))[0]
        loc = "".join(f"[{int(v)}]" for v in idx)
        raise ParseError(f"keypoints2d{loc}[2] must be 0 or 1, got {validity[tuple(idx)]}")

    gt = None
    if doc.get("gt_extrinsic") is not None:
        raw_gt = _as_float_array(doc["gt_extrinsic"], (12,), "gt_extrinsic")
        rot = _checked_rotation(raw_gt[:9].reshape(3, 3), "gt_extrinsic rotation", warnings)
        gt = RigidTransform(rotation=rot, translation=raw_gt[9:] * scale)

    cam_idx, frame_idx, joint_idx = np.nonzero(validity == 1.0)
    cset = CorrespondenceSet(
        cameras=cameras,
        cam_indices=cam_idx.astype(np.int64),
        joint_indices=joint_idx.astype(np.int64),
        frame_indices=frame_idx.astype(np.int64),
        points3d=kp3d[frame_idx, joint_idx],
        points2d=kp2d[cam_idx, frame_idx, joint_idx, :2],
        valid=np.ones(cam_idx.size, dtype=bool),
        dims=(len(cameras), n_joints, n_frames),
    )
    return SessionData(
        correspondences=cset, gt_extrinsic=gt, warnings=tuple(warnings)
    )


def save_session(
    path: str, cset: CorrespondenceSet, gt_extrinsic: Optional[RigidTransform] = None
) -> None:
    """Write a correspondence set as a session file (always in meters).

    The dense keypoint blocks are reassembled from the stored entries;
    (frame, joint) slots no entry mentions are zero-filled with validity
    0, and non-finite payloads of invalid entries are zeroed so the file
    stays loadable.
    """
    n_cams, n_joints, n_frames = cset.dims
    kp3d = np.zeros((n_frames, n_joints, 3))
    kp2d = np.zeros((n_cams, n_frames, n_joints, 3))
    pts3 = np.nan_to_num(cset.points3d, nan=0.0, posinf=0.0, neginf=0.0)
    pts2 = np.nan_to_num(cset.points2d, nan=0.0, posinf=0.0, neginf=0.0)
    kp3d[cset.frame_indices, cset.joint_indices] = pts3
    kp2d[cset.cam_indices, cset.frame_indices, cset.joint_indices, :2] = pts2
    kp2d[cset.cam_indices, cset.frame_indices, cset.joint_indices, 2] = cset.valid.astype(
        np.float64
    )
    doc = {
        "format_version": FORMAT_VERSION,
        "units": {"length": "m", "pixels": "px"},
        "cameras": [
            {
                "intrinsics": cam.intrinsics.ravel().tolist(),
                "rotation": cam.rotation.ravel().tolist(),
                "translation": cam.translation.tolist(),
                "distortion": list(cam.distortion.as_tuple()) if cam.distortion else None,
                "image_size": list(cam.image_size) if cam.image_size else None,
            }
            for cam in cset.cameras
        ],
        "keypoints3d": kp3d.tolist(),
        "keypoints2d": kp2d.tolist(),
        "gt_extrinsic": (
            gt_extrinsic.rotation.ravel().tolist() + gt_extrinsic.translation.tolist()
            if gt_extrinsic is not None
            else None
        ),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def report_to_dict(report: CalibrationReport) -> dict:
    """Flatten a report into a JSON-ready dict with stable key order."""
    return {
        "format_version": FORMAT_VERSION,
        "rotation": report.transform.rotation.ravel().tolist(),
        "translation": report.transform.translation.tolist(),
        "euler_zyx": {
            "alpha": report.euler.alpha,
            "beta": report.euler.beta,
            "gamma": report.euler.gamma,
        },
        "mpjpe_init_px": report.mpjpe_init,
        "mpjpe_refined_px": report.mpjpe_refined,
        "mpjpe_gt_px": report.mpjpe_gt,
        "gt_rotation_err_deg": report.gt_rotation_err_deg,
        "gt_translation_err_m": report.gt_translation_err_m,
        "inlier_ratio": report.inlier_ratio,
        "inlier_count": report.inlier_count,
        "refinement_rejected": report.refinement_rejected,
        "correspondence_counts": {
            "total": report.correspondence_counts.total,
            "valid": report.correspondence_counts.valid,
            "positive_depth": report.correspondence_counts.positive_depth,
        },
        "timing": {
            "ransac_ms": report.timing.ransac_ms,
            "refine_ms": report.timing.refine_ms,
            "total_ms": report.timing.total_ms,
            "ms_per_frame": report.timing.ms_per_frame,
        },
        "config": report.config_echo,
        "seed": report.seed,
        "warnings": list(report.warnings),
    }


def report_from_dict(doc: dict) -> CalibrationReport:
    """Rebuild a report object from its JSON form."""
    if not isinstance(doc, dict):
        raise ParseError("report document must be a JSON object")
    version = _require(doc, "format_version", "report")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"report format_version {version!r} is not supported (expected {FORMAT_VERSION})"
        )
    rot = _as_float_array(_require(doc, "rotation", "report"), (9,), "rotation").reshape(3, 3)
    drift_warnings: list[str] = []
    rot = _checked_rotation(rot, "report rotation", drift_warnings)
    trans = _as_float_array(_require(doc, "translation", "report"), (3,), "translation")
    euler = _require(doc, "euler_zyx", "report")
    if not isinstance(euler, dict):
        raise ParseError("euler_zyx must be an object")
    counts = _require(doc, "correspondence_counts", "report")
    timing = _require(doc, "timing", "report")
    for name in (
        "mpjpe_init_px",
        "mpjpe_refined_px",
        "inlier_ratio",
        "inlier_count",
        "refinement_rejected",
        "config",
        "seed",
    ):
        _require(doc, name, "report")
    try:
        return CalibrationReport(
            transform=RigidTransform(rotation=rot, translation=trans),
            euler=EulerPose(
                float(_require(euler, "alpha", "euler_zyx")),
                float(_require(euler, "beta", "euler_zyx")),
                float(_require(euler, "gamma", "euler_zyx")),
                trans,
            ),
            mpjpe_init=float(doc["mpjpe_init_px"]),
            mpjpe_refined=float(doc["mpjpe_refined_px"]),
            mpjpe_gt=None if doc.get("mpjpe_gt_px") is None else float(doc["mpjpe_gt_px"]),
            gt_rotation_err_deg=(
                None
                if doc.get("gt_rotation_err_deg") is None
                else float(doc["gt_rotation_err_deg"])
            ),
            gt_translation_err_m=(
                None
                if doc.get("gt_translation_err_m") is None
                else float(doc["gt_translation_err_m"])
            ),
            inlier_ratio=float(doc["inlier_ratio"]),
            inlier_count=int(doc["inlier_count"]),
            refinement_rejected=bool(doc["refinement_rejected"]),
            correspondence_counts=CorrespondenceCounts(
                total=int(_require(counts, "total", "correspondence_counts")),
                valid=int(_require(counts, "valid", "correspondence_counts")),
                positive_depth=int(
                    _require(counts, "positive_depth", "correspondence_counts")
                ),
            ),
            timing=Timing(
                ransac_ms=float(_require(timing, "ransac_ms", "timing")),
                refine_ms=float(_require(timing, "refine_ms", "timing")),
                total_ms=float(_require(timing, "total_ms", "timing")),
                ms_per_frame=float(_require(timing, "ms_per_frame", "timing")),
            ),
            config_echo=doc["config"],
            seed=int(doc["seed"]),
            warnings=tuple(doc.get("warnings", ())),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"report field has the wrong type: {exc}") from exc


def save_report(report: CalibrationReport, path: str) -> None:
    """Write a report as indented JSON with full-precision floats."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


def load_report(path: str) -> CalibrationReport:
    """Read a report file back; floats round-trip exactly."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    return report_from_dict(doc)
