"""Correspondence storage and robust pose hypothesis search.

A correspondence ties one MoCap-frame 3D joint position at one frame to
one pixel detection in one camera. The sampler draws minimal samples of
three joints seen by a single camera in a single frame, solves the
three-point pose problem, and scores each hypothesis by counting
reprojection inliers over a frame-strided subset of the data.

The search is embarrassingly parallel. Each iteration seeds its own RNG
substream from ``(seed, iteration)``, so results are bit-identical no
matter how many worker threads score hypotheses; the ``RPGD_THREADS``
environment variable (0 = one per CPU) sets the default worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateConfigurationError,
    InsufficientConsensusError,
    NoValidSampleError,
)
from .geometry import CameraModel, RigidTransform, project, project_points
from .p3p import MinimalProblem, recover_mocap_pose, solve_p3p

MAX_WORKERS = 64


def worker_count(requested: Optional[int] = None) -> int:
    """Resolve a worker count from an argument or ``RPGD_THREADS``.

    ``None`` falls back to the environment variable; 0 (from either
    source) means one thread per CPU. The result is clamped to
    [1, MAX_WORKERS].
    """
    if requested is None:
        raw = os.environ.get("RPGD_THREADS", "").strip()
        if raw:
            try:
                requested = int(raw)
            except ValueError as exc:
                raise ValueError(f"RPGD_THREADS must be an integer, got {raw!r}") from exc
        else:
            requested = 0
    if requested == 0:
        requested = os.cpu_count() or 1
    return max(1, min(int(requested), MAX_WORKERS))


@dataclass(frozen=True, eq=False)
class Correspondence:
    """One (camera, joint, frame) observation pairing 3D with 2D."""

    cam_index: int
    joint_index: int
    frame_index: int
    point3d: np.ndarray
    point2d: np.ndarray
    valid: bool

    def __post_init__(self):
        pt3 = np.asarray(self.point3d, dtype=np.float64).reshape(3)
        pt2 = np.asarray(self.point2d, dtype=np.float64).reshape(2)
        if self.valid and not (np.all(np.isfinite(pt3)) and np.all(np.isfinite(pt2))):
            raise ValueError("a valid correspondence must have finite coordinates")
        pt3.setflags(write=False)
        pt2.setflags(write=False)
        object.__setattr__(self, "point3d", pt3)
        object.__setattr__(self, "point2d", pt2)


class CameraBlock(NamedTuple):
    """All selected entries of one camera, flattened for vectorized math."""

    cam_index: int
    camera: CameraModel
    entry_ids: np.ndarray
    points3d: np.ndarray
    points2d: np.ndarray


class CorrespondenceSet:
    """Columnar store of correspondences for N cameras, J joints, T frames.

    Entries live in parallel arrays, which keeps scoring and refinement
    vectorizable for hundreds of thousands of rows. Row views are
    materialized lazily as :class:`Correspondence` objects.
    """

    def __init__(
        self,
        cameras: Sequence[CameraModel],
        cam_indices: np.ndarray,
        joint_indices: np.ndarray,
        frame_indices: np.ndarray,
        points3d: np.ndarray,
        points2d: np.ndarray,
        valid: np.ndarray,
        dims: tuple[int, int, int],
    ):
        if len(cameras) == 0:
            raise ValueError("a correspondence set needs at least one camera")
        n_cams, n_joints, n_frames = (int(d) for d in dims)
        if n_cams != len(cameras):
            raise ValueError("dims[0] must equal the number of cameras")
        self.cameras: tuple[CameraModel, ...] = tuple(cameras)
        self.dims = (n_cams, n_joints, n_frames)
        self.cam_indices = np.ascontiguousarray(cam_indices, dtype=np.int64)
        self.joint_indices = np.ascontiguousarray(joint_indices, dtype=np.int64)
        self.frame_indices = np.ascontiguousarray(frame_indices, dtype=np.int64)
        self.points3d = np.ascontiguousarray(points3d, dtype=np.float64)
        self.points2d = np.ascontiguousarray(points2d, dtype=np.float64)
        self.valid = np.ascontiguousarray(valid, dtype=bool)
        m = self.cam_indices.shape[0]
        shapes_ok = (
            self.joint_indices.shape == (m,)
            and self.frame_indices.shape == (m,)
            and self.points3d.shape == (m, 3)
            and self.points2d.shape == (m, 2)
            and self.valid.shape == (m,)
        )
        if not shapes_ok:
            raise ValueError("correspondence arrays disagree in length")
        for name, arr, bound in (
            ("cam_indices", self.cam_indices, n_cams),
            ("joint_indices", self.joint_indices, n_joints),
            ("frame_indices", self.frame_indices, n_frames),
        ):
            if m and (arr.min() < 0 or arr.max() >= bound):
                raise ValueError(f"{name} out of range for dims {self.dims}")
        if m:
            bad3 = ~np.all(np.isfinite(self.points3d), axis=1)
            bad2 = ~np.all(np.isfinite(self.points2d), axis=1)
            if np.any(self.valid & (bad3 | bad2)):
                raise ValueError("valid correspondences must have finite coordinates")
        for arr in (
            self.cam_indices,
            self.joint_indices,
            self.frame_indices,
            self.points3d,
            self.points2d,
            self.valid,
        ):
            arr.setflags(write=False)

    @classmethod
    def from_entries(
        cls,
        cameras: Sequence[CameraModel],
        entries: Sequence[Correspondence],
        dims: tuple[int, int, int],
    ) -> "CorrespondenceSet":
        m = len(entries)
        cam_idx = np.fromiter((e.cam_index for e in entries), dtype=np.int64, count=m)
        joint_idx = np.fromiter((e.joint_index for e in entries), dtype=np.int64, count=m)
        frame_idx = np.fromiter((e.frame_index for e in entries), dtype=np.int64, count=m)
        pts3 = np.array([e.point3d for e in entries], dtype=np.float64).reshape(m, 3)
        pts2 = np.array([e.point2d for e in entries], dtype=np.float64).reshape(m, 2)
        valid = np.fromiter((e.valid for e in entries), dtype=bool, count=m)
        return cls(cameras, cam_idx, joint_idx, frame_idx, pts3, pts2, valid, dims)

    @property
    def n_entries(self) -> int:
        return int(self.cam_indices.shape[0])

    def __len__(self) -> int:
        return self.n_entries

    def entry(self, idx: int) -> Correspondence:
        return Correspondence(
            cam_index=int(self.cam_indices[idx]),
            joint_index=int(self.joint_indices[idx]),
            frame_index=int(self.frame_indices[idx]),
            point3d=self.points3d[idx],
            point2d=self.points2d[idx],
            valid=bool(self.valid[idx]),
        )

    def __iter__(self) -> Iterator[Correspondence]:
        return (self.entry(i) for i in range(self.n_entries))

    def selection_mask(
        self, stride: int = 1, restrict_to: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Boolean mask of valid entries at the given frame stride."""
        if stride < 1:
            raise ValueError("stride must be >= 1")
        mask = self.valid.copy()
        if stride > 1:
            mask &= self.frame_indices % stride == 0
        if restrict_to is not None:
            keep = np.zeros(self.n_entries, dtype=bool)
            keep[np.asarray(restrict_to, dtype=np.int64)] = True
            mask &= keep
        return mask

    def camera_blocks(
        self, stride: int = 1, restrict_to: Optional[np.ndarray] = None
    ) -> list[CameraBlock]:
        """Per-camera flattened views of the selected entries.

        Cameras appear in index order and entries keep their storage
        order within each block, so reductions over blocks are
        deterministic.
        """
        mask = self.selection_mask(stride=stride, restrict_to=restrict_to)
        blocks = []
        for i, cam in enumerate(self.cameras):
            ids = np.flatnonzero(mask & (self.cam_indices == i))
            if ids.size:
                blocks.append(
                    CameraBlock(i, cam, ids, self.points3d[ids], self.points2d[ids])
                )
        return blocks


def residual(
    corr: Correspondence, camera: CameraModel, transform: RigidTransform
) -> tuple[np.ndarray, float]:
    """Reprojection residual (predicted - observed) and its depth.

    Raises :class:`NonFiniteProjectionError` on the principal plane, like
    :func:`mocapcal.geometry.project`.
    """
    proj = project(camera, transform, corr.point3d)
    return proj.pixel - corr.point2d, proj.depth


class InlierCount(NamedTuple):
    """Sorted inlier entry ids plus their mean reprojection residual."""

    ids: np.ndarray
    mean_residual: float


def _score_blocks(
    blocks: Sequence[CameraBlock], transform: RigidTransform, tau: float
) -> tuple[int, float, list[np.ndarray]]:
    """Count inliers over prebuilt camera blocks.

    An entry is an inlier when its depth is strictly positive and its
    residual norm is strictly below ``tau``. Entries at or beyond the
    threshold, behind the camera, or without a finite projection are out.
    """
    total = 0
    res_sum = 0.0
    id_chunks: list[np.ndarray] = []
    for block in blocks:
        pixels, depths = project_points(block.camera, transform, block.points3d)
        diff = pixels - block.points2d
        with np.errstate(invalid="ignore", over="ignore"):
            norms = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2)
            keep = (depths > 0.0) & np.isfinite(norms) & (norms < tau)
        kept = np.flatnonzero(keep)
        if kept.size:
            total += int(kept.size)
            res_sum += float(norms[kept].sum())
            id_chunks.append(block.entry_ids[kept])
    mean = res_sum / total if total else 0.0
    return total, mean, id_chunks


def count_inliers(
    cset: CorrespondenceSet,
    transform: RigidTransform,
    tau: float,
    stride: int = 1,
    restrict_to: Optional[np.ndarray] = None,
) -> InlierCount:
    """Inliers of ``transform`` among valid entries at a frame stride."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    blocks = cset.camera_blocks(stride=stride, restrict_to=restrict_to)
    total, mean, id_chunks = _score_blocks(blocks, transform, tau)
    ids = np.sort(np.concatenate(id_chunks)) if id_chunks else np.empty(0, dtype=np.int64)
    return InlierCount(ids=ids, mean_residual=mean)


@dataclass(frozen=True)
class RansacConfig:
    """Settings for the hypothesis search.

    ``tau`` is the inlier radius in pixels, ``coarse_stride`` the frame
    stride used while scoring, and ``min_inlier_ratio`` the fraction of
    scored entries the winning hypothesis must explain.
    """

    tau: float = 10.0
    iterations: int = 2000
    seed: int = 0
    coarse_stride: int = 10
    min_inlier_ratio: float = 0.2

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.coarse_stride < 1:
            raise ValueError("coarse_stride must be >= 1")
        if not 0.0 <= self.min_inlier_ratio <= 1.0:
            raise ValueError("min_inlier_ratio must be in [0, 1]")


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """A scored pose hypothesis; ``source`` is (iteration, solution index)."""

    transform: RigidTransform
    inlier_count: int
    mean_inlier_residual: float
    source: tuple[int, int]


def _sample_groups(cset: CorrespondenceSet) -> list[tuple[int, np.ndarray]]:
    """Entry-id groups per (camera, frame) pair with at least three joints."""
    valid_ids = np.flatnonzero(cset.valid)
    if valid_ids.size == 0:
        return []
    n_frames = cset.dims[2]
    keys = cset.cam_indices[valid_ids] * n_frames + cset.frame_indices[valid_ids]
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    uniq, starts, counts = np.unique(sorted_keys, return_index=True, return_counts=True)
    groups = []
    for key, start, count in zip(uniq, starts, counts):
        if count >= 3:
            groups.append((int(key), valid_ids[order[start : start + count]]))
    return groups


# Candidate ordering: more inliers, then lower mean residual, then the
# earliest (iteration, solution) pair. Stored as a min-key.
def _candidate_key(count: int, mean: float, k: int, l: int):
    return (-count, mean, k, l)


def _run_iteration(
    cset: CorrespondenceSet,
    groups: list[tuple[int, np.ndarray]],
    blocks: Sequence[CameraBlock],
    cfg: RansacConfig,
    k: int,
):
    """Best candidate of iteration ``k``, or None."""
    rng = np.random.default_rng((cfg.seed, k))
    _, group_ids = groups[int(rng.integers(len(groups)))]
    picks = rng.choice(group_ids.size, size=3, replace=False)
    entry_ids = group_ids[picks]
    cam = cset.cameras[int(cset.cam_indices[entry_ids[0]])]
    try:
        problem = MinimalProblem.from_observations(
            cam, cset.points3d[entry_ids], cset.points2d[entry_ids]
        )
        solutions = solve_p3p(problem)
    except DegenerateConfigurationError:
        return None
    best = None
    for l, cam_pose in enumerate(solutions):
        pose = recover_mocap_pose(cam_pose, cam)
        total, mean, _ = _score_blocks(blocks, pose, cfg.tau)
        key = _candidate_key(total, mean, k, l)
        if best is None or key < best[0]:
            best = (key, pose)
    return best


def run_ransac(
    cset: CorrespondenceSet,
    cfg: RansacConfig = RansacConfig(),
    workers: Optional[int] = None,
) -> Hypothesis:
    """Search for the pose hypothesis with the largest consensus.

    Every iteration draws a (camera, frame) pair uniformly among those
    with at least three valid joints, then three distinct joints within
    it. Degenerate samples and rootless quartics consume their iteration.
    Ties are broken by mean inlier residual, then by iteration order, so
    the result is independent of thread count.

    Raises :class:`NoValidSampleError` when nothing can be sampled and
    :class:`InsufficientConsensusError` when the best hypothesis explains
    less than ``min_inlier_ratio`` of the scored entries.
    """
    groups = _sample_groups(cset)
    if not groups:
        raise NoValidSampleError(
            "no (camera, frame) pair has three valid correspondences"
        )
    blocks = cset.camera_blocks(stride=cfg.coarse_stride)
    n_scored = int(sum(block.entry_ids.size for block in blocks))
    if n_scored == 0:
        raise InsufficientConsensusError(
            f"no valid entry survives coarse stride {cfg.coarse_stride}"
        )

    n_workers = worker_count(workers)
    best = None

    def reduce_chunk(start: int, stop: int):
        local = None
        for k in range(start, stop):
            cand = _run_iteration(cset, groups, blocks, cfg, k)
            if cand is not None and (local is None or cand[0] < local[0]):
                local = cand
        return local

    if n_workers == 1:
        best = reduce_chunk(0, cfg.iterations)
    else:
        chunk = max(1, -(-cfg.iterations // (n_workers * 4)))
        bounds = [
            (s, min(s + chunk, cfg.iterations)) for s in range(0, cfg.iterations, chunk)
        ]
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            for cand in pool.map(lambda b: reduce_chunk(*b), bounds):
                if cand is not None and (best is None or cand[0] < best[0]):
                    best = cand

    if best is None:
        raise InsufficientConsensusError(
            "no sample produced a scorable pose hypothesis"
        )
    (neg_count, mean, k, l), pose = best
    count = -neg_count
    ratio = count / n_scored
    if ratio < cfg.min_inlier_ratio:
        raise InsufficientConsensusError(
            f"best hypothesis explains {ratio:.3f} of scored entries, "
            f"below the required {cfg.min_inlier_ratio:.3f}"
        )
    return Hypothesis(
        transform=pose, inlier_count=count, mean_inlier_residual=mean, source=(k, l)
    )
