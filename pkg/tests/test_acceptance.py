"""Acceptance suite: one criterion per test, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see every line; without
``-s`` the lines surface only for failing criteria.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from mocapcal import (
    CalibrationReport,
    CorrespondenceCounts,
    EulerPose,
    MinimalProblem,
    RansacConfig,
    RefineConfig,
    RigidTransform,
    Timing,
    calibrate,
    compute_mpjpe,
    loss_and_gradient,
    run_ransac,
    solve_p3p,
)
from mocapcal.session_io import (
    load_report,
    load_session,
    report_to_dict,
    save_report,
    save_session,
)
from mocapcal.synth import GAUSSIAN, SynthConfig, generate

from helpers import random_rotation_matrix
from malformed_corpus import CASES


def accept(criterion: int, ok: bool, detail: str) -> None:
    print(f"ACCEPT {criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def random_minimal_problem(rng):
    while True:
        rot = random_rotation_matrix(rng)
        trans = rng.uniform(-1.0, 1.0, 3) + np.array([0.0, 0.0, 4.0])
        pts = rng.uniform(-1.0, 1.0, (3, 3))
        area = 0.5 * np.linalg.norm(np.cross(pts[1] - pts[0], pts[2] - pts[0]))
        if area < 1e-6:
            continue
        cam_pts = pts @ rot.T + trans
        if np.any(cam_pts[:, 2] <= 0.1):
            continue
        bearings = cam_pts / np.linalg.norm(cam_pts, axis=1, keepdims=True)
        return MinimalProblem(world_points=pts, bearings=bearings), rot, trans


def uncorrupted_mpjpe(session, transform):
    keep = np.flatnonzero(session.corruption <= GAUSSIAN)
    return compute_mpjpe(session.correspondences, transform, restrict_to=keep)


NOISY_RANSAC = dict(tau=6.0, iterations=400, coarse_stride=5)
NOISY_REFINE = RefineConfig(steps=800, fine_stride=1)


@pytest.fixture(scope="module")
def noisy_sweep():
    """Twenty noisy sessions calibrated once, shared by criteria 4 and 5."""
    start = time.perf_counter()
    runs = []
    for seed in range(20):
        session = generate(
            SynthConfig(
                n_cameras=2,
                n_joints=17,
                n_frames=300,
                noise_sigma=2.0,
                outlier_fraction=0.2,
                seed=seed,
            )
        )
        ransac_cfg = RansacConfig(seed=seed, **NOISY_RANSAC)
        report = calibrate(
            session.correspondences,
            ransac_cfg,
            NOISY_REFINE,
            gt_extrinsic=session.gt_extrinsic,
        )
        # Deterministic replay of the initialization stage recovers the
        # pre-refinement transform the report does not carry.
        init = run_ransac(session.correspondences, ransac_cfg).transform
        runs.append(
            dict(
                report=report,
                init_uncorrupted=uncorrupted_mpjpe(session, init),
                refined_uncorrupted=uncorrupted_mpjpe(session, report.transform),
            )
        )
    return runs, time.perf_counter() - start


def test_criterion_1_p3p_exactness():
    rng = np.random.default_rng(0)
    n_problems = 10_000
    start = time.perf_counter()
    recovered = 0
    worst_residual = 0.0
    for _ in range(n_problems):
        problem, rot, trans = random_minimal_problem(rng)
        solutions = solve_p3p(problem)
        observed = problem.bearings[:, :2] / problem.bearings[:, 2:3]
        for sol in solutions:
            cam_pts = problem.world_points @ sol.rotation.T + sol.translation
            residual = np.abs(cam_pts[:, :2] / cam_pts[:, 2:3] - observed).max()
            worst_residual = max(worst_residual, residual)
        if any(
            np.linalg.norm(s.rotation - rot) < 1e-6
            and np.linalg.norm(s.translation - trans) < 1e-6
            for s in solutions
        ):
            recovered += 1
    elapsed = time.perf_counter() - start
    ok = recovered == n_problems and worst_residual < 1e-8 and elapsed < 5.0
    accept(
        1,
        ok,
        f"p3p recovered {recovered}/{n_problems}, worst normalized residual "
        f"{worst_residual:.2e} (< 1e-8), {elapsed:.2f} s (< 5 s)",
    )


def test_criterion_2_gradient_correctness():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    n_configs = 100
    worst_rel = 0.0
    for _ in range(n_configs):
        session = generate(
            SynthConfig(
                n_cameras=2,
                n_joints=5,
                n_frames=8,
                noise_sigma=1.0,
                seed=int(rng.integers(1 << 31)),
            )
        )
        pose = EulerPose(*rng.uniform(-0.3, 0.3, 3), rng.uniform(-0.2, 0.2, 3))
        analytic = loss_and_gradient(session.correspondences, pose).gradient
        vec = pose.as_vector()
        for k in range(6):
            h = 1e-6
            plus, minus = vec.copy(), vec.copy()
            plus[k] += h
            minus[k] -= h
            fd = (
                loss_and_gradient(session.correspondences, EulerPose.from_vector(plus)).loss
                - loss_and_gradient(session.correspondences, EulerPose.from_vector(minus)).loss
            ) / (2.0 * h)
            if abs(fd) > 1e-8:
                worst_rel = max(worst_rel, abs(analytic[k] - fd) / abs(fd))
    elapsed = time.perf_counter() - start
    ok = worst_rel < 1e-4 and elapsed < 30.0
    accept(
        2,
        ok,
        f"gradients on {n_configs} configs, worst relative error {worst_rel:.2e} "
        f"(< 1e-4), {elapsed:.2f} s (< 30 s)",
    )


def test_criterion_3_noiseless_recovery():
    start = time.perf_counter()
    session = generate(SynthConfig(n_cameras=2, n_joints=17, n_frames=300, seed=0))
    report = calibrate(
        session.correspondences,
        RansacConfig(),
        RefineConfig(),
        gt_extrinsic=session.gt_extrinsic,
    )
    elapsed = time.perf_counter() - start
    ok = (
        report.gt_rotation_err_deg < 1e-6
        and report.gt_translation_err_m < 1e-6
        and report.mpjpe_refined < 1e-6
        and report.inlier_ratio == 1.0
        and elapsed < 10.0
    )
    accept(
        3,
        ok,
        f"noiseless recovery rot {report.gt_rotation_err_deg:.2e} deg, trans "
        f"{report.gt_translation_err_m:.2e} m, mpjpe {report.mpjpe_refined:.2e} px, "
        f"ratio {report.inlier_ratio}, {elapsed:.2f} s (< 10 s)",
    )


def test_criterion_4_noisy_robust_recovery(noisy_sweep):
    runs, elapsed = noisy_sweep
    floor = 2.0 * math.sqrt(math.pi / 2.0)
    pose_hits = sum(
        r["report"].gt_rotation_err_deg < 0.5 and r["report"].gt_translation_err_m < 0.02
        for r in runs
    )
    floor_hits = sum(abs(r["refined_uncorrupted"] - floor) / floor < 0.10 for r in runs)
    monotone = sum(r["report"].mpjpe_refined <= r["report"].mpjpe_init for r in runs)
    worst_refined = max(r["refined_uncorrupted"] for r in runs)
    ok = pose_hits >= 19 and floor_hits == 20 and monotone == 20 and elapsed < 180.0
    accept(
        4,
        ok,
        f"noisy recovery {pose_hits}/20 within 0.5 deg / 2 cm, {floor_hits}/20 at the "
        f"Rayleigh floor (worst {worst_refined:.4f} vs {floor:.4f} px), refined<=init "
        f"{monotone}/20, {elapsed:.1f} s (< 180 s)",
    )


def test_criterion_5_refinement_value(noisy_sweep):
    runs, _ = noisy_sweep
    # Improvement measured on uncorrupted entries; the full-set reading is
    # insensitive to refinement because the untouched 20% outlier mass
    # dominates both mpjpe_init and mpjpe_refined.
    improvements = [
        (r["init_uncorrupted"] - r["refined_uncorrupted"]) / r["init_uncorrupted"]
        for r in runs
    ]
    median = float(np.median(improvements))
    ok = median >= 0.15
    accept(5, ok, f"median refinement improvement {median:.3f} (>= 0.15) over 20 seeds")


def test_criterion_6_worker_determinism():
    session = generate(
        SynthConfig(
            n_cameras=2, n_joints=17, n_frames=100, noise_sigma=2.0, outlier_fraction=0.2, seed=6
        )
    )
    docs = []
    for workers in (1, 8):
        report = calibrate(
            session.correspondences,
            RansacConfig(seed=6, **NOISY_RANSAC),
            NOISY_REFINE,
            workers=workers,
        )
        doc = report_to_dict(report)
        doc.pop("timing")
        docs.append(json.dumps(doc, sort_keys=False))
    ok = docs[0] == docs[1]
    accept(6, ok, "1-thread and 8-thread reports byte-identical modulo timing")


def test_criterion_7_throughput():
    session = generate(SynthConfig(n_cameras=2, n_joints=17, n_frames=10_000, seed=7))
    start = time.perf_counter()
    report = calibrate(session.correspondences, RansacConfig(), RefineConfig())
    elapsed = time.perf_counter() - start
    per_frame = 1000.0 * elapsed / 10_000
    ok = elapsed < 60.0 and per_frame < 6.0
    accept(
        7,
        ok,
        f"10k-frame calibration {elapsed:.1f} s (< 60 s), {per_frame:.2f} ms/frame "
        f"(< 6), reported {report.timing.ms_per_frame:.2f} ms/frame",
    )


def _random_report(rng) -> CalibrationReport:
    trans = rng.normal(size=3)
    has_gt = bool(rng.integers(2))
    return CalibrationReport(
        transform=RigidTransform(random_rotation_matrix(rng), trans),
        euler=EulerPose(*rng.uniform(-1, 1, 3), trans),
        mpjpe_init=float(rng.uniform(0, 50)),
        mpjpe_refined=float(rng.uniform(0, 50)),
        mpjpe_gt=float(rng.uniform(0, 50)) if has_gt else None,
        gt_rotation_err_deg=float(rng.uniform(0, 5)) if has_gt else None,
        gt_translation_err_m=float(rng.uniform(0, 1)) if has_gt else None,
        inlier_ratio=float(rng.uniform(0, 1)),
        inlier_count=int(rng.integers(0, 10_000)),
        refinement_rejected=bool(rng.integers(2)),
        correspondence_counts=CorrespondenceCounts(
            total=int(rng.integers(1, 10_000)),
            valid=int(rng.integers(1, 10_000)),
            positive_depth=int(rng.integers(1, 10_000)),
        ),
        timing=Timing(*(float(v) for v in rng.uniform(0, 1000, 4))),
        config_echo={"tau": float(rng.uniform(1, 20)), "steps": int(rng.integers(1, 5000))},
        seed=int(rng.integers(0, 1 << 31)),
        warnings=("drift repaired",) if rng.integers(2) else (),
    )


def test_criterion_8_io_round_trips(tmp_path):
    rng = np.random.default_rng(8)
    session_failures = []
    for k in range(100):
        cfg = SynthConfig(
            n_cameras=int(rng.integers(1, 4)),
            n_joints=int(rng.integers(3, 10)),
            n_frames=int(rng.integers(2, 12)),
            noise_sigma=float(rng.uniform(0, 3)),
            outlier_fraction=float(rng.uniform(0, 0.3)),
            invalid_fraction=float(rng.uniform(0, 0.3)),
            seed=int(rng.integers(1 << 31)),
        )
        session = generate(cfg)
        path = str(tmp_path / f"session{k}.json")
        save_session(path, session.correspondences, session.gt_extrinsic)
        loaded = load_session(path)
        orig = session.correspondences
        keep = np.flatnonzero(orig.valid)
        same = (
            loaded.correspondences.dims == orig.dims
            and np.array_equal(loaded.correspondences.points3d, orig.points3d[keep])
            and np.array_equal(loaded.correspondences.points2d, orig.points2d[keep])
            and np.array_equal(loaded.gt_extrinsic.rotation, session.gt_extrinsic.rotation)
            and np.array_equal(loaded.gt_extrinsic.translation, session.gt_extrinsic.translation)
        )
        if not same:
            session_failures.append(k)

    report_failures = []
    for k in range(100):
        report = _random_report(rng)
        path = str(tmp_path / f"report{k}.json")
        save_report(report, path)
        if report_to_dict(load_report(path)) != report_to_dict(report):
            report_failures.append(k)

    corpus_failures = []
    for case in CASES:
        path = str(tmp_path / f"bad-{case.name}.json")
        case.write(path)
        try:
            load_session(path)
            corpus_failures.append(f"{case.name} (no error)")
        except Exception as exc:  # noqa: BLE001 - asserting exact classes below
            if type(exc) is not case.error:
                corpus_failures.append(f"{case.name} ({type(exc).__name__})")

    ok = not session_failures and not report_failures and not corpus_failures
    accept(
        8,
        ok,
        f"100/100 session and 100/100 report round trips exact, "
        f"{len(CASES) - len(corpus_failures)}/{len(CASES)} malformed cases raise the "
        f"documented error{'; failures: ' + repr((session_failures, report_failures, corpus_failures)) if not ok else ''}",
    )


def test_criterion_9_rayleigh_noise_floor():
    sigma = 2.0
    session = generate(
        SynthConfig(n_cameras=2, n_joints=17, n_frames=3000, noise_sigma=sigma, seed=9)
    )
    cset = session.correspondences
    norms = []
    from mocapcal import project_points

    for block in cset.camera_blocks(stride=1):
        pixels, _ = project_points(block.camera, session.gt_extrinsic, block.points3d)
        diff = pixels - block.points2d
        norms.append(np.hypot(diff[:, 0], diff[:, 1]))
    norms = np.concatenate(norms)
    expected = sigma * math.sqrt(math.pi / 2.0)
    rel = abs(float(norms.mean()) - expected) / expected
    ok = norms.size >= 100_000 and rel < 0.02
    accept(
        9,
        ok,
        f"generator noise floor {norms.mean():.4f} px vs {expected:.4f} px "
        f"({rel * 100:.2f}% off, < 2%) on {norms.size} entries",
    )
