"""Built-in oracle suites for the `verify` CLI command.

Each check prints one pass/fail line and the suite returns False when
anything fails.  These duplicate (in lighter form) the strongest test-suite
oracles: brute-force geometry verification, Monte Carlo covariance
consistency, and dual-method agreement of the limit constants.
"""

from __future__ import annotations

import numpy as np

from .consts import c_v2, c_v2_mc, c_v3, c_v3_cell_reduced
from .field import FieldParams, PointSet, build_covariance, sample_pair
from .geom import check_empty_circumdisk, triangulate
from .rng import substream


def _line(name: str, passed: bool, detail: str) -> bool:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return passed


def verify_delaunay(seed: int, n_sets: int) -> bool:
    rng = substream(seed, "verify", "delaunay")
    violations = 0
    for _ in range(n_sets):
        pts = PointSet(rng.uniform(-0.5, 0.5, size=(int(rng.integers(10, 201)), 2)))
        violations += check_empty_circumdisk(triangulate(pts))
    return _line(
        "delaunay empty-circumdisk (brute force)",
        violations == 0,
        f"{violations} violations over {n_sets} point sets",
    )


def verify_covariance(seed: int, n_scenes: int = 10000) -> bool:
    rng = substream(seed, "verify", "covariance")
    params = FieldParams(sigma2=1.0, alpha=0.5)
    pts = PointSet(np.array([[0.3, 0.1], [-0.2, 0.25], [0.05, -0.4]]))
    target = build_covariance(params, pts)
    draws = np.empty((2 * n_scenes, 3))
    for i in range(n_scenes):
        scene = sample_pair(params, pts, rng)
        draws[2 * i] = scene.w1
        draws[2 * i + 1] = scene.w2
    products = draws[:, :, None] * draws[:, None, :]
    emp = products.mean(axis=0)
    se = products.std(axis=0, ddof=1) / np.sqrt(len(draws))
    dev = np.abs(emp - target) / np.where(se > 0, se, 1.0)
    worst = float(dev.max())
    return _line(
        "field covariance (Monte Carlo, 3 sigma)",
        worst < 3.0,
        f"max |emp - analytic| = {worst:.2f} standard errors",
    )


def verify_constants(seed: int, fast: bool) -> bool:
    alpha = 0.5
    quad = c_v2(alpha)
    mc = c_v2_mc(alpha, substream(seed, "verify", "cv2mc"), 2_000_000 if fast else 10_000_000)
    rel = abs(quad.value - mc.value) / abs(quad.value)
    ok2 = _line(
        "c_V2 dual method (quadrature vs flat MC, 1%)",
        rel < 0.01,
        f"quad {quad.value:.5f} vs mc {mc.value:.5f} (+-{mc.error:.5f}), rel {rel:.4%}",
    )
    n = 100_000 if fast else 400_000
    trap, _ = c_v3(alpha, substream(seed, "verify", "cv3"), n_nodes=21, n_samples=n)
    reduced = c_v3_cell_reduced(alpha, substream(seed, "verify", "cv3red"), 4 * n)
    gap = abs(trap.value - reduced.value)
    band = 3.0 * float(np.hypot(trap.error, reduced.error))
    ok3 = _line(
        "c_V3 dual method (trapezoid MC vs reduced, 3 sigma)",
        gap < band,
        f"trapezoid {trap.value:.4f} (+-{trap.error:.4f}) vs reduced "
        f"{reduced.value:.4f} (+-{reduced.error:.4f})",
    )
    return ok2 and ok3


def run_verify(seed: int, fast: bool = False) -> bool:
    """Run all oracle suites; returns True when everything passed."""
    results = [
        verify_delaunay(seed, 10 if fast else 50),
        verify_covariance(seed),
        verify_constants(seed, fast),
    ]
    return all(results)
