"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest -s tests/test_acceptance.py` to see the lines live.  The
heavy fixtures (full constants evaluation, the four-intensity campaign, the
N = 5000 triangulation batch) are session-scoped and shared across criteria.

Criterion 4's alpha = 0.3 subcase is expected to fail: the required ratio
(1 - kappa^2) ||x1||^alpha / d^alpha equals 0.9569 at d = 1e-3, outside the
stated [0.98, 1.02] window for every possible implementation of kappa (the
finite-d correction -d^alpha / (4 ||x1||^alpha) is ~ -0.043 at alpha = 0.3).
The companion (non-acceptance) test below shows the equivalent small-d form
2 (1 - kappa) ||x1||^alpha / d^alpha meets the window for all three alpha,
so the lemma itself is implemented correctly.  See the project notes.
"""

import numpy as np
import pytest
import scipy.stats

from fracfield.consts import c_v2, c_v2_mc, c_v3, c_v3_flat_mc
from fracfield.field import (
    FieldParams,
    PointSet,
    build_covariance,
    factor_covariance,
    kappa,
)
from fracfield.geom import (
    WindowSpec,
    check_empty_circumdisk,
    default_pad,
    sample_poisson,
    select_ordered,
    triangulate,
)
from fracfield.harness import RunConfig, convergence_report, run_campaign
from fracfield.rng import substream
from fracfield.stats import corr_r

ACCEPT_SEED = 20250607
ALPHA = 0.5


def report_line(num: int, passed: bool, detail: str) -> None:
    print(f"[ACCEPTANCE {num}] {'PASS' if passed else 'FAIL'} - {detail}", flush=True)


@pytest.fixture(scope="session")
def constants_full(fd_table):
    """Full-budget constants at alpha = 0.5 (doubles as seed A in criterion 6)."""
    from fracfield.consts import compute_constants

    return compute_constants(ALPHA, ACCEPT_SEED, table=fd_table)


@pytest.fixture(scope="session")
def campaign(tmp_path_factory, constants_full):
    """The default campaign: alpha = 0.5, N in {500, 1000, 2000, 4000},
    30 replicates, 64^2 grid."""
    cfg = RunConfig(
        alpha=ALPHA,
        intensities=(500, 1000, 2000, 4000),
        replicates=30,
        grid_m=64,
        seed=ACCEPT_SEED,
        output_dir=str(tmp_path_factory.mktemp("acceptance-run")),
    )
    records = run_campaign(cfg, constants=constants_full)
    agg = convergence_report(records, cfg.alpha)
    return cfg, records, agg


@pytest.fixture(scope="session")
def delaunay_5000():
    """20 triangulation-only replicates at N = 5000: selection sizes and
    sqrt(N)-rescaled anchored edge lengths."""
    n = 5000.0
    edge_ratios, tri_ratios, lengths = [], [], []
    for rep in range(20):
        rng = substream(ACCEPT_SEED, "acceptance", "delaunay5000", rep)
        pts = sample_poisson(WindowSpec(n, default_pad(n)), rng)
        sel = select_ordered(triangulate(pts))
        edge_ratios.append(len(sel.e_n) / n)
        tri_ratios.append(len(sel.dt_n) / n)
        p = pts.points
        d = np.linalg.norm(p[sel.e_n[:, 1]] - p[sel.e_n[:, 0]], axis=1)
        lengths.append(d * np.sqrt(n))
    return np.array(edge_ratios), np.array(tri_ratios), np.concatenate(lengths)


def test_criterion_1_decomposition_identities(campaign):
    """V2 and V3 of the maximum field equal the sum of their parts on every
    replicate, to 1e-9 relative."""
    _, records, _ = campaign
    assert all(r.ok for r in records), [r.error for r in records if not r.ok]
    worst = 0.0
    for r in records:
        rep = r.increment_report
        res2 = abs(rep.v2_max - sum(rep.v2_parts)) / max(1.0, abs(rep.v2_max))
        res3 = abs(rep.v3_max - sum(rep.v3_parts)) / max(1.0, abs(rep.v3_max))
        worst = max(worst, res2, res3)
    passed = worst < 1e-9
    report_line(1, passed, f"max identity residual {worst:.2e} over {len(records)} replicates")
    assert passed


def test_criterion_2_delaunay_intensities(delaunay_5000):
    """mean |E_N|/N in [2.85, 3.15] and mean |DT_N|/N in [1.90, 2.10] at N=5000."""
    edge_ratios, tri_ratios, _ = delaunay_5000
    e_mean, t_mean = edge_ratios.mean(), tri_ratios.mean()
    passed = 2.85 <= e_mean <= 3.15 and 1.90 <= t_mean <= 2.10
    report_line(2, passed, f"|E_N|/N = {e_mean:.4f}, |DT_N|/N = {t_mean:.4f} (20 replicates)")
    assert passed


def test_criterion_3_increment_correlation():
    """Empirical corr(U12, U13) over 5e4 draws matches the analytic correlation
    within 0.02 for 5 fixed triangles."""
    triangles = [
        [(0.10, 0.05), (0.30, 0.12), (0.18, 0.35)],
        [(-0.20, -0.10), (-0.05, -0.18), (-0.12, 0.08)],
        [(0.25, -0.30), (0.45, -0.22), (0.30, -0.05)],
        [(-0.35, 0.20), (-0.15, 0.28), (-0.28, 0.45)],
        [(0.05, 0.40), (0.20, 0.50), (-0.08, 0.52)],
    ]
    params = FieldParams(1.0, ALPHA)
    gaps = []
    for idx, coords in enumerate(triangles):
        coords = np.asarray(coords)
        d12 = np.linalg.norm(coords[1] - coords[0])
        d13 = np.linalg.norm(coords[2] - coords[0])
        d23 = np.linalg.norm(coords[2] - coords[1])
        expected = corr_r(d12, d13, d23, ALPHA)
        factor = factor_covariance(build_covariance(params, PointSet(coords)))
        z = substream(ACCEPT_SEED, "acceptance", "corr", idx).standard_normal((3, 50000))
        w = factor @ z
        u12 = (w[1] - w[0]) / d12 ** (ALPHA / 2)
        u13 = (w[2] - w[0]) / d13 ** (ALPHA / 2)
        gaps.append(abs(np.corrcoef(u12, u13)[0, 1] - expected))
    passed = max(gaps) < 0.02
    report_line(3, passed, f"max |empirical - analytic| = {max(gaps):.4f} over 5 triangles")
    assert passed


def test_criterion_4_small_separation_lemma():
    """(1 - kappa^2) ||x1||^a / d^a in [0.98, 1.02] for a in {0.3, 0.5, 0.8},
    d = 1e-3.  Expected red at a = 0.3 (see module docstring)."""
    x1 = np.array([0.3, 0.2])
    d = 1e-3
    ratios = {}
    for alpha in (0.3, 0.5, 0.8):
        k = kappa(x1, x1 + np.array([d, 0.0]), alpha)
        ratios[alpha] = (1.0 - k**2) * np.linalg.norm(x1) ** alpha / d**alpha
    passed = all(0.98 <= r <= 1.02 for r in ratios.values())
    detail = ", ".join(f"alpha={a}: {r:.4f}" for a, r in ratios.items())
    report_line(4, passed, detail + " (window [0.98, 1.02])")
    assert passed, (
        "alpha = 0.3 sits at 0.9569: the stated window presumes the equivalent "
        "2(1 - kappa) form of the same lemma; see tests docstring and notes"
    )


def test_companion_small_separation_other_form():
    """Non-acceptance companion: the 2(1 - kappa) form of the same asymptotic
    meets [0.98, 1.02] for all three alpha, isolating the criterion-4 defect."""
    x1 = np.array([0.3, 0.2])
    d = 1e-3
    for alpha in (0.3, 0.5, 0.8):
        k = kappa(x1, x1 + np.array([d, 0.0]), alpha)
        ratio = 2.0 * (1.0 - k) * np.linalg.norm(x1) ** alpha / d**alpha
        assert 0.98 <= ratio <= 1.02


def test_criterion_5_palm_consistency(fd_table, delaunay_5000):
    """f_D normalization, typical-cell mean area, and KS between the density
    table and sqrt(N)-rescaled simulated edge lengths."""
    from fracfield.palm import sample_typical_cells

    mass_gap = abs(fd_table.total_mass - 1.0)
    batch = sample_typical_cells(substream(ACCEPT_SEED, "acceptance", "cells"), 1_000_000)
    area_gap = abs(batch.areas.mean() - 0.5)
    _, _, lengths = delaunay_5000
    ks = scipy.stats.kstest(lengths[:50000], fd_table.cdf).statistic
    passed = mass_gap < 1e-3 and area_gap < 0.005 and ks < 0.02
    report_line(
        5,
        passed,
        f"|int f_D - 1| = {mass_gap:.2e}, |mean area - 0.5| = {area_gap:.2e} (1e6 samples), "
        f"KS(table, simulation) = {ks:.4f} (5e4 edges)",
    )
    assert passed


def test_criterion_6_constants_dual_methods(fd_table, constants_full):
    """c_V2: quadrature vs flat MC within 1% relative.  c_V3: two seeds agree
    within 3 combined sigma, and the trapezoid result agrees with the
    importance-sampling oracle within 3 combined sigma."""
    quad = c_v2(ALPHA, fd_table)
    mc = c_v2_mc(ALPHA, substream(ACCEPT_SEED, "acceptance", "cv2mc"), 10_000_000)
    rel = abs(quad.value - mc.value) / abs(quad.value)
    ok_v2 = rel < 0.01

    seed_a = constants_full  # full-budget run at ACCEPT_SEED
    v3_b, _ = c_v3(ALPHA, substream(ACCEPT_SEED + 1, "acceptance", "cv3"), table=fd_table)
    gap_seeds = abs(seed_a.c_v3 - v3_b.value)
    band_seeds = 3.0 * float(np.hypot(seed_a.c_v3_err, v3_b.error))
    ok_seeds = gap_seeds < band_seeds

    flat = c_v3_flat_mc(ALPHA, substream(ACCEPT_SEED, "acceptance", "cv3flat"), 20_000_000)
    gap_flat = abs(seed_a.c_v3 - flat.value)
    band_flat = 3.0 * float(np.hypot(seed_a.c_v3_err, flat.error))
    ok_flat = gap_flat < band_flat

    passed = ok_v2 and ok_seeds and ok_flat
    report_line(
        6,
        passed,
        f"c_V2 {quad.value:.5f} vs MC {mc.value:.5f} (rel {rel:.3%}); "
        f"c_V3 seeds {seed_a.c_v3:.4f}/{v3_b.value:.4f} (gap {gap_seeds:.4f} < {band_seeds:.4f}); "
        f"vs importance MC {flat.value:.4f} (gap {gap_flat:.4f} < {band_flat:.4f})",
    )
    assert passed


def test_criterion_7_limit_trend(campaign):
    """corr(scaled V2, c_V2 L_hat) nondecreasing in N, > 0.8 at N = 4000;
    the V3 pair at threshold 0.7.  Ratio trajectories are reported only."""
    _, _, agg = campaign
    rows = agg["rows"]
    corr2 = [row["corr_s2"] for row in rows]
    corr3 = [row["corr_s3"] for row in rows]
    nondecr2 = all(b >= a for a, b in zip(corr2, corr2[1:]))
    nondecr3 = all(b >= a for a, b in zip(corr3, corr3[1:]))
    passed = nondecr2 and corr2[-1] > 0.8 and nondecr3 and corr3[-1] > 0.7
    detail = (
        f"corr_s2 by N: {[round(c, 3) for c in corr2]} (nondecr {nondecr2}, final > 0.8: "
        f"{corr2[-1] > 0.8}); corr_s3: {[round(c, 3) for c in corr3]} (nondecr {nondecr3}, "
        f"final > 0.7: {corr3[-1] > 0.7})"
    )
    report_line(7, passed, detail)
    ratio_info = "; ".join(
        f"N={int(row['n'])}: ratio2 {row['ratio2_median']:.3f} (IQR {row['ratio2_iqr']:.3f}), "
        f"ratio3 {row['ratio3_median']:.3f} (IQR {row['ratio3_iqr']:.3f})"
        for row in rows
    )
    print(f"    [reported, no target] ratio trajectories: {ratio_info}", flush=True)
    assert passed


def test_criterion_8_cross_term_dominates(campaign):
    """Across-replicate std of the switching part exceeds the std of the sum
    of single-field parts by a factor >= 2 at N = 4000, growing with N."""
    _, _, agg = campaign
    rows = agg["rows"]
    factors = {int(row["n"]): row["sd_v2_cross"] / row["sd_v2_parts"] for row in rows}
    passed = factors[4000] >= 2.0 and factors[4000] > factors[500]
    report_line(
        8,
        passed,
        "std(V2 cross) / std(V2 parts) by N: "
        + ", ".join(f"{n}: {f:.2f}" for n, f in sorted(factors.items())),
    )
    assert passed


def test_criterion_9_brute_force_geometry():
    """Zero strict empty-circumdisk violations over 50 random point sets."""
    violations = 0
    total_triangles = 0
    for rep in range(50):
        rng = substream(ACCEPT_SEED, "acceptance", "bruteforce", rep)
        n_pts = int(rng.integers(10, 201))
        pts = PointSet(rng.uniform(-0.5, 0.5, size=(n_pts, 2)))
        dc = triangulate(pts)
        violations += check_empty_circumdisk(dc)
        total_triangles += len(dc.triangles)
    passed = violations == 0
    report_line(9, passed, f"{violations} violations over 50 sets ({total_triangles} triangles)")
    assert passed
