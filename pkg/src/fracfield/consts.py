"""Numerical evaluation of the limit constants c_V2 and c_V3.

Both constants integrate a level profile over the switching level z:

    c_V2 = int_R F2(z) dz,
    F2(z) = E[ Psi_H2(X, Y, z / D^{a/2}) ],   X, Y iid N(0,1),  D ~ f_D,

    c_V3 = int_R F3(z) dz,
    F3(z) = E[ Omega(X1, Y1, X2, Y2, z/D1^{a/2}, z/D3^{a/2}; R(D1, D2, D3)) ],

where (D1, D2, D3) are the side lengths of the typical cell, R is the
increment correlation of the cell, and the Gaussian increments pair up per
edge: X_i (field 1) and Y_i (field 2) on edge i, with corr(X1, X2) =
corr(Y1, Y2) = R within a field and independence across fields.  This is the
joint law of the four normalized increments of two independent fields along
two edges sharing a vertex; the bivariate weights in the defining display are
read as that law, written with the standard bivariate normal density (the
written prefactor 1/(2 pi (1-R^2)) is reproducible via
phi2_normalization="asdisplayed", which reweights each correlated pair by the
ratio to the standard 1/(2 pi sqrt(1-R^2))).

The inner Gaussian integrals reduce in the rotated coordinate s = x - y:
Psi only depends on (s, x + y) through polynomial factors, which closes the
double integral:

    G(t)  = E[Psi_H2(X, Y, t)] = t^2 Phi(-|t|/sqrt2) - sqrt2 |t| phi(t/sqrt2),
    T1(w) = E[S g_w(S)] = sign(w) 2 Phi(-|w|/sqrt2),      S ~ N(0, 2),
    g_w(s) = |s - w| 1[w between 0 and s]  (= Psi_I as a function of s).

F2 therefore needs only a 1-D quadrature against f_D, and c_V2 collapses
further: substituting z = d^{a/2} t factorizes the double integral into

    c_V2 = (int_R G) * E[D^{a/2}] = -(4 / (3 sqrt pi)) E[D^{a/2}],

kept as an independent cross-check of the nested quadrature.  c_V3 is
estimated by Monte Carlo over typical cells; a Rao-Blackwellized variant
(z and all four Gaussians integrated out in closed form given the cell and
one draw of the pair (S1, S2)) provides the strongest cross-validation.
Every reported value carries an error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import ndtr  # standard normal CDF, vectorized

from .errors import QuadratureFailure
from .palm import FdTable, TypicalCellBatch, default_fd_table, sample_typical_cells
from .stats import DEGENERACY_TOL, _omega_array, _psi_h2, corr_r_array

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

#: int_R G(t) dt in closed form.
GAUSS_PSI_H2_INTEGRAL = -4.0 / (3.0 * math.sqrt(math.pi))

PHI2_NORMALIZATIONS = ("standard", "asdisplayed")


def _phi(x):
    return _INV_SQRT2PI * np.exp(-0.5 * np.asarray(x, float) ** 2)


def gauss_psi_h2_mean(t):
    """G(t): mean of Psi_H2(X, Y, t) over independent standard normals."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t) / _SQRT2
    out = t * t * ndtr(-a) - _SQRT2 * np.abs(t) * _phi(a)
    return out if out.ndim else float(out)


def gauss_psi_i_weighted_mean(w):
    """T1(w) = E[S Psi_I-profile], S ~ N(0, 2); odd in w, jump at 0 is immaterial
    under the z-integrals that consume it."""
    w = np.asarray(w, dtype=float)
    out = np.where(w < 0, -2.0 * ndtr(w / _SQRT2), 2.0 * ndtr(-w / _SQRT2))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ConstantValue:
    value: float
    error: float  # quadrature bound or MC standard error

    def __post_init__(self):
        if self.error < 0:
            raise ValueError("error estimate must be nonnegative")


@dataclass
class ConstantsReport:
    """Integrated constants with errors, the z-profile, and provenance tags."""

    alpha: float
    c_v2: float
    c_v2_err: float
    c_v3: float
    c_v3_err: float
    z_grid: list  # rows (z, F2(z), F3(z))
    seed: int | None = None
    methods: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "c_v2": self.c_v2,
            "c_v2_err": self.c_v2_err,
            "c_v3": self.c_v3,
            "c_v3_err": self.c_v3_err,
            "z_grid": [list(row) for row in self.z_grid],
            "seed": self.seed,
            "methods": self.methods,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConstantsReport":
        return cls(
            alpha=data["alpha"],
            c_v2=data["c_v2"],
            c_v2_err=data["c_v2_err"],
            c_v3=data["c_v3"],
            c_v3_err=data["c_v3_err"],
            z_grid=[tuple(row) for row in data["z_grid"]],
            seed=data.get("seed"),
            methods=data.get("methods", {}),
        )


# ---------------------------------------------------------------------------
# F2 and c_V2
# ---------------------------------------------------------------------------


def f2_of_z(z: float, alpha: float, table: FdTable | None = None) -> float:
    """Level profile F2(z): 1-D quadrature of G(z / d^{a/2}) against f_D."""
    table = table or default_fd_table()
    val, err = _f2_quad(np.asarray([z], float), alpha, table)
    if err[0] > 1e-6 * max(1.0, abs(val[0])):
        raise QuadratureFailure(f"F2({z}) quadrature error {err[0]:.3e} too large")
    return float(val[0])


@lru_cache(maxsize=8)
def _leggauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _f2_nodes(z: np.ndarray, alpha: float, table: FdTable, order: int) -> np.ndarray:
    x, w = _leggauss(order)
    d = 0.5 * (x + 1.0) * table.ell_max
    wd = 0.5 * table.ell_max * w * table.pdf(d)
    g = gauss_psi_h2_mean(z[:, None] / d[None, :] ** (alpha / 2.0))
    return g @ wd


def _f2_quad(z: np.ndarray, alpha: float, table: FdTable, n: int = 384):
    """Vectorized fixed-order Gauss-Legendre over the f_D domain, with an
    error estimate from order halving."""
    coarse = _f2_nodes(z, alpha, table, n // 2)
    fine = _f2_nodes(z, alpha, table, n)
    return fine, np.abs(fine - coarse)


def adaptive_z_max(alpha: float, table: FdTable | None = None, start: float = 12.0,
                   tail_tol: float = 1e-8) -> float:
    """Smallest doubling of `start` past which |F2| is below tail_tol."""
    table = table or default_fd_table()
    z_max = start
    for _ in range(8):
        tail, _ = _f2_quad(np.asarray([z_max]), alpha, table)
        if abs(tail[0]) < tail_tol:
            return z_max
        z_max *= 2.0
    raise QuadratureFailure(f"F2 tail still {tail[0]:.3e} at z = {z_max}")


def c_v2(alpha: float, table: FdTable | None = None,
         z_max: float | None = None) -> ConstantValue:
    """Nested-quadrature c_V2: adaptive z-integration of the F2 profile.

    F2 is even with a corner at the origin, so the integral runs over
    (0, z_max] and doubles; the error combines the quadrature estimate with
    the d-quadrature bound and the truncated tail.
    """
    table = table or default_fd_table()
    if z_max is None:
        z_max = adaptive_z_max(alpha, table)

    def profile(z: float) -> float:
        return float(_f2_nodes(np.asarray([z]), alpha, table, 384)[0])

    half, quad_err = integrate.quad(profile, 0.0, z_max, limit=200, epsabs=1e-10)
    if quad_err > 1e-5:
        raise QuadratureFailure(f"c_V2 z-quadrature error {quad_err:.3e}")
    _, derr = _f2_quad(np.asarray([0.5, 1.0, 2.0]), alpha, table)
    tail = abs(profile(z_max)) * z_max
    return ConstantValue(
        value=2.0 * half, error=2.0 * (quad_err + float(derr.max()) * z_max) + tail
    )


def c_v2_product_form(alpha: float, table: FdTable | None = None) -> float:
    """Closed reduction -(4 / 3 sqrt(pi)) E[D^{a/2}] (independent cross-check)."""
    table = table or default_fd_table()
    return GAUSS_PSI_H2_INTEGRAL * table.mean_pow(alpha / 2.0)


def c_v2_mc(alpha: float, rng: np.random.Generator, n_samples: int = 10_000_000,
            chunk: int = 2_000_000) -> ConstantValue:
    """Flat Monte Carlo over (z, x, y, d).

    d is a typical-cell side (no use of the f_D table, keeping the method
    independent of the quadrature route); z is importance-sampled uniformly
    on the exact support [0 ^ d^{a/2}(x-y), 0 v d^{a/2}(x-y)], whose length
    is the importance weight.
    """
    total = 0.0
    total_sq = 0.0
    n_done = 0
    while n_done < n_samples:
        m = min(chunk, n_samples - n_done)
        d = sample_typical_cells(rng, m).d12
        x = rng.standard_normal(m)
        y = rng.standard_normal(m)
        a = d ** (alpha / 2.0)
        span = a * (x - y)
        z = rng.uniform(np.minimum(0.0, span), np.maximum(0.0, span))
        vals = np.abs(span) * _psi_h2(x, y, z / a)
        total += vals.sum()
        total_sq += (vals**2).sum()
        n_done += m
    mean = total / n_done
    var = max(total_sq / n_done - mean**2, 0.0)
    return ConstantValue(value=float(mean), error=float(np.sqrt(var / n_done)))


# ---------------------------------------------------------------------------
# F3 and c_V3
# ---------------------------------------------------------------------------


def _cell_geometry(rng: np.random.Generator, n: int, alpha: float):
    cells = sample_typical_cells(rng, n)
    d1, d2, d3 = cells.d12, cells.d23, cells.d13
    r = corr_r_array(d1, d3, d2, alpha)
    keep = np.abs(r) < 1.0 - DEGENERACY_TOL
    return d1[keep], d3[keep], r[keep]


def _correlated_pairs(rng: np.random.Generator, r: np.ndarray):
    """(X1, X2) and (Y1, Y2): two independent centered unit-variance pairs with
    correlation r (field 1 resp. field 2 along the two edges)."""
    z = rng.standard_normal((4, len(r)))
    root = np.sqrt(1.0 - r * r)
    x1, y1 = z[0], z[2]
    x2 = r * z[0] + root * z[1]
    y2 = r * z[2] + root * z[3]
    return x1, x2, y1, y2


def _phi2_weight(r: np.ndarray, phi2_normalization: str) -> np.ndarray | float:
    if phi2_normalization == "standard":
        return 1.0
    if phi2_normalization == "asdisplayed":
        # ratio (written prefactor / standard prefactor)^2, one factor per pair
        return 1.0 / (1.0 - r * r)
    raise ValueError(
        f"unknown phi2_normalization {phi2_normalization!r}; "
        f"expected one of {PHI2_NORMALIZATIONS}"
    )


def f3_of_z(z: float, alpha: float, rng: np.random.Generator,
            n_samples: int = 1_000_000,
            phi2_normalization: str = "standard") -> ConstantValue:
    """Monte Carlo F3(z) over typical cells and Gaussian increment pairs."""
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    d1, d3, r = _cell_geometry(rng, n_samples, alpha)
    x1, x2, y1, y2 = _correlated_pairs(rng, r)
    w1 = z / d1 ** (alpha / 2.0)
    w2 = z / d3 ** (alpha / 2.0)
    vals = _omega_array(x1, y1, x2, y2, w1, w2, r) * _phi2_weight(r, phi2_normalization)
    return ConstantValue(
        value=float(vals.mean()), error=float(vals.std(ddof=1) / np.sqrt(len(vals)))
    )


def c_v3(alpha: float, rng: np.random.Generator, z_max: float | None = None,
         n_nodes: int = 161, n_samples: int = 1_000_000,
         phi2_normalization: str = "standard",
         table: FdTable | None = None) -> tuple[ConstantValue, list]:
    """Trapezoidal integral of the Monte Carlo F3 profile on a symmetric z-grid.

    Every node consumes its own spawned substream, so the result does not
    depend on evaluation order.  The profile has a corner at z = 0 (like F2),
    which makes the composite trapezoid error (dz^2/12) |jump of F3'|; the
    default grid keeps that bias below the Monte Carlo error, and the
    reported error adds a Richardson estimate |fine - coarse|/3 from the
    half-resolution grid on top of the propagated MC error.  Returns the
    constant and the profile rows (z, F3(z), stderr).
    """
    if n_nodes < 5 or n_nodes % 4 != 1:
        raise ValueError("n_nodes must be 4k + 1 so the half grid shares its nodes")
    if z_max is None:
        z_max = adaptive_z_max(alpha, table or default_fd_table())
    zs = np.linspace(-z_max, z_max, n_nodes)
    streams = rng.spawn(n_nodes)
    means = np.empty(n_nodes)
    errs = np.empty(n_nodes)
    for idx, (z, stream) in enumerate(zip(zs, streams)):
        est = f3_of_z(float(z), alpha, stream, n_samples, phi2_normalization)
        means[idx] = est.value
        errs[idx] = est.error

    def _trapezoid(step: int):
        dz = (zs[step] - zs[0])
        w = np.full(len(zs[::step]), dz)
        w[0] = w[-1] = dz / 2.0
        return w @ means[::step], w

    fine, weights = _trapezoid(1)
    coarse, _ = _trapezoid(2)
    mc_err = float(np.sqrt(np.sum((weights * errs) ** 2)))
    res_err = abs(fine - coarse) / 3.0
    profile = [(float(z), float(m), float(e)) for z, m, e in zip(zs, means, errs)]
    return ConstantValue(value=float(fine), error=float(np.hypot(mc_err, res_err))), profile


def c_v3_flat_mc(alpha: float, rng: np.random.Generator,
                 n_samples: int = 20_000_000, proposal_scale: float = 2.5,
                 phi2_normalization: str = "standard",
                 chunk: int = 2_000_000) -> ConstantValue:
    """Single flat Monte Carlo over (cell, increments, z) with z drawn from a
    wide Laplace proposal and importance-reweighted (oracle for c_v3)."""
    total = 0.0
    total_sq = 0.0
    n_done = 0
    while n_done < n_samples:
        m = min(chunk, n_samples - n_done)
        d1, d3, r = _cell_geometry(rng, m, alpha)
        x1, x2, y1, y2 = _correlated_pairs(rng, r)
        z = rng.laplace(0.0, proposal_scale, size=len(r))
        q = np.exp(-np.abs(z) / proposal_scale) / (2.0 * proposal_scale)
        vals = (
            _omega_array(x1, y1, x2, y2, z / d1 ** (alpha / 2.0),
                         z / d3 ** (alpha / 2.0), r)
            * _phi2_weight(r, phi2_normalization)
            / q
        )
        total += vals.sum()
        total_sq += (vals**2).sum()
        n_done += len(vals)
    mean = total / n_done
    var = max(total_sq / n_done - mean**2, 0.0)
    return ConstantValue(value=float(mean), error=float(np.sqrt(var / n_done)))


def c_v3_cell_reduced(alpha: float, rng: np.random.Generator,
                      n_samples: int = 2_000_000) -> ConstantValue:
    """Rao-Blackwellized c_V3: all Gaussian and z integrals closed per cell.

    Conditional on a cell with edge scales (a1, a3) = (d1^{a/2}, d3^{a/2}) and
    correlation R, writing c = 1/(1-R^2) and S = a1 + a3:

      * the two Psi_H2 terms integrate to  c (int G) S,
      * the sign-gated linear terms to     (4 R^2 c / sqrt pi) S,
      * the product term to  -2 R c E[(S1, S2)-integral], where the inner
        z-integral of g_{z/a1}(S1) g_{z/a3}(S2) is the cubic
            |s1||s2| m - (|s1|/a3 + |s2|/a1) m^2/2 + m^3/(3 a1 a3),
        m = min(a1 |s1|, a3 |s2|), supported on sign(s1) = sign(s2),
        and (S1, S2) is centered bivariate normal, variance 2, correlation R.

    One (S1, S2) draw per cell keeps the estimator unbiased with far less
    variance than the raw profile Monte Carlo.  Used as a cross-check.
    """
    d1, d3, r = _cell_geometry(rng, n_samples, alpha)
    a1 = d1 ** (alpha / 2.0)
    a3 = d3 ** (alpha / 2.0)
    c = 1.0 / (1.0 - r * r)
    span = a1 + a3
    base = GAUSS_PSI_H2_INTEGRAL * c * span + (4.0 / math.sqrt(math.pi)) * r * r * c * span
    z0 = rng.standard_normal(len(r))
    z1 = rng.standard_normal(len(r))
    s1 = _SQRT2 * z0
    s2 = _SQRT2 * (r * z0 + np.sqrt(1.0 - r * r) * z1)
    same = np.sign(s1) == np.sign(s2)
    m = np.minimum(a1 * np.abs(s1), a3 * np.abs(s2))
    cubic = (
        np.abs(s1) * np.abs(s2) * m
        - (np.abs(s1) / a3 + np.abs(s2) / a1) * m**2 / 2.0
        + m**3 / (3.0 * a1 * a3)
    )
    vals = base - 2.0 * r * c * np.where(same, cubic, 0.0)
    return ConstantValue(
        value=float(vals.mean()), error=float(vals.std(ddof=1) / np.sqrt(len(vals)))
    )


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def compute_constants(alpha: float, seed: int, fast: bool = False,
                      phi2_normalization: str = "standard",
                      table: FdTable | None = None,
                      n_nodes: int | None = None,
                      n_samples: int | None = None) -> ConstantsReport:
    """Evaluate both constants with the production methods and assemble the report."""
    from .rng import substream

    table = table or default_fd_table()
    z_max = adaptive_z_max(alpha, table)
    if n_samples is None:
        n_samples = 200_000 if fast else 1_000_000
    if n_nodes is None:
        n_nodes = 81 if fast else 161
    v2 = c_v2(alpha, table, z_max=z_max)
    v3, profile = c_v3(
        alpha,
        substream(seed, "constants", alpha, "f3"),
        z_max=z_max,
        n_nodes=n_nodes,
        n_samples=n_samples,
        phi2_normalization=phi2_normalization,
    )
    zs = np.array([row[0] for row in profile])
    f2_vals, _ = _f2_quad(zs, alpha, table)
    z_grid = [
        (float(z), float(f2v), float(f3v))
        for z, f2v, (_, f3v, _) in zip(zs, f2_vals, profile)
    ]
    return ConstantsReport(
        alpha=alpha,
        c_v2=v2.value,
        c_v2_err=v2.error,
        c_v3=v3.value,
        c_v3_err=v3.error,
        z_grid=z_grid,
        seed=seed,
        methods={
            "c_v2": "nested-quadrature",
            "c_v3": f"trapezoid-mc(nodes={n_nodes}, samples={n_samples})",
            "phi2_normalization": phi2_normalization,
            "z_max": z_max,
        },
    )
