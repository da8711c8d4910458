"""Normalized-increment statistics of the maximum field and their exact
decompositions into single-field parts plus a field-switching correction.

For an edge (x1, x2) with d = ||x2 - x1|| the normalized increment of a field
W is U = (W(x2) - W(x1)) / (sigma d^{alpha/2}); the normalization is the
standard deviation of a *single* field increment, deliberately also used for
the maximum field.  The edge statistic is

    V2 = (1/sqrt|E|) sum over edges of (U^2 - 1),

and the triangle statistic V3 sums, over lexicographically anchored triangles,
the Mahalanobis form of the increment pair (U12, U13) minus its expectation 2,
with the pair correlation

    R = (d12^a + d13^a - d23^a) / (2 (d12 d13)^{a/2}).

Writing w = (W2 - W1)(x1) / (sigma d^{alpha/2}), the maximum field's summand
splits exactly into the field-1 summand when w < 0, the field-2 summand when
w >= 0, and a correction supported on the edges where the argmax switches
between the endpoints:

    Psi_f(x, y, w) = (f(y+w) - f(x)) 1[x - y <= w < 0]
                   + (f(x-w) - f(y)) 1[0 <= w <= x - y].

Exactly one indicator can fire; w = 0 (a measure-zero float coincidence) is
assigned to the second branch so the decomposition stays an identity, and such
edges are counted.  The triangle correction Omega combines the per-edge Psi
terms of both edges of a triangle in the same way (see omega()).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    DegenerateTriangle,
    EmptySelection,
    IdentityViolation,
    NumericalGuard,
)
from .field import SampledScene
from .geom import OrderedSelection

#: Relative residual allowed between a statistic and the sum of its parts.
IDENTITY_RTOL = 1e-9

#: Triangles with |R| >= 1 - DEGENERACY_TOL are dropped (and counted).
DEGENERACY_TOL = 1e-10

FIELD_TAGS = ("W1", "W2", "WMAX")


def h2(u):
    """Degree-2 Hermite polynomial, u^2 - 1."""
    u = np.asarray(u, dtype=float)
    out = u * u - 1.0
    return out if out.ndim else float(out)


def _psi_h2(x, y, w):
    x, y, w = np.broadcast_arrays(
        np.asarray(x, float), np.asarray(y, float), np.asarray(w, float)
    )
    out = np.zeros(x.shape)
    lo = (x - y <= w) & (w < 0.0)
    hi = (0.0 <= w) & (w <= x - y)
    out[lo] = (y[lo] + w[lo]) ** 2 - x[lo] ** 2
    out[hi] = (x[hi] - w[hi]) ** 2 - y[hi] ** 2
    return out


def _psi_i(x, y, w):
    x, y, w = np.broadcast_arrays(
        np.asarray(x, float), np.asarray(y, float), np.asarray(w, float)
    )
    out = np.zeros(x.shape)
    lo = (x - y <= w) & (w < 0.0)
    hi = (0.0 <= w) & (w <= x - y)
    out[lo] = y[lo] + w[lo] - x[lo]
    out[hi] = x[hi] - w[hi] - y[hi]
    return out


_PSI = {"H2": _psi_h2, "I": _psi_i}


def psi(f: str, x, y, w):
    """Switching correction Psi_f(x, y, w) for f in {"H2", "I"}.

    Vanishes outside w in [min(0, x - y), max(0, x - y)]; exactly one branch
    fires, with w = 0 assigned to the [0, x - y] branch.
    """
    try:
        fn = _PSI[f]
    except KeyError:
        raise ValueError(f"unknown functional tag {f!r}; expected one of {list(_PSI)}")
    out = fn(x, y, w)
    return out if out.ndim else float(out)


def corr_r(d12: float, d13: float, d23: float, alpha: float) -> float:
    """Correlation of same-field normalized increments along (x1,x2) and (x1,x3).

    Raises DegenerateTriangle when |R| >= 1 - 1e-10, i.e. the three points are
    collinear within tolerance.
    """
    r = corr_r_array(
        np.asarray([d12], float), np.asarray([d13], float), np.asarray([d23], float), alpha
    )[0]
    if abs(r) >= 1.0 - DEGENERACY_TOL:
        raise DegenerateTriangle(
            f"|R| = {abs(r):.12f} >= 1 - {DEGENERACY_TOL:g} for sides "
            f"({d12}, {d13}, {d23})"
        )
    return float(r)


def corr_r_array(d12, d13, d23, alpha: float) -> np.ndarray:
    """Vectorized corr_r without the degeneracy guard (callers mask)."""
    d12 = np.asarray(d12, float)
    d13 = np.asarray(d13, float)
    d23 = np.asarray(d23, float)
    return (d12**alpha + d13**alpha - d23**alpha) / (
        2.0 * (d12 * d13) ** (alpha / 2.0)
    )


def omega(u1, v1, u2, v2, w1, w2, r):
    """Triangle switching correction.

    Arguments are grouped per edge: (u1, v1) are the field-1 and field-2
    increments of the first edge with level w1, (u2, v2, w2) the same for the
    second edge; r is the increment correlation R of the triangle.  w1 and w2
    are the same field difference at the anchor under two normalizations, so
    they share a sign; the w1 >= 0 case takes the second-field branch,
    matching the edge-level convention at w = 0.
    """
    if np.any(np.abs(np.asarray(r, float)) >= 1.0 - DEGENERACY_TOL):
        raise NumericalGuard(f"omega needs |r| < 1 - {DEGENERACY_TOL:g}")
    out = _omega_array(*np.broadcast_arrays(
        np.asarray(u1, float), np.asarray(v1, float), np.asarray(u2, float),
        np.asarray(v2, float), np.asarray(w1, float), np.asarray(w2, float),
        np.asarray(r, float),
    ))
    return out if out.ndim else float(out)


def _omega_array(u1, v1, u2, v2, w1, w2, r):
    c = 1.0 / (1.0 - r * r)
    psi_h_1 = _psi_h2(u1, v1, w1)
    psi_h_2 = _psi_h2(u2, v2, w2)
    psi_i_1 = _psi_i(u1, v1, w1)
    psi_i_2 = _psi_i(u2, v2, w2)
    cross = np.where(w1 < 0.0, u1 * psi_i_2 + u2 * psi_i_1, v1 * psi_i_2 + v2 * psi_i_1)
    return c * (psi_h_1 + psi_h_2) - 2.0 * r * c * (psi_i_1 * psi_i_2 + cross)


def triangle_summand(u12, u13, r):
    """Centered Mahalanobis summand of a triangle, in expanded Hermite form:

        (H2(u12) + H2(u13) - 2 r u12 u13 + 2 r^2) / (1 - r^2),

    algebraically equal to the 2x2 quadratic form of (u12, u13) against the
    inverse correlation matrix minus 2 (see triangle_summand_matrix).
    """
    return (h2(u12) + h2(u13) - 2.0 * r * u12 * u13 + 2.0 * r * r) / (1.0 - r * r)


def triangle_summand_matrix(u12, u13, r):
    """Reference form: (u12, u13) M^{-1} (u12, u13)^T - 2 with M = [[1, r], [r, 1]].

    Kept as the independent evaluation path for the equivalence check with
    triangle_summand; not used in production sums.
    """
    u12 = np.asarray(u12, float)
    u13 = np.asarray(u13, float)
    r = np.asarray(r, float)
    det = 1.0 - r * r
    quad = (u12 * (u12 - r * u13) + u13 * (u13 - r * u12)) / det
    out = quad - 2.0
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Edge and triangle statistics over a sampled scene
# ---------------------------------------------------------------------------


def _field_values(scene: SampledScene, which: str) -> np.ndarray:
    if which == "W1":
        return scene.w1
    if which == "W2":
        return scene.w2
    if which == "WMAX":
        return scene.w_max
    raise ValueError(f"unknown field tag {which!r}; expected one of {FIELD_TAGS}")


def _edge_scale(scene: SampledScene, sel: OrderedSelection):
    if len(sel.e_n) == 0:
        raise EmptySelection("no edges selected")
    pts = scene.pts.points
    i, j = sel.e_n[:, 0], sel.e_n[:, 1]
    d = np.linalg.norm(pts[j] - pts[i], axis=1)
    scale = scene.params.sigma * d ** (scene.params.alpha / 2.0)
    return i, j, scale


def v2_statistic(scene: SampledScene, sel: OrderedSelection, which: str = "WMAX") -> float:
    """(1/sqrt|E|) sum of (U^2 - 1) over the anchored edges, for one field."""
    i, j, scale = _edge_scale(scene, sel)
    w = _field_values(scene, which)
    u = (w[j] - w[i]) / scale
    return float(np.sum(h2(u)) / np.sqrt(len(u)))


def v2_decomposition(scene: SampledScene, sel: OrderedSelection):
    """Split of the maximum-field V2 into (field-1 part, field-2 part, switching part).

    The parts sum over edges with negative / nonnegative anchor difference;
    the third term sums Psi_H2.  Their total reproduces v2_statistic(WMAX)
    exactly up to round-off.
    """
    i, j, scale = _edge_scale(scene, sel)
    u1 = (scene.w1[j] - scene.w1[i]) / scale
    u2 = (scene.w2[j] - scene.w2[i]) / scale
    w = scene.w_diff[i] / scale
    root = np.sqrt(len(u1))
    neg = w < 0.0
    v1 = float(np.sum(h2(u1[neg])) / root)
    v2 = float(np.sum(h2(u2[~neg])) / root)
    v21 = float(np.sum(_psi_h2(u1, u2, w)) / root)
    return v1, v2, v21


def count_ties_at_zero(scene: SampledScene, sel: OrderedSelection) -> int:
    """Edges whose anchor difference is exactly 0.0 (assigned to the >0 branch)."""
    i = sel.e_n[:, 0]
    return int(np.sum(scene.w_diff[i] == 0.0))


def _triangle_terms(scene: SampledScene, sel: OrderedSelection):
    if len(sel.dt_n) == 0:
        raise EmptySelection("no triangles selected")
    pts = scene.pts.points
    a = scene.params.alpha
    i, j, k = sel.dt_n[:, 0], sel.dt_n[:, 1], sel.dt_n[:, 2]
    d12 = np.linalg.norm(pts[j] - pts[i], axis=1)
    d13 = np.linalg.norm(pts[k] - pts[i], axis=1)
    d23 = np.linalg.norm(pts[k] - pts[j], axis=1)
    r = corr_r_array(d12, d13, d23, a)
    keep = np.abs(r) < 1.0 - DEGENERACY_TOL
    if not np.any(keep):
        raise EmptySelection("all triangles degenerate")
    s12 = scene.params.sigma * d12 ** (a / 2.0)
    s13 = scene.params.sigma * d13 ** (a / 2.0)
    return i, j, k, s12, s13, r, keep


def v3_statistic(scene: SampledScene, sel: OrderedSelection, which: str = "WMAX") -> float:
    """(1/sqrt|DT|) sum of the centered Mahalanobis summand over retained triangles."""
    i, j, k, s12, s13, r, keep = _triangle_terms(scene, sel)
    w = _field_values(scene, which)
    u12 = (w[j] - w[i]) / s12
    u13 = (w[k] - w[i]) / s13
    vals = triangle_summand(u12[keep], u13[keep], r[keep])
    return float(np.sum(vals) / np.sqrt(keep.sum()))


def v3_decomposition(scene: SampledScene, sel: OrderedSelection):
    """Split of the maximum-field V3 into single-field parts plus the Omega sum."""
    i, j, k, s12, s13, r, keep = _triangle_terms(scene, sel)
    u12_1 = (scene.w1[j] - scene.w1[i]) / s12
    u13_1 = (scene.w1[k] - scene.w1[i]) / s13
    u12_2 = (scene.w2[j] - scene.w2[i]) / s12
    u13_2 = (scene.w2[k] - scene.w2[i]) / s13
    w1 = scene.w_diff[i] / s12
    w2 = scene.w_diff[i] / s13
    root = np.sqrt(keep.sum())
    neg = (w1 < 0.0) & keep
    pos = (w1 >= 0.0) & keep
    v1 = float(np.sum(triangle_summand(u12_1[neg], u13_1[neg], r[neg])) / root)
    v2 = float(np.sum(triangle_summand(u12_2[pos], u13_2[pos], r[pos])) / root)
    om = _omega_array(
        u12_1[keep], u12_2[keep], u13_1[keep], u13_2[keep], w1[keep], w2[keep], r[keep]
    )
    v21 = float(np.sum(om) / root)
    return v1, v2, v21


def count_dropped_triangles(scene: SampledScene, sel: OrderedSelection) -> int:
    if len(sel.dt_n) == 0:
        return 0
    pts = scene.pts.points
    i, j, k = sel.dt_n[:, 0], sel.dt_n[:, 1], sel.dt_n[:, 2]
    d12 = np.linalg.norm(pts[j] - pts[i], axis=1)
    d13 = np.linalg.norm(pts[k] - pts[i], axis=1)
    d23 = np.linalg.norm(pts[k] - pts[j], axis=1)
    r = corr_r_array(d12, d13, d23, scene.params.alpha)
    return int(np.sum(np.abs(r) >= 1.0 - DEGENERACY_TOL))


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


@dataclass
class ScaledStats:
    """Limit-scaled statistics: s2 = (sqrt3/3) n^{-(2-a)/4} V2, s3 with sqrt2/2."""

    s2: float
    s3: float


@dataclass
class IncrementReport:
    """V2/V3 of the maximum field, their three-part decompositions, and counts.

    counts = (#edges, #retained triangles); dropped_triangles counts the
    degenerate triangles excluded from every V3 sum.  The decomposition
    identities hold on every instance to IDENTITY_RTOL.
    """

    v2_max: float
    v3_max: float
    v2_parts: tuple[float, float, float]
    v3_parts: tuple[float, float, float]
    counts: tuple[int, int]
    dropped_triangles: int
    scaled: ScaledStats | None = None
    ties_at_zero: int = dc_field(default=0, compare=False)

    def to_dict(self) -> dict:
        return {
            "v2_max": self.v2_max,
            "v3_max": self.v3_max,
            "v2_parts": list(self.v2_parts),
            "v3_parts": list(self.v3_parts),
            "counts": list(self.counts),
            "dropped_triangles": self.dropped_triangles,
            "scaled": None
            if self.scaled is None
            else {"s2": self.scaled.s2, "s3": self.scaled.s3},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IncrementReport":
        scaled = data.get("scaled")
        return cls(
            v2_max=data["v2_max"],
            v3_max=data["v3_max"],
            v2_parts=tuple(data["v2_parts"]),
            v3_parts=tuple(data["v3_parts"]),
            counts=tuple(data["counts"]),
            dropped_triangles=data["dropped_triangles"],
            scaled=None if scaled is None else ScaledStats(**scaled),
        )


def identity_residual(total: float, parts) -> float:
    """Relative residual |total - sum(parts)|, guarded for near-zero totals."""
    s = float(np.sum(parts))
    denom = max(1.0, abs(total), abs(s))
    return abs(total - s) / denom


def compute_increment_report(
    scene: SampledScene, sel: OrderedSelection, check_identity: bool = True
) -> IncrementReport:
    """Compute both statistics with their decompositions and verify the identities."""
    v2m = v2_statistic(scene, sel, "WMAX")
    v2p = v2_decomposition(scene, sel)
    v3m = v3_statistic(scene, sel, "WMAX")
    v3p = v3_decomposition(scene, sel)
    dropped = count_dropped_triangles(scene, sel)
    report = IncrementReport(
        v2_max=v2m,
        v3_max=v3m,
        v2_parts=v2p,
        v3_parts=v3p,
        counts=(len(sel.e_n), len(sel.dt_n) - dropped),
        dropped_triangles=dropped,
        ties_at_zero=count_ties_at_zero(scene, sel),
    )
    if check_identity:
        r2 = identity_residual(v2m, v2p)
        r3 = identity_residual(v3m, v3p)
        if r2 > IDENTITY_RTOL or r3 > IDENTITY_RTOL:
            raise IdentityViolation(
                f"decomposition residuals (v2: {r2:.3e}, v3: {r3:.3e}) exceed "
                f"{IDENTITY_RTOL:g}"
            )
    return report


def scaled_statistics(report: IncrementReport, n: float, alpha: float) -> ScaledStats:
    """Apply the limit normalization at intensity n and attach it to the report."""
    if not (n > 0):
        raise ValueError(f"intensity must be positive, got {n}")
    factor = n ** (-(2.0 - alpha) / 4.0)
    scaled = ScaledStats(
        s2=float(np.sqrt(3.0) / 3.0 * factor * report.v2_max),
        s3=float(np.sqrt(2.0) / 2.0 * factor * report.v3_max),
    )
    report.scaled = scaled
    return scaled
