"""Poisson point process, Delaunay triangulation, ordered edge/triangle selection.

The triangulation itself is delegated to Qhull (scipy.spatial.Delaunay): a
mature, numerically hardened implementation.  Everything this package then
*claims* about the triangulation is re-checked independently: the
empty-circumdisk property is verified with in-circle predicates evaluated in
floating point with a conservative error bound and re-evaluated in exact
rational arithmetic whenever the float result is inconclusive.

The unit square C = (-1/2, 1/2]^2 anchors the ordered selections: an edge
(triangle) contributes when its lexicographically smallest vertex lies in C.
Simulation runs on a padded window so that Delaunay neighborhoods of points
in C are unaffected by the missing exterior process.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.spatial

from .errors import DegenerateInput, EmptyWindow
from .field import PointSet, ROLE_POISSON

# In-circle decisions with |det| below this crude bound, relative to the
# determinant magnitude scale, fall back to exact rational arithmetic.
_INCIRCLE_EPS = 1e-12


@dataclass(frozen=True)
class WindowSpec:
    """Poisson intensity N and the margin around C used for boundary correctness."""

    intensity: float
    pad: float = 0.1

    def __post_init__(self):
        if not (self.intensity > 0):
            raise ValueError(f"intensity must be positive, got {self.intensity}")
        if self.pad < 0:
            raise ValueError(f"pad must be nonnegative, got {self.pad}")

    @property
    def half_width(self) -> float:
        return 0.5 + self.pad

    @property
    def area(self) -> float:
        return (1.0 + 2.0 * self.pad) ** 2


def default_pad(intensity: float) -> float:
    """Margin max(0.05, 5/sqrt(N)): Delaunay neighborhoods of points in C are
    determined by points within O(1/sqrt(N)) with overwhelming probability."""
    return max(0.05, 5.0 / np.sqrt(intensity))


def sample_poisson(spec: WindowSpec, rng: np.random.Generator) -> PointSet:
    """Homogeneous Poisson draw on the padded window (-1/2-pad, 1/2+pad]^2."""
    count = int(rng.poisson(spec.intensity * spec.area))
    if count == 0:
        raise EmptyWindow(
            f"Poisson draw produced zero points (intensity {spec.intensity})"
        )
    half = spec.half_width
    points = rng.uniform(-half, half, size=(count, 2))
    return PointSet(points, np.full(count, ROLE_POISSON))


@dataclass
class DelaunayComplex:
    """Triangulation with vertex coordinates, unique edges and triangles.

    Edges are exactly the union of triangle sides; triangle rows are sorted
    by vertex index, edge rows are (min, max).  The empty-circumdisk property
    can be audited with check_empty_circumdisk.
    """

    vertices: PointSet
    edges: np.ndarray  # (n_edges, 2) int
    triangles: np.ndarray  # (n_triangles, 3) int


def triangulate(pts: PointSet) -> DelaunayComplex:
    """Delaunay triangulation of the convex hull of pts.

    Cocircular degeneracies (probability zero under the Poisson model) are
    resolved by Qhull's deterministic facet handling: the same input sequence
    always produces the same triangulation.
    """
    points = pts.points
    if len(points) < 3:
        raise DegenerateInput(f"triangulation needs >= 3 points, got {len(points)}")
    try:
        tri = scipy.spatial.Delaunay(points)
    except scipy.spatial.QhullError as exc:
        raise DegenerateInput(f"degenerate input for triangulation: {exc}")
    if tri.simplices.size == 0:
        raise DegenerateInput("input is collinear: no triangles produced")
    triangles = np.sort(tri.simplices, axis=1)
    triangles = triangles[np.lexsort(triangles.T[::-1])]
    sides = np.vstack(
        [triangles[:, [0, 1]], triangles[:, [0, 2]], triangles[:, [1, 2]]]
    )
    edges = np.unique(sides, axis=0)
    return DelaunayComplex(vertices=pts, edges=edges, triangles=triangles)


@dataclass
class OrderedSelection:
    """Edges (x1, x2) and triangles (x1, x2, x3), lexicographically ordered by
    coordinates, whose first vertex lies in C."""

    e_n: np.ndarray  # (k, 2) int, anchor first
    dt_n: np.ndarray  # (j, 3) int, lexicographically sorted


def in_center_cell(points: np.ndarray) -> np.ndarray:
    """Membership in C = (-1/2, 1/2]^2 (half-open on the lower edges)."""
    points = np.atleast_2d(points)
    return (
        (points[:, 0] > -0.5)
        & (points[:, 0] <= 0.5)
        & (points[:, 1] > -0.5)
        & (points[:, 1] <= 0.5)
    )


def _lex_rank(points: np.ndarray) -> np.ndarray:
    """Dense rank of each point under (x, then y) lexicographic order.

    Point coordinates are a.s. distinct, so ranks give the same comparisons
    as tuple comparison on coordinates while staying vectorizable.
    """
    order = np.lexsort((points[:, 1], points[:, 0]))
    rank = np.empty(len(points), dtype=np.int64)
    rank[order] = np.arange(len(points))
    return rank


def select_ordered(complex_: DelaunayComplex) -> OrderedSelection:
    """Extract the anchored edge set and triangle set restricted to C."""
    points = complex_.vertices.points
    rank = _lex_rank(points)
    inside = in_center_cell(points)

    edges = complex_.edges
    swap = rank[edges[:, 0]] > rank[edges[:, 1]]
    e = edges.copy()
    e[swap] = e[swap][:, ::-1]
    e_n = e[inside[e[:, 0]]]

    tri = complex_.triangles
    tri_rank = rank[tri]
    order = np.argsort(tri_rank, axis=1)
    t = np.take_along_axis(tri, order, axis=1)
    dt_n = t[inside[t[:, 0]]]
    return OrderedSelection(e_n=e_n, dt_n=dt_n)


# ---------------------------------------------------------------------------
# Robust predicates and the brute-force verification oracle
# ---------------------------------------------------------------------------


def orientation(a, b, c) -> int:
    """Sign of the signed area of (a, b, c): +1 ccw, -1 cw, 0 collinear.

    Float fast path with an error bound; exact rational fallback otherwise.
    """
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    cx, cy = float(c[0]), float(c[1])
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    bound = 1e-14 * (abs(bx - ax) * abs(cy - ay) + abs(by - ay) * abs(cx - ax))
    if abs(det) > bound:
        return 1 if det > 0 else -1
    det_exact = (Fraction(bx) - Fraction(ax)) * (Fraction(cy) - Fraction(ay)) - (
        Fraction(by) - Fraction(ay)
    ) * (Fraction(cx) - Fraction(ax))
    return (det_exact > 0) - (det_exact < 0)


def incircle(a, b, c, d) -> int:
    """Sign of the in-circle determinant for d against the circle through a, b, c.

    With (a, b, c) counter-clockwise: +1 means strictly inside, -1 strictly
    outside, 0 on the circle.  Inconclusive float evaluations are settled in
    exact rational arithmetic, so cocircular inputs are decided correctly.
    """
    rows = []
    for p in (a, b, c):
        px, py = float(p[0]) - float(d[0]), float(p[1]) - float(d[1])
        rows.append((px, py, px * px + py * py))
    (ax, ay, a2), (bx, by, b2), (cx, cy, c2) = rows
    det = (
        ax * (by * c2 - b2 * cy)
        - ay * (bx * c2 - b2 * cx)
        + a2 * (bx * cy - by * cx)
    )
    scale = (
        abs(ax) * (abs(by) * c2 + b2 * abs(cy))
        + abs(ay) * (abs(bx) * c2 + b2 * abs(cx))
        + a2 * (abs(bx) * abs(cy) + abs(by) * abs(cx))
    )
    if abs(det) > _INCIRCLE_EPS * max(scale, 1e-300):
        return 1 if det > 0 else -1
    frows = []
    for p in (a, b, c):
        px = Fraction(float(p[0])) - Fraction(float(d[0]))
        py = Fraction(float(p[1])) - Fraction(float(d[1]))
        frows.append((px, py, px * px + py * py))
    (ax, ay, a2), (bx, by, b2), (cx, cy, c2) = frows
    det_exact = (
        ax * (by * c2 - b2 * cy)
        - ay * (bx * c2 - b2 * cx)
        + a2 * (bx * cy - by * cx)
    )
    return (det_exact > 0) - (det_exact < 0)


def check_empty_circumdisk(complex_: DelaunayComplex) -> int:
    """Count strict empty-circumdisk violations by brute force.

    Every triangle is tested against every vertex with the robust in-circle
    predicate; points exactly on a circumcircle do not count as violations.
    Quadratic in the input size; intended for n <= a few hundred.
    """
    points = complex_.vertices.points
    violations = 0
    for i, j, k in complex_.triangles:
        a, b, c = points[i], points[j], points[k]
        if orientation(a, b, c) < 0:
            a, b = b, a
        for m in range(len(points)):
            if m in (i, j, k):
                continue
            if incircle(a, b, c, points[m]) > 0:
                violations += 1
    return violations


def brute_force_delaunay(points: np.ndarray) -> np.ndarray:
    """Independent O(n^4) triangulation: all triples with empty circumdisks.

    Only valid for points in general position (no 4 cocircular); used as the
    construction oracle on small random sets.  Returns index triples sorted
    like triangulate() output.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    triangles = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, c = points[i], points[j], points[k]
                o = orientation(a, b, c)
                if o == 0:
                    continue
                if o < 0:
                    a, b = b, a
                empty = True
                for m in range(n):
                    if m in (i, j, k):
                        continue
                    if incircle(a, b, c, points[m]) > 0:
                        empty = False
                        break
                if empty:
                    triangles.append((i, j, k))
    tri = np.array(sorted(triangles), dtype=np.int64).reshape(-1, 3)
    return tri


def dump_complex(complex_: DelaunayComplex, path) -> None:
    """Debug dump: one 'v x y' line per vertex, one 't i j k' line per triangle."""
    with open(path, "w") as fh:
        for x, y in complex_.vertices.points:
            fh.write(f"v {x:.17g} {y:.17g}\n")
        for i, j, k in complex_.triangles:
            fh.write(f"t {i:d} {j:d} {k:d}\n")
