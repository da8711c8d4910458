"""Local-time estimation for the difference field over the unit square.

The difference field w_diff = W2 - W1 is observed on an m x m grid of cell
centers of C, jointly sampled with the Poisson points so that the statistics
and the local-time estimate come from the same realization.  The primary
estimator is the Gaussian-mollifier Riemann sum

    L_hat(level) = (1/m^2) sum_x (2 pi eps)^{-1/2} exp(-(w_diff(x)-level)^2 / (2 eps)),

whose bandwidth defaults to eps = h^alpha with h = 1/m: the smallest scale
the grid resolves, since one-cell increments of the difference field have
standard deviation ~ sqrt(2) sigma h^{alpha/2}.  A count-based occupation
histogram provides the independent cross-estimator, and an oscillatory
Fourier form is available as an optional coarse check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingGrid
from .field import ROLE_GRID, SampledScene


@dataclass(frozen=True)
class LocalTimeEstimate:
    value: float
    epsilon: float
    grid_m: int
    level: float = 0.0

    def __post_init__(self):
        if self.grid_m < 8:
            raise ValueError(f"grid_m must be >= 8, got {self.grid_m}")
        if not (self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.value < 0:
            raise ValueError("mollifier estimates are nonnegative by construction")


def grid_points(m: int) -> np.ndarray:
    """Cell centers of the m x m partition of C = (-1/2, 1/2]^2 (origin-free
    for even m, which keeps the covariance matrix away from its singular row)."""
    centers = -0.5 + (np.arange(m) + 0.5) / m
    gx, gy = np.meshgrid(centers, centers, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def default_epsilon(m: int, alpha: float) -> float:
    """Bandwidth rule eps = (1/m)^alpha."""
    return (1.0 / m) ** alpha


def _grid_diff(scene: SampledScene, grid_m: int) -> np.ndarray:
    idx = scene.pts.indices_for_role(ROLE_GRID)
    if len(idx) == 0:
        raise MissingGrid("scene has no grid-tagged points")
    if len(idx) != grid_m * grid_m:
        raise MissingGrid(
            f"scene has {len(idx)} grid points, expected {grid_m * grid_m}"
        )
    return scene.w_diff[idx]


def estimate_local_time(
    scene: SampledScene, grid_m: int, epsilon: float, level: float = 0.0
) -> LocalTimeEstimate:
    """Mollifier estimate of the local time of w_diff at the given level."""
    diff = _grid_diff(scene, grid_m)
    kernel = np.exp(-((diff - level) ** 2) / (2.0 * epsilon)) / np.sqrt(
        2.0 * np.pi * epsilon
    )
    value = float(kernel.mean())
    return LocalTimeEstimate(value=value, epsilon=epsilon, grid_m=grid_m, level=level)


def occupation_histogram(
    scene: SampledScene, grid_m: int, bin_width: float
) -> tuple[np.ndarray, np.ndarray]:
    """Count-based occupation masses on bins centered at k * bin_width.

    Returns (bin_centers, masses) with masses summing to 1 exactly;
    mass / bin_width estimates the local time averaged over the bin.
    """
    if not (bin_width > 0):
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    diff = _grid_diff(scene, grid_m)
    k = np.floor(diff / bin_width + 0.5).astype(np.int64)
    uniq, counts = np.unique(k, return_counts=True)
    centers = uniq * bin_width
    masses = counts / len(diff)
    return centers, masses


def zero_bin_rate(scene: SampledScene, grid_m: int, bin_width: float) -> float:
    """Occupation mass of the bin containing 0, divided by the bin width."""
    centers, masses = occupation_histogram(scene, grid_m, bin_width)
    at_zero = np.isclose(centers, 0.0)
    mass = float(masses[at_zero].sum()) if np.any(at_zero) else 0.0
    return mass / bin_width


def fourier_local_time(
    scene: SampledScene,
    grid_m: int,
    level: float = 0.0,
    xi_max: float = 40.0,
    n_xi: int = 4001,
) -> float:
    """Oscillatory-integral estimate (coarse cross-check only).

    (1/2pi) int_{-M}^{M} mean_x cos(xi (w_diff(x) - level)) dxi, truncated at
    M = xi_max.  Converges slowly in M and is not used in production runs.
    """
    diff = _grid_diff(scene, grid_m)
    xi = np.linspace(-xi_max, xi_max, n_xi)
    vals = np.cos(xi[:, None] * (diff[None, :] - level)).mean(axis=1)
    return float(np.trapezoid(vals, xi) / (2.0 * np.pi))


def write_histogram_csv(path, centers: np.ndarray, masses: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("level,mass\n")
        for lvl, mass in zip(centers, masses):
            fh.write(f"{lvl:.12g},{mass:.12g}\n")
