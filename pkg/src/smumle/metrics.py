"""Distances between SMU densities.

Two discrete SMU densities are both constant on the cells of the partition
spanned by their atom coordinates, so L1 and Hellinger distances reduce to
finite sums over those cells. Against the exp-product truth the Hellinger
affinity integrates in closed form on every cell.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import Grid
from .smu import SmuDensity, TruthModel, make_rng

__all__ = [
    "CellPartition",
    "CellOverflowError",
    "MAX_CELLS",
    "cell_partition",
    "l1_distance",
    "hellinger",
    "hellinger_vs_exp_truth",
    "mc_distance",
    "distance",
    "pointwise_error",
    "le_cam_chain",
]

MAX_CELLS = 10_000_000


class CellOverflowError(RuntimeError):
    """Exact integration would need too many cells; use mc_distance."""


@dataclass(frozen=True)
class CellPartition:
    """Product partition of (0, bound] with breakpoints ``edges[j]``.

    ``edges[j][0] == 0`` and the cells along axis j are
    (edges[j][k], edges[j][k+1]].
    """

    edges: tuple[np.ndarray, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(e.size - 1 for e in self.edges)

    @property
    def n_cells(self) -> int:
        return math.prod(self.shape)

    @property
    def bound(self) -> tuple[float, ...]:
        return tuple(float(e[-1]) for e in self.edges)

    def upper_corners(self) -> Grid:
        return Grid(tuple(e[1:] for e in self.edges))

    def volumes(self) -> np.ndarray:
        out = np.ones(self.shape)
        for j, e in enumerate(self.edges):
            shp = [1] * len(self.edges)
            shp[j] = e.size - 1
            out = out * np.diff(e).reshape(shp)
        return out


def cell_partition(*densities: SmuDensity, max_cells: int = MAX_CELLS) -> CellPartition:
    """Common partition on which every given density is constant."""
    d = densities[0].dim
    if any(f.dim != d for f in densities):
        raise ValueError("densities must share a dimension")
    edges = []
    for j in range(d):
        pts = np.unique(np.concatenate([f.mixing.atoms[:, j] for f in densities]))
        edges.append(np.concatenate(([0.0], pts)))
    part = CellPartition(tuple(edges))
    if part.n_cells > max_cells:
        raise CellOverflowError(
            f"{part.n_cells} cells exceed the limit of {max_cells}; use mc_distance instead"
        )
    return part


def _cell_values(f: SmuDensity, g: SmuDensity, max_cells: int):
    part = cell_partition(f, g, max_cells=max_cells)
    grid = part.upper_corners()
    return part.volumes(), f.on_grid(grid), g.on_grid(grid)


def l1_distance(f: SmuDensity, g: SmuDensity, max_cells: int = MAX_CELLS) -> float:
    """Exact integral of |f - g|, in [0, 2]."""
    vol, a, b = _cell_values(f, g, max_cells)
    return float(np.sum(vol * np.abs(a - b)))


def hellinger(f: SmuDensity, g: SmuDensity, max_cells: int = MAX_CELLS) -> float:
    """Exact Hellinger distance with h^2 = (1/2) int (sqrt f - sqrt g)^2."""
    vol, a, b = _cell_values(f, g, max_cells)
    h2 = 0.5 * float(np.sum(vol * (np.sqrt(a) - np.sqrt(b)) ** 2))
    return math.sqrt(min(max(h2, 0.0), 1.0))


def _sqrt_exp_cell_integrals(edges: np.ndarray) -> np.ndarray:
    # int_a^b exp(-x/2) dx = 2 exp(-a/2) (1 - exp(-(b - a)/2))
    a, b = edges[:-1], edges[1:]
    return -2.0 * np.exp(-a / 2.0) * np.expm1(-(b - a) / 2.0)


def hellinger_vs_exp_truth(f: SmuDensity) -> float:
    """Hellinger distance from ``f`` to the exp-product density of its dimension.

    h^2 = 1 - sum over cells of sqrt(f_cell) * int_cell sqrt(f0); the region
    outside the atoms' join contributes nothing to the affinity.
    """
    part = cell_partition(f)
    vals = np.sqrt(f.on_grid(part.upper_corners()))
    aff = vals
    for j, e in enumerate(part.edges):
        shp = [1] * f.dim
        shp[j] = e.size - 1
        aff = aff * _sqrt_exp_cell_integrals(e).reshape(shp)
    h2 = 1.0 - float(np.sum(aff))
    return math.sqrt(min(max(h2, 0.0), 1.0))


def _khintchine(f: SmuDensity, n: int, rng: np.random.Generator) -> np.ndarray:
    w = f.mixing.weights
    cum = np.cumsum(w)
    cum[-1] = 1.0
    pick = np.minimum(np.searchsorted(cum, rng.random(n), side="right"), w.size - 1)
    return (1.0 - rng.random((n, f.dim))) * f.mixing.atoms[pick]


def mc_distance(f: SmuDensity, g: SmuDensity, metric: str = "l1", n_mc: int = 100_000, seed: int = 0):
    """Importance-sampled distance with draws from (f + g) / 2.

    Returns ``(estimate, standard_error)``. The L1 estimate is unbiased; the
    Hellinger estimate is the square root of an unbiased h^2 estimate with a
    delta-method standard error.
    """
    if n_mc < 1000:
        raise ValueError("n_mc must be at least 1000")
    if f.dim != g.dim:
        raise ValueError("densities must share a dimension")
    rng = make_rng(seed)
    from_f = rng.random(n_mc) < 0.5
    k = int(from_f.sum())
    xs = np.empty((n_mc, f.dim))
    xs[from_f] = _khintchine(f, k, rng)
    xs[~from_f] = _khintchine(g, n_mc - k, rng)
    a, b = f.pdf(xs), g.pdf(xs)
    m = 0.5 * (a + b)
    if metric == "l1":
        z = np.abs(a - b) / m
        return float(z.mean()), float(z.std(ddof=1) / math.sqrt(n_mc))
    if metric == "hellinger":
        z = 0.5 * (np.sqrt(a) - np.sqrt(b)) ** 2 / m
        h2, se2 = float(z.mean()), float(z.std(ddof=1) / math.sqrt(n_mc))
        h = math.sqrt(max(h2, 0.0))
        return h, (se2 / (2.0 * h) if h > 0 else se2)
    raise ValueError(f"unknown metric {metric!r}")


def distance(f: SmuDensity, g: SmuDensity, metric: str = "l1", n_mc: int = 100_000, seed: int = 0,
             max_cells: int = MAX_CELLS):
    """Exact distance when the partition fits, else Monte Carlo with a warning.

    Returns ``(value, standard_error)``; the error is 0 on the exact path.
    """
    exact = {"l1": l1_distance, "hellinger": hellinger}[metric]
    try:
        return exact(f, g, max_cells), 0.0
    except CellOverflowError as exc:
        warnings.warn(f"{exc}; falling back to Monte Carlo", RuntimeWarning, stacklevel=2)
        return mc_distance(f, g, metric, n_mc, seed)


def pointwise_error(f: SmuDensity, truth: TruthModel, probes) -> float:
    """max |f(x) - f0(x)| over the probe points."""
    xs = np.atleast_2d(np.asarray(probes, dtype=float))
    return float(np.max(np.abs(f.pdf(xs) - truth.pdf(xs))))


def le_cam_chain(h: float, l1: float, slack: float = 1e-12) -> bool:
    """h^2 <= L1/2 <= h sqrt(2 - h^2)."""
    tv = 0.5 * l1
    return h * h <= tv + slack and tv <= h * math.sqrt(max(2.0 - h * h, 0.0)) + slack
