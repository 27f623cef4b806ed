"""Scale mixtures of uniforms: evaluation, inversion, membership, sampling.

A discrete mixing measure with atoms ``y_j`` and weights ``pi_j`` defines

    f(x) = sum_j pi_j * 1[x <= y_j] / |y_j|
    F(x) = sum_j pi_j * |x ^ y_j| / |y_j|

where ``|x|`` is the coordinate product and ``^`` the componentwise min.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Grid, Rect, as_dataset, as_point

__all__ = [
    "MixingMeasure",
    "SmuDensity",
    "GriddedDensity",
    "TruthModel",
    "NotSmuError",
    "eval_density",
    "eval_cdf",
    "weights_from_density",
    "is_smu",
    "MembershipResult",
    "pointwise_bound_check",
    "sample",
    "exp_truth_density",
    "exp_truth_cdf",
    "make_rng",
]

PRUNE_WEIGHT = 1e-12
_CHUNK = 1 << 22


class NotSmuError(ValueError):
    """Raised when values on a grid do not come from an SMU density."""


@dataclass(frozen=True)
class MixingMeasure:
    """Discrete mixing distribution on (0, inf)^d.

    Construction merges atoms with identical coordinates, prunes weights
    below 1e-12 and renormalizes. Atoms are stored in lexicographic order.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = as_dataset(self.atoms)
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size != atoms.shape[0]:
            raise ValueError("one weight per atom required")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        uniq, inv = np.unique(atoms, axis=0, return_inverse=True)
        merged = np.zeros(uniq.shape[0])
        np.add.at(merged, inv.ravel(), w)
        total = merged.sum()
        if total <= 0:
            raise ValueError("weights must have positive mass")
        merged /= total
        keep = merged >= PRUNE_WEIGHT
        uniq, merged = uniq[keep], merged[keep]
        merged = merged / merged.sum()
        uniq.setflags(write=False)
        merged.setflags(write=False)
        object.__setattr__(self, "atoms", uniq)
        object.__setattr__(self, "weights", merged)

    @classmethod
    def point_mass(cls, y: Sequence[float]) -> "MixingMeasure":
        return cls(np.asarray([as_point(y)]), np.ones(1))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self) -> int:
        return self.atoms.shape[0]

    def join(self) -> tuple[float, ...]:
        return tuple(self.atoms.max(axis=0).tolist())

    def heights(self) -> np.ndarray:
        """pi_j / |y_j|, the jump each atom contributes to the density."""
        return self.weights / np.prod(self.atoms, axis=1)


def _points(x, d: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[-1] != d:
        raise ValueError(f"expected points of dimension {d}, got {arr.shape[-1]}")
    return arr


class SmuDensity:
    """The density f_G of a discrete mixing measure G."""

    def __init__(self, mixing: MixingMeasure):
        self.mixing = mixing

    @classmethod
    def from_atoms(cls, atoms, weights) -> "SmuDensity":
        return cls(MixingMeasure(np.asarray(atoms, dtype=float), np.asarray(weights, dtype=float)))

    @property
    def dim(self) -> int:
        return self.mixing.dim

    def __repr__(self):
        return f"SmuDensity(d={self.dim}, atoms={len(self.mixing)})"

    def pdf(self, x) -> np.ndarray:
        """Density at each row of ``x``; upper-semicontinuous version."""
        xs = _points(x, self.dim)
        y = self.mixing.atoms
        h = self.mixing.heights()
        out = np.empty(xs.shape[0])
        step = max(1, _CHUNK // max(1, y.size))
        for s in range(0, xs.shape[0], step):
            blk = xs[s : s + step]
            dom = np.all(blk[:, None, :] <= y[None, :, :], axis=2)
            out[s : s + step] = dom @ h
        return out

    def cdf(self, x) -> np.ndarray:
        xs = _points(x, self.dim)
        y = self.mixing.atoms
        w = self.mixing.weights
        out = np.empty(xs.shape[0])
        step = max(1, _CHUNK // max(1, y.size))
        for s in range(0, xs.shape[0], step):
            blk = xs[s : s + step]
            ratio = np.prod(np.minimum(blk[:, None, :], y[None, :, :]) / y[None, :, :], axis=2)
            out[s : s + step] = ratio @ w
        return out

    def on_grid(self, grid: Grid) -> np.ndarray:
        """Density at every point of ``grid``, shaped like the grid.

        Atoms are snapped to the smallest grid coordinate that dominates them
        per axis (an atom dominates grid point x iff its snapped index does),
        then suffix sums give the density in O(N).
        """
        if grid.dim != self.dim:
            raise ValueError("grid and density dimensions differ")
        acc = np.zeros(grid.shape)
        y = self.mixing.atoms
        idx = np.empty(y.shape, dtype=np.intp)
        inside = np.ones(len(y), dtype=bool)
        for j, c in enumerate(grid.coords):
            # largest grid index k with c[k] <= y_j
            k = np.searchsorted(c, y[:, j], side="right") - 1
            inside &= k >= 0
            idx[:, j] = k
        np.add.at(acc, tuple(idx[inside].T), self.mixing.heights()[inside])
        for ax in range(grid.dim):
            acc = np.flip(np.cumsum(np.flip(acc, axis=ax), axis=ax), axis=ax)
        return acc

    def to_gridded(self, grid: Grid | None = None) -> "GriddedDensity":
        if grid is None:
            grid = Grid(tuple(np.unique(self.mixing.atoms[:, j]) for j in range(self.dim)))
        return GriddedDensity(grid, self.on_grid(grid))


def eval_density(f: SmuDensity, x: Sequence[float]) -> float:
    return float(f.pdf(np.asarray(x, dtype=float))[0])


def eval_cdf(f: SmuDensity, x: Sequence[float]) -> float:
    return float(f.cdf(np.asarray(x, dtype=float))[0])


@dataclass(frozen=True)
class GriddedDensity:
    """Density constant on the cells (prev, W] below each grid point W.

    ``values`` has the grid's shape; the value stored at W applies to the cell
    whose upper corner is W. The density is zero beyond the last coordinate
    of any axis.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("gridded values must be finite and >= 0")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fun, grid: Grid) -> "GriddedDensity":
        vals = np.asarray([float(fun(p)) for p in grid]).reshape(grid.shape)
        return cls(grid, vals)

    @property
    def support_bound(self) -> tuple[float, ...]:
        return tuple(float(c[-1]) for c in self.grid.coords)

    def cell_volumes(self) -> np.ndarray:
        out = np.ones(self.grid.shape)
        for j, c in enumerate(self.grid.coords):
            w = np.diff(np.concatenate(([0.0], c)))
            shp = [1] * self.grid.dim
            shp[j] = c.size
            out = out * w.reshape(shp)
        return out

    def integral(self) -> float:
        return float(np.sum(self.cell_volumes() * self.values))

    def pdf(self, x) -> np.ndarray:
        xs = _points(x, self.grid.dim)
        idx = []
        ok = np.all(xs > 0, axis=1)
        for j, c in enumerate(self.grid.coords):
            k = np.searchsorted(c, xs[:, j], side="left")
            ok &= k < c.size
            idx.append(np.minimum(k, c.size - 1))
        out = self.values[tuple(idx)]
        return np.where(ok, out, 0.0)

    def signed_differences(self) -> np.ndarray:
        """(-1)^d V_f[W, W+) for every grid point W, zero extension beyond."""
        a = np.pad(self.values, [(0, 1)] * self.grid.dim)
        for ax in range(self.grid.dim):
            a = -np.diff(a, axis=ax)
        return a


def _upper_neighbor(grid: Grid, idx: tuple[int, ...]) -> tuple[float, ...]:
    out = []
    for c, k in zip(grid.coords, idx):
        out.append(float(c[k + 1]) if k + 1 < c.size else 2.0 * float(c[-1]))
    return tuple(out)


def weights_from_density(values, grid: Grid, atol: float = 1e-9) -> MixingMeasure:
    """Invert gridded density values to the mixing measure.

    pi_W = (-1)^d V_f[W, W+) * |W| with W+ the next grid point up in every
    coordinate and f extended by zero beyond the grid.
    """
    gd = values if isinstance(values, GriddedDensity) else GriddedDensity(grid, values)
    pi = gd.signed_differences() * gd.grid.volumes()
    if pi.min() < -atol:
        k = np.unravel_index(int(np.argmin(pi)), pi.shape)
        raise NotSmuError(
            f"not an SMU density on this grid: weight {pi[k]:.3g} at {tuple(float(c[i]) for c, i in zip(gd.grid.coords, k))}"
        )
    total = float(pi.sum())
    if abs(total - 1.0) > atol:
        raise NotSmuError(f"not an SMU density on this grid: weights sum to {total:.12g}")
    pts = gd.grid.points()
    flat = pi.ravel()
    keep = flat > PRUNE_WEIGHT
    return MixingMeasure(pts[keep], flat[keep])


@dataclass(frozen=True)
class MembershipResult:
    accepted: bool
    witness: Rect | None = None
    min_value: float = 0.0

    def __bool__(self):
        return self.accepted


def is_smu(f: GriddedDensity, tol: float = 1e-12) -> MembershipResult:
    """Check (-1)^d V_f >= -tol on all adjacent-cell rectangles of the grid."""
    diffs = f.signed_differences()
    k = np.unravel_index(int(np.argmin(diffs)), diffs.shape)
    m = float(diffs[k])
    if m >= -tol:
        return MembershipResult(True, None, m)
    lower = tuple(float(c[i]) for c, i in zip(f.grid.coords, k))
    return MembershipResult(False, Rect(lower, _upper_neighbor(f.grid, k)), m)


def pointwise_bound_check(f: SmuDensity, probes) -> float:
    """max f(x)|x| over the probes; at most 1 for any SMU density."""
    xs = _points(probes, f.dim)
    return float(np.max(f.pdf(xs) * np.prod(xs, axis=1)))


def exp_truth_density(x) -> float | np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return float(np.exp(-arr.sum()))
    return np.exp(-arr.sum(axis=-1))


def exp_truth_cdf(x) -> float | np.ndarray:
    arr = np.asarray(x, dtype=float)
    val = np.prod(-np.expm1(-arr), axis=-1)
    return float(val) if arr.ndim == 1 else val


@dataclass(frozen=True)
class TruthModel:
    """Ground truth for simulation: a discrete G or the exp-product model.

    The exp-product truth f0(x) = prod exp(-x_i) has Gamma(2, 1) mixing
    marginals.
    """

    kind: str
    dim: int
    mixing: MixingMeasure | None = None

    def __post_init__(self):
        if self.kind not in ("discrete", "exp"):
            raise ValueError("truth kind must be 'discrete' or 'exp'")
        if self.kind == "discrete":
            if self.mixing is None:
                raise ValueError("discrete truth needs a mixing measure")
            if self.mixing.dim != self.dim:
                raise ValueError("mixing measure dimension mismatch")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")

    @classmethod
    def exp_product(cls, dim: int) -> "TruthModel":
        return cls("exp", dim)

    @classmethod
    def discrete(cls, mixing: MixingMeasure) -> "TruthModel":
        return cls("discrete", mixing.dim, mixing)

    def pdf(self, x) -> np.ndarray:
        xs = _points(x, self.dim)
        if self.kind == "exp":
            return np.exp(-xs.sum(axis=1))
        return SmuDensity(self.mixing).pdf(xs)

    def describe(self) -> str:
        if self.kind == "exp":
            return f"exp-product d={self.dim}"
        return f"discrete d={self.dim} atoms={len(self.mixing)}"


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


def _exp_draws(rng: np.random.Generator, shape) -> np.ndarray:
    return -np.log1p(-rng.random(shape))


def sample(truth: TruthModel, n: int, seed) -> np.ndarray:
    """Draw n points X = (U_1 Y_1, ..., U_d Y_d) with Y ~ G and U uniform."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    d = truth.dim
    if truth.kind == "exp":
        y = _exp_draws(rng, (n, d)) + _exp_draws(rng, (n, d))
    else:
        cum = np.cumsum(truth.mixing.weights)
        cum[-1] = 1.0
        pick = np.searchsorted(cum, rng.random(n), side="right")
        y = truth.mixing.atoms[np.minimum(pick, len(cum) - 1)]
    u = 1.0 - rng.random((n, d))  # in (0, 1]
    return u * y
