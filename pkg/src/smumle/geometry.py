"""Axis-aligned rectangle calculus on the open positive orthant.

Points are plain tuples of positive floats. Rectangles carry a closure
flavor that only matters for membership tests; volumes are computed from
the signed vertex sum and ignore it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "Point",
    "Rect",
    "SignedVertex",
    "Grid",
    "as_point",
    "vertex_signs",
    "g_volume",
    "make_grid",
    "grid_join",
    "volume",
    "as_dataset",
]

Point = tuple[float, ...]

CLOSURES = ("closed", "lower-closed-upper-open", "lower-open-upper-closed", "open")


def as_point(coords: Sequence[float]) -> Point:
    """Validate and freeze a coordinate sequence."""
    p = tuple(float(c) for c in coords)
    if len(p) == 0:
        raise ValueError("point must have at least one coordinate")
    for c in p:
        if not math.isfinite(c) or c <= 0.0:
            raise ValueError(f"coordinates must be finite and > 0, got {p}")
    return p


def volume(x: Sequence[float]) -> float:
    """|x| = product of the coordinates."""
    return math.prod(x)


@dataclass(frozen=True)
class Rect:
    lower: Point
    upper: Point
    closure: str = "lower-closed-upper-open"

    def __post_init__(self):
        lo = tuple(float(c) for c in self.lower)
        hi = tuple(float(c) for c in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper corners must share a dimension >= 1")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"lower {lo} must be <= upper {hi} coordinatewise")
        if self.closure not in CLOSURES:
            raise ValueError(f"closure must be one of {CLOSURES}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def __contains__(self, x: Sequence[float]) -> bool:
        lo_closed = self.closure in ("closed", "lower-closed-upper-open")
        hi_closed = self.closure in ("closed", "lower-open-upper-closed")
        for xi, a, b in zip(x, self.lower, self.upper):
            if xi < a or (xi == a and not lo_closed):
                return False
            if xi > b or (xi == b and not hi_closed):
                return False
        return True


@dataclass(frozen=True)
class SignedVertex:
    sign: int
    vertex: Point


def vertex_signs(r: Rect) -> list[SignedVertex]:
    """All 2^d vertices of ``r`` with their parity signs.

    A vertex taking the lower coordinate in k positions has sign (-1)^k.
    Enumeration order is binary with the first coordinate varying slowest.
    """
    out = []
    for pick in itertools.product((0, 1), repeat=r.dim):
        v = tuple(r.upper[i] if p else r.lower[i] for i, p in enumerate(pick))
        n_lower = r.dim - sum(pick)
        out.append(SignedVertex(-1 if n_lower % 2 else 1, v))
    return out


def g_volume(g: Callable[[Point], float], r: Rect) -> float:
    """Signed vertex sum of ``g`` over ``r``.

    In one dimension this is g(upper) - g(lower).
    """
    total = 0.0
    for sv in vertex_signs(r):
        try:
            val = float(g(sv.vertex))
        except Exception as exc:
            raise ValueError(f"g failed at vertex {sv.vertex}: {exc}") from exc
        if not math.isfinite(val):
            raise ValueError(f"g is not finite at vertex {sv.vertex}")
        total += sv.sign * val
    return total


@dataclass(frozen=True)
class Grid:
    """Rectangular grid spanned by the per-coordinate values of a dataset."""

    coords: tuple[np.ndarray, ...]
    _index: tuple[dict, ...] = field(default=(), repr=False, compare=False)
    _vol: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        cs = tuple(np.asarray(c, dtype=float) for c in self.coords)
        for c in cs:
            if c.ndim != 1 or c.size == 0:
                raise ValueError("each grid axis needs at least one coordinate")
            if np.any(np.diff(c) <= 0):
                raise ValueError("grid axes must be strictly increasing")
            c.setflags(write=False)
        object.__setattr__(self, "coords", cs)
        object.__setattr__(self, "_index", tuple({v: k for k, v in enumerate(c.tolist())} for c in cs))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.size for c in self.coords)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[Point]:
        for p in itertools.product(*(c.tolist() for c in self.coords)):
            yield p

    def __contains__(self, x: Sequence[float]) -> bool:
        return len(x) == self.dim and all(float(v) in ix for v, ix in zip(x, self._index))

    def points(self) -> np.ndarray:
        """All grid points as an (N, d) array in lexicographic order."""
        mesh = np.meshgrid(*self.coords, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def locate(self, x: Sequence[float]) -> tuple[int, ...]:
        """Index tuple of a grid point; KeyError if ``x`` is not on the grid."""
        return tuple(ix[float(v)] for v, ix in zip(x, self._index))

    def locate_many(self, xs: np.ndarray) -> np.ndarray:
        """Index array (n, d) for rows of ``xs`` that lie exactly on the grid."""
        xs = np.asarray(xs, dtype=float)
        idx = np.empty(xs.shape, dtype=np.intp)
        for j, c in enumerate(self.coords):
            k = np.searchsorted(c, xs[:, j])
            k = np.minimum(k, c.size - 1)
            if np.any(c[k] != xs[:, j]):
                raise KeyError(f"values on axis {j} are not grid coordinates")
            idx[:, j] = k
        return idx

    def volumes(self) -> np.ndarray:
        """|x| at every grid point, shaped like the grid (cached, read-only)."""
        if not self._vol:
            out = np.ones(self.shape)
            for j, c in enumerate(self.coords):
                shp = [1] * self.dim
                shp[j] = c.size
                out = out * c.reshape(shp)
            out.setflags(write=False)
            self._vol.append(out)
        return self._vol[0]


def as_dataset(data) -> np.ndarray:
    """Coerce points to a float (n, d) array, checking shape and positivity."""
    if isinstance(data, np.ndarray):
        arr = data.astype(float, copy=False)
        if arr.ndim == 1:
            arr = arr[:, None]
    else:
        rows = [tuple(p) for p in data]
        if not rows:
            raise ValueError("data must be non-empty")
        dims = {len(r) for r in rows}
        if len(dims) != 1:
            raise ValueError(f"mixed dimensions in data: {sorted(dims)}")
        arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("data must be a non-empty (n, d) collection")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("data coordinates must be finite and > 0")
    return arr


def make_grid(data) -> Grid:
    """Grid whose j-th axis is the sorted unique j-th data coordinates."""
    arr = as_dataset(data)
    return Grid(tuple(np.unique(arr[:, j]) for j in range(arr.shape[1])))


def grid_join(points) -> Point:
    """Componentwise maximum of a non-empty set of points."""
    arr = as_dataset(points)
    return tuple(arr.max(axis=0).tolist())
