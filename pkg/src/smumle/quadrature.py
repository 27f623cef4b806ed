"""Tensor-product midpoint quadrature with dyadic refinement.

The box is split per axis at caller-supplied breakpoints (kinks of the
integrand); each piece is cut into 2^level equal cells and the integrand is
sampled at cell midpoints. Successive levels are combined by Romberg
extrapolation, which is valid because the composite midpoint error expands in
even powers of the cell width on every smooth piece.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = ["QuadResult", "tensor_midpoint", "midpoint_nodes"]

_EVAL_CHUNK = 1 << 20


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    nodes: int
    level: int
    converged: bool


def midpoint_nodes(breaks: np.ndarray, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoints and widths of 2^level equal cells on each piece of ``breaks``."""
    k = 1 << level
    lo, hi = breaks[:-1], breaks[1:]
    w = (hi - lo) / k
    t = (np.arange(k) + 0.5) / k
    nodes = (lo[:, None] + (hi - lo)[:, None] * t[None, :]).ravel()
    widths = np.repeat(w, k)
    return nodes, widths


def _tensor_sum(fun, axes_nodes, axes_widths) -> float:
    d = len(axes_nodes)
    sizes = [a.size for a in axes_nodes]
    # stream over the first axis so memory stays bounded
    rest = math.prod(sizes[1:])
    step = max(1, _EVAL_CHUNK // max(1, rest))
    if d > 1:
        mesh = np.meshgrid(*axes_nodes[1:], indexing="ij")
        rest_pts = np.stack([m.ravel() for m in mesh], axis=1)
        rest_w = axes_widths[1]
        for w in axes_widths[2:]:
            rest_w = np.multiply.outer(rest_w, w)
        rest_w = np.ravel(rest_w)
    total = 0.0
    for s in range(0, sizes[0], step):
        x0 = axes_nodes[0][s : s + step]
        w0 = axes_widths[0][s : s + step]
        if d == 1:
            pts = x0[:, None]
            wts = w0
        else:
            pts = np.concatenate(
                [np.repeat(x0, rest)[:, None], np.tile(rest_pts, (x0.size, 1))], axis=1
            )
            wts = np.multiply.outer(w0, rest_w).ravel()
        total += float(np.dot(np.asarray(fun(pts), dtype=float), wts))
    return total


def tensor_midpoint(
    fun: Callable[[np.ndarray], np.ndarray],
    breaks: Sequence[Sequence[float]],
    rtol: float = 1e-8,
    atol: float = 0.0,
    max_nodes: int = 1 << 24,
    min_level: int = 1,
) -> QuadResult:
    """Integrate ``fun`` over the box spanned by per-axis ``breaks``.

    ``fun`` maps an (m, d) array of points to m values. Refinement stops when
    successive Romberg diagonal entries differ by less than
    ``max(rtol * |value|, atol)`` or the next level would exceed
    ``max_nodes`` evaluations.
    """
    br = [np.unique(np.asarray(b, dtype=float)) for b in breaks]
    pieces = [b.size - 1 for b in br]
    if any(p < 1 for p in pieces):
        raise ValueError("each axis needs at least two distinct breakpoints")
    table: list[list[float]] = []
    best = None
    level = 0
    nodes = 0
    while True:
        count = math.prod(p << level for p in pieces)
        if count > max_nodes and table:
            break
        nn, ww = zip(*(midpoint_nodes(b, level) for b in br))
        row = [_tensor_sum(fun, nn, ww)]
        nodes = count
        for k in range(1, level + 1):
            prev = table[level - 1][k - 1]
            row.append(row[k - 1] + (row[k - 1] - prev) / (4**k - 1))
        table.append(row)
        if level >= max(min_level, 1):
            cur, old = row[-1], table[-2][-1]
            err = abs(cur - old)
            best = QuadResult(cur, err, nodes, level, err <= max(rtol * abs(cur), atol))
            if best.converged:
                return best
        level += 1
    if best is None:
        v = table[-1][-1]
        best = QuadResult(v, math.inf, nodes, level, False)
    return best
