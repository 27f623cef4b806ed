"""Maximum likelihood over scale mixtures of uniforms.

The estimator puts its mass on the grid A# spanned by the data coordinates.
Optimality is checked with the gradient

    D(y) = c(y) / |y| - 1,    c(y) = (1/n) sum_i 1[X_i <= y] / f(X_i),

which must be <= 0 on A# and = 0 at every supported atom. ``c`` over the
whole grid is a d-fold cumulative sum, so the check costs O(N) for a grid of
N points and never needs the n x N likelihood matrix.

The optimizer keeps a small active support and alternates a constrained
Newton step (a non-negative least squares fit of the quadratic model, then a
backtracking line search) with vertex-direction additions of argmax D.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import Grid, as_dataset, grid_join, make_grid
from .smu import MixingMeasure, SmuDensity, make_rng

__all__ = [
    "LikelihoodCache",
    "FenchelCertificate",
    "FitResult",
    "UncoveredDataError",
    "build_cache",
    "em_step",
    "loglik",
    "directional_derivative",
    "gradient_on_grid",
    "certify",
    "fit",
    "grenander_1d",
    "MAX_DIM",
]

log = logging.getLogger(__name__)

MAX_DIM = 4
FULL_GRID_LIMIT = 200_000
FULL_CACHE_LIMIT = 4_000_000
_DENSE_SCAN_LIMIT = 1 << 23
_PRUNE = 1e-12
_WARM_LIMIT = 200
_POLISH_TOL = 1e-12


class UncoveredDataError(ValueError):
    """A data point has zero mixture density."""


@dataclass(frozen=True)
class LikelihoodCache:
    """a[i, j] = 1[X_i <= W_j] / |W_j| for data X and candidates W."""

    matrix: np.ndarray
    candidates: np.ndarray
    dropped: int = 0

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _cache_matrix(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    dom = np.all(x[:, None, :] <= w[None, :, :], axis=2)
    return dom / np.prod(w, axis=1)[None, :]


def build_cache(data, candidates) -> LikelihoodCache:
    """Likelihood columns for each candidate; all-zero columns are dropped."""
    x = as_dataset(data)
    w = as_dataset(candidates)
    if w.shape[1] != x.shape[1]:
        raise ValueError("candidates and data dimensions differ")
    a = _cache_matrix(x, w)
    live = a.any(axis=0)
    dropped = int((~live).sum())
    if dropped:
        log.info("dropping %d candidate(s) that dominate no data point", dropped)
    return LikelihoodCache(a[:, live], w[live], dropped)


def loglik(weights, cache: LikelihoodCache) -> float:
    f = cache.matrix @ np.asarray(weights, dtype=float)
    if np.any(f <= 0):
        return -math.inf
    return float(np.sum(np.log(f)))


def em_step(weights, cache: LikelihoodCache) -> np.ndarray:
    """One EM update pi_j <- pi_j * (1/n) sum_i a_ij / f_i."""
    pi = np.asarray(weights, dtype=float)
    f = cache.matrix @ pi
    if np.any(f <= 0):
        raise UncoveredDataError("data point uncovered by the current mixture")
    new = pi * (cache.matrix.T @ (1.0 / f)) / cache.n
    return new / new.sum()


def directional_derivative(candidate, fitted, data) -> float:
    """D(y) = (1/n) sum_i 1[X_i <= y] / (|y| f(X_i)) - 1."""
    x = as_dataset(data)
    y = np.asarray(candidate, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    dom = np.all(x <= y[None, :], axis=1)
    return float(np.sum(1.0 / fitted[dom]) / (x.shape[0] * math.prod(y)) - 1.0)


def _scatter(grid: Grid, idx: np.ndarray, w: np.ndarray) -> np.ndarray:
    acc = np.zeros(grid.shape)
    np.add.at(acc, tuple(idx.T), w)
    return acc


def gradient_on_grid(grid: Grid, data_idx: np.ndarray, inv_fitted: np.ndarray) -> np.ndarray:
    """D at every grid point, shaped like the grid.

    ``data_idx`` holds the grid index of each data point and ``inv_fitted``
    the values 1/f(X_i). Only for grids small enough to hold in memory.
    """
    c = _scatter(grid, data_idx, inv_fitted / data_idx.shape[0])
    for ax in range(grid.dim):
        c = np.cumsum(c, axis=ax)
    return c / grid.volumes() - 1.0


@dataclass(frozen=True)
class _ScanResult:
    max_gap: float
    argmax: tuple[float, ...]


def _pick(d: np.ndarray, vol: np.ndarray) -> tuple[float, tuple[int, ...]]:
    """Max of d; ties go to the smallest volume, then lexicographic order."""
    m = d.max()
    ties = np.flatnonzero(d.ravel() == m)
    if ties.size > 1:
        v = vol.ravel()[ties]
        ties = ties[v == v.min()]
    return float(m), np.unravel_index(int(ties[0]), d.shape)


def _scan_grid(grid: Grid, data_idx: np.ndarray, inv_fitted: np.ndarray) -> _ScanResult:
    """Maximum of D over the grid, streaming along the first axis if large."""
    n = data_idx.shape[0]
    if grid.size <= _DENSE_SCAN_LIMIT or grid.dim == 1:
        d = gradient_on_grid(grid, data_idx, inv_fitted)
        m, k = _pick(d, grid.volumes())
        return _ScanResult(m, tuple(float(c[i]) for c, i in zip(grid.coords, k)))
    rest = Grid(grid.coords[1:])
    rest_vol = rest.volumes()
    plane = np.zeros(rest.shape)
    order = np.argsort(data_idx[:, 0], kind="stable")
    starts = np.searchsorted(data_idx[order, 0], np.arange(grid.shape[0] + 1))
    best = (-math.inf, None, math.inf)
    for k0, x0 in enumerate(grid.coords[0].tolist()):
        sel = order[starts[k0] : starts[k0 + 1]]
        if sel.size:
            np.add.at(plane, tuple(data_idx[sel, 1:].T), inv_fitted[sel] / n)
        c = plane
        for ax in range(rest.dim):
            c = np.cumsum(c, axis=ax)
        vol = rest_vol * x0
        m, k = _pick(c / vol - 1.0, vol)
        v = float(vol[k])
        if m > best[0] or (m == best[0] and v < best[2]):
            best = (m, (x0,) + tuple(float(cc[i]) for cc, i in zip(rest.coords, k)), v)
    return _ScanResult(best[0], best[1])


@dataclass(frozen=True)
class FenchelCertificate:
    """Optimality gaps of a candidate estimator.

    Passes iff ``max_ineq_gap <= tol`` and every atom gap is ``<= tol``;
    the off-grid probe gap is reported alongside and must also be ``<= tol``.
    """

    max_ineq_gap: float
    argmax: tuple[float, ...] | None
    atom_eq_gaps: np.ndarray
    offgrid_max_gap: float
    tol: float
    uncovered: int = 0

    @property
    def worst_atom_gap(self) -> float:
        return float(self.atom_eq_gaps.max()) if self.atom_eq_gaps.size else 0.0

    @property
    def passed(self) -> bool:
        return (
            self.uncovered == 0
            and self.max_ineq_gap <= self.tol
            and self.worst_atom_gap <= self.tol
            and self.offgrid_max_gap <= self.tol
        )

    def __bool__(self):
        return self.passed


def _c_values(points: np.ndarray, x: np.ndarray, inv_fitted: np.ndarray) -> np.ndarray:
    """c(p) = (1/n) sum_i 1[X_i <= p] / f_i at each row of ``points``."""
    out = np.empty(points.shape[0])
    step = max(1, (1 << 22) // max(1, x.size))
    for s in range(0, points.shape[0], step):
        dom = np.all(x[None, :, :] <= points[s : s + step, None, :], axis=2)
        out[s : s + step] = dom @ inv_fitted
    return out / x.shape[0]


def certify(mixing: MixingMeasure, data, tol: float = 1e-8, n_probes: int = 1000, seed: int = 0) -> FenchelCertificate:
    """Fenchel optimality gaps of ``mixing`` for ``data``.

    The inequality is scanned on every point of the data grid: for a fixed
    set of dominated data points |y| is smallest at their join, which is a
    grid point. ``n_probes`` random off-grid points in the data's bounding
    box are checked as well.
    """
    x = as_dataset(data)
    if mixing.dim != x.shape[1]:
        raise ValueError("mixing measure and data dimensions differ")
    fitted = SmuDensity(mixing).pdf(x)
    bad = int(np.sum(fitted <= 0))
    if bad:
        return FenchelCertificate(math.inf, None, np.full(len(mixing), math.inf), math.inf, tol, bad)
    inv = 1.0 / fitted
    grid = make_grid(x)
    scan = _scan_grid(grid, grid.locate_many(x), inv)
    atoms = mixing.atoms
    atom_gaps = np.abs(_c_values(atoms, x, inv) / np.prod(atoms, axis=1) - 1.0)
    off = -math.inf
    if n_probes > 0:
        rng = make_rng(seed)
        probes = (1.0 - rng.random((n_probes, x.shape[1]))) * x.max(axis=0)
        off = float(np.max(_c_values(probes, x, inv) / np.prod(probes, axis=1) - 1.0))
    return FenchelCertificate(scan.max_gap, scan.argmax, atom_gaps, off, tol)


@dataclass(frozen=True)
class FitResult:
    mixing: MixingMeasure
    fitted: np.ndarray
    loglik: float
    iterations: int
    certificate: FenchelCertificate
    policy: str = "grow"
    wall_ms: float = 0.0
    history: list = field(default_factory=list, repr=False)

    @property
    def certified(self) -> bool:
        return self.certificate.passed

    @property
    def density(self) -> SmuDensity:
        return SmuDensity(self.mixing)


def _simplex_lsq(gram: np.ndarray, rhs: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Least squares over columns ``p`` with coefficients summing to one.

    Works on the normal equations: ``gram = M^T M`` and ``rhs = M^T b``.
    """
    cols = np.flatnonzero(p)
    k = cols.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = gram[np.ix_(cols, cols)]
    kkt[:k, k] = kkt[k, :k] = 1.0
    r = np.append(rhs[cols], 1.0)
    try:
        sol = np.linalg.solve(kkt, r)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, r, rcond=None)[0]
    z = np.zeros(gram.shape[0])
    z[cols] = sol[:k]
    return z


def _nnls_simplex(m: np.ndarray, b: np.ndarray, x0: np.ndarray, max_iter: int = 0) -> np.ndarray:
    """min ||m x - b|| over the probability simplex.

    Lawson-Hanson active set on the normal equations with the sum constraint
    carried by a multiplier, warm-started from the feasible point ``x0``.
    """
    k = m.shape[1]
    max_iter = max_iter or 3 * k + 50
    gram = m.T @ m
    rhs = m.T @ b
    x = np.asarray(x0, dtype=float).copy()
    p = x > 0
    if p.sum() > _WARM_LIMIT:
        # start from the best single vertex; dropping hundreds of columns
        # one ratio test at a time costs more than growing the set
        j = int(np.argmax(2.0 * rhs - np.diag(gram)))
        x[:] = 0.0
        x[j] = 1.0
        p = x > 0
    scale = max(1.0, float(np.abs(rhs).max()))
    for _ in range(max_iter):
        while True:
            z = _simplex_lsq(gram, rhs, p)
            if np.all(z[p] > 0):
                x = z
                break
            neg = p & (z <= 0)
            alpha = np.min(x[neg] / (x[neg] - z[neg]))
            x = x + alpha * (z - x)
            p &= x > 1e-15
            x[~p] = 0.0
            x /= x.sum()
        g = rhs - gram @ x
        w = g - g[p].mean()
        w[p] = -np.inf
        j = int(np.argmax(w))
        if w[j] <= 1e-12 * scale:
            break
        p[j] = True
    return x


def _ll(a: np.ndarray, pi: np.ndarray) -> float:
    f = a @ pi
    if np.any(f <= 0):
        return -math.inf
    return float(np.sum(np.log(f)))


def _newton_step(a: np.ndarray, pi: np.ndarray, ll0: float) -> tuple[np.ndarray, float]:
    """One constrained Newton step with Armijo backtracking."""
    f = a @ pi
    s = a / f[:, None]
    p = _nnls_simplex(s, np.full(a.shape[0], 2.0), pi)
    direction = p - pi
    slope = float(s.sum(axis=0) @ direction)
    t = 1.0
    while t > 1e-12:
        cand = pi + t * direction
        cand = np.where(cand > 0, cand, 0.0)
        ll = _ll(a, cand)
        if ll >= ll0 + 0.33 * t * slope and ll >= ll0:
            return cand / cand.sum(), ll
        t *= 0.5
    return pi, ll0


def _unique_rows(rows: np.ndarray) -> np.ndarray:
    _, keep = np.unique(rows, axis=0, return_index=True)
    return rows[np.sort(keep)]


def fit(
    data,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    policy: str = "auto",
    seed: int | None = None,
    em_sweeps: int = 200,
) -> FitResult:
    """Compute the maximum likelihood SMU density for ``data``.

    Parameters
    ----------
    data : array-like of shape (n, d)
        Strictly positive observations.
    tol : float
        Certificate tolerance; the loop stops once the Fenchel gaps are below it.
    max_iter : int
        Cap on outer iterations. Hitting it returns the best iterate with an
        uncertified certificate.
    policy : {"auto", "full", "grow"}
        Initial candidate set. "full" materializes every grid point that
        dominates some datum and runs EM sweeps on it before the active-set
        phase; "grow" starts from the data points plus their join. "auto"
        chooses "full" for small grids.
    seed : int, optional
        If given, initial weights are drawn from a flat Dirichlet instead of
        being uniform.
    """
    t0 = time.perf_counter()
    x = as_dataset(data)
    n, d = x.shape
    if d > MAX_DIM:
        raise ValueError(f"dimension {d} not supported (max {MAX_DIM})")
    grid = make_grid(x)
    data_idx = grid.locate_many(x)
    if policy == "auto":
        small = grid.size <= FULL_GRID_LIMIT and n * grid.size <= FULL_CACHE_LIMIT
        policy = "full" if small else "grow"
    if policy not in ("full", "grow"):
        raise ValueError(f"unknown candidate policy {policy!r}")

    init_w = None
    if policy == "full":
        cache = build_cache(x, grid.points())
        cand = cache.candidates
        pi = _initial_weights(len(cand), seed)
        prev = loglik(pi, cache)
        for _ in range(em_sweeps):
            pi = em_step(pi, cache)
            cur = loglik(pi, cache)
            if abs(cur - prev) <= 1e-10 * abs(cur):
                break
            prev = cur
        keep = pi > 1e-9 * pi.max()
        support = cand[keep]
        init_w = pi[keep]
    else:
        support = _unique_rows(np.vstack([x, np.asarray([grid_join(x)])]))

    support = _unique_rows(np.vstack([support, np.asarray([grid_join(x)])]))
    a = _cache_matrix(x, support)
    if init_w is None:
        pi = _initial_weights(len(support), seed)
    else:
        pi = np.zeros(len(support))
        pi[: init_w.size] = init_w
        pi /= pi.sum()
    ll = _ll(a, pi)
    # polish past the certificate tolerance: small gradient gaps still allow
    # fitted values to differ from the optimum by more than tol
    target = min(tol, _POLISH_TOL)
    history = []
    it = stalled = 0
    for it in range(1, max_iter + 1):
        ll_old = ll
        pi, ll = _newton_step(a, pi, ll)
        if ll <= ll_old:
            # Newton made no progress; fall back to a few EM sweeps
            c = LikelihoodCache(a, support)
            for _ in range(10):
                pi = em_step(pi, c)
            ll = _ll(a, pi)
        live = pi > _PRUNE
        if not live.all():
            support, a, pi = support[live], a[:, live], pi[live]
            pi = pi / pi.sum()
        f = a @ pi
        inv = 1.0 / f
        grad = (a.T @ inv) / n
        atom_gap = float(np.max(np.abs(grad - 1.0)))
        scan = _scan_grid(grid, data_idx, inv)
        history.append((ll, scan.max_gap, atom_gap, len(support)))
        if scan.max_gap <= target and atom_gap <= target:
            break
        if scan.max_gap > target:
            y = np.asarray([scan.argmax])
            if not np.any(np.all(support == y, axis=1)):
                support = np.vstack([support, y])
                a = np.hstack([a, _cache_matrix(x, y)])
                pi = np.append(pi, 0.0)
                continue
        stalled = stalled + 1 if ll <= ll_old else 0
        if stalled >= 5:
            break

    mixing = MixingMeasure(support, pi)
    fitted = SmuDensity(mixing).pdf(x)
    cert = certify(mixing, x, tol)
    if not cert.passed:
        log.warning(
            "fit not certified after %d iterations (ineq gap %.3g, atom gap %.3g)",
            it, cert.max_ineq_gap, cert.worst_atom_gap,
        )
    return FitResult(
        mixing=mixing,
        fitted=fitted,
        loglik=float(np.sum(np.log(fitted))),
        iterations=it,
        certificate=cert,
        policy=policy,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        history=history,
    )


def _initial_weights(m: int, seed: int | None) -> np.ndarray:
    if seed is None:
        return np.full(m, 1.0 / m)
    w = make_rng(seed).dirichlet(np.ones(m))
    w = np.maximum(w, 1e-6)
    return w / w.sum()


def grenander_1d(data) -> np.ndarray:
    """Left derivative of the least concave majorant of the empirical CDF.

    Returns the estimate at each data point, in input order.
    """
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0 or np.any(x <= 0):
        raise ValueError("data must be non-empty and positive")
    n = x.size
    knots, counts = np.unique(x, return_counts=True)
    px = np.concatenate(([0.0], knots))
    py = np.concatenate(([0.0], np.cumsum(counts) / n))
    # upper hull, left to right
    hull = [0]
    for k in range(1, px.size):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            # drop j if it lies on or below the chord i -> k
            if (py[j] - py[i]) * (px[k] - px[i]) <= (py[k] - py[i]) * (px[j] - px[i]):
                hull.pop()
            else:
                break
        hull.append(k)
    hull = np.asarray(hull)
    slopes = np.diff(py[hull]) / np.diff(px[hull])
    seg = np.searchsorted(px[hull], x, side="left") - 1
    return slopes[seg]
