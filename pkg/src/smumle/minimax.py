"""Numerical checks of the local perturbation used for the minimax lower bound.

Around a point x0 the base density f is perturbed on the shrinking box

    I_n = prod_i [x0_i - eps_i, x0_i + eps_i],   eps_i = h_i n^(-1/(3d)),

by g_n(y) = b * int_{u >= y} 1_{I_n}(u) h_n(u) du, where h_n is the signed
quadrant indicator and b the mixed partial derivative of f at x0. The
perturbed density is f_n = (f + theta g_n) / d_n.

Every closed form here is checked against tensor-product quadrature of the
defining integrals instead of being trusted. The constant in the integral of
g_n^2 is reported both in its printed form, (8/3)^d, and as
obtained by integrating the closed form of g_n, (2/3)^d.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .quadrature import QuadResult, tensor_midpoint

__all__ = [
    "PerturbationSpec",
    "AssumptionError",
    "h_step",
    "g_perturb",
    "normalizer",
    "perturbed_density",
    "check_mml1",
    "check_mml2",
    "hellinger_sq",
    "hellinger_limit_sequence",
    "membership_scan",
    "find_n1",
    "lower_bound_constant",
    "risk_bound",
    "optimal_bandwidth_product",
    "optimized_risk_constant",
    "limit_constants",
]


class AssumptionError(ValueError):
    """The sign condition (-1)^d b > 0 on the mixed derivative fails."""


def _exp_mixed_derivative(x0: Sequence[float]) -> float:
    d = len(x0)
    return (-1) ** d * math.exp(-sum(x0))


@dataclass(frozen=True)
class PerturbationSpec:
    """Perturbation of the exp-product density at ``x0``.

    ``b`` defaults to the mixed derivative of prod exp(-x_i) at ``x0``,
    which is (-1)^d exp(-sum x0). ``force_theta`` admits theta outside
    (0, 1) for stress tests.
    """

    x0: tuple[float, ...]
    h: tuple[float, ...]
    theta: float = 0.5
    n: float = 1.0
    b: float | None = None
    force_theta: bool = False

    def __post_init__(self):
        x0 = tuple(float(v) for v in self.x0)
        h = tuple(float(v) for v in self.h)
        if len(x0) != len(h) or not x0:
            raise ValueError("x0 and h must share a dimension >= 1")
        if any(v <= 0 for v in x0 + h):
            raise ValueError("x0 and h must be strictly positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        b = _exp_mixed_derivative(x0) if self.b is None else float(self.b)
        if (-1) ** len(x0) * b <= 0:
            raise AssumptionError(f"(-1)^d b must be > 0, got b={b} in d={len(x0)}")
        if not self.force_theta and not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1); pass force_theta=True to override")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "b", b)

    @property
    def d(self) -> int:
        return len(self.x0)

    @property
    def sb(self) -> float:
        """(-1)^d b, positive by assumption."""
        return (-1) ** self.d * self.b

    @property
    def eps(self) -> np.ndarray:
        return np.asarray(self.h) * self.n ** (-1.0 / (3 * self.d))

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.x0) - self.eps

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.x0) + self.eps

    @property
    def valid(self) -> bool:
        """True once I_n sits inside the open positive orthant (n >= n_0)."""
        return bool(np.all(self.lower > 0))

    def f_x0(self) -> float:
        return math.exp(-sum(self.x0))

    def at(self, n: float) -> "PerturbationSpec":
        return replace(self, n=n)

    def breaks(self) -> list[np.ndarray]:
        """Per-axis kinks of g_n: the two ends of I_n and the center."""
        return [np.array([lo, c, hi]) for lo, c, hi in zip(self.lower, self.x0, self.upper)]


def _pts(u, d: int) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}")
    return arr


def h_step(u, spec: PerturbationSpec) -> np.ndarray:
    """(-1)^d prod_i (1[x0 < u <= x0 + eps] - 1[x0 - eps <= u <= x0])."""
    u = _pts(u, spec.d)
    x0, lo, hi = np.asarray(spec.x0), spec.lower, spec.upper
    up = (u > x0) & (u <= hi)
    down = (u >= lo) & (u <= x0)
    return (-1) ** spec.d * np.prod(up.astype(float) - down.astype(float), axis=1)


def _g_closed(y: np.ndarray, spec: PerturbationSpec) -> np.ndarray:
    tri = np.maximum(0.0, spec.eps[None, :] - np.abs(y - np.asarray(spec.x0)[None, :]))
    return spec.sb * np.prod(tri, axis=1)


def _g_definitional(y: np.ndarray, spec: PerturbationSpec, rtol: float) -> np.ndarray:
    """b * int_{u >= y} 1_{I_n}(u) h_n(u) du by tensor midpoint quadrature.

    For each y the integration box [max(y, lo), hi] is cut at x0 and each
    piece refined dyadically; all points are integrated together and the
    level is raised until every point agrees with the previous level.
    """
    d = spec.d
    x0, lo, hi = np.asarray(spec.x0), spec.lower, spec.upper
    start = np.minimum(np.maximum(y, lo[None, :]), hi[None, :])
    # per-point, per-axis breakpoints [start, mid, hi] with mid clipped into range
    mid = np.clip(x0[None, :], start, hi[None, :])
    # the integrand has modulus |b| on the box, so this bounds the cancellation
    box = abs(spec.b) * np.prod(hi[None, :] - start, axis=1)
    prev = None
    for level in range(0, 8):
        k = 1 << level
        t = (np.arange(k) + 0.5) / k
        axes_nodes, axes_w = [], []
        for j in range(d):
            a, m, b = start[:, j : j + 1], mid[:, j : j + 1], np.full_like(start[:, j : j + 1], hi[j])
            nodes = np.concatenate([a + (m - a) * t, m + (b - m) * t], axis=1)
            w = np.concatenate([np.repeat((m - a) / k, k, axis=1), np.repeat((b - m) / k, k, axis=1)], axis=1)
            axes_nodes.append(nodes)
            axes_w.append(w)
        total = np.zeros(y.shape[0])
        for combo in itertools.product(range(2 * k), repeat=d):
            pts = np.stack([axes_nodes[j][:, c] for j, c in enumerate(combo)], axis=1)
            wt = np.prod([axes_w[j][:, c] for j, c in enumerate(combo)], axis=0)
            total += h_step(pts, spec) * wt
        val = spec.b * total
        if prev is not None and np.all(np.abs(val - prev) <= rtol * np.maximum(np.abs(val), box)):
            return val
        prev = val
    return val


def g_perturb(y, spec: PerturbationSpec, mode: str = "closed", rtol: float = 1e-12) -> np.ndarray:
    """The perturbation g_n at each row of ``y``.

    ``mode="closed"`` uses (-1)^d b prod_i max(0, eps_i - |y_i - x0_i|);
    ``mode="definitional"`` integrates b 1_{I_n} h_n over {u >= y}.
    """
    y = _pts(y, spec.d)
    if mode == "closed":
        return _g_closed(y, spec)
    if mode == "definitional":
        return _g_definitional(y, spec, rtol)
    raise ValueError(f"unknown mode {mode!r}")


def normalizer(spec: PerturbationSpec) -> float:
    """d_n = 1 + (-1)^d theta b prod h_i^2 n^(-2/3)."""
    return 1.0 + spec.theta * spec.sb * math.prod(v * v for v in spec.h) * spec.n ** (-2.0 / 3.0)


def _base(x: np.ndarray) -> np.ndarray:
    return np.exp(-x.sum(axis=1))


def perturbed_density(x, spec: PerturbationSpec) -> np.ndarray:
    """f_n = (f + theta g_n 1_{I_n}) / d_n with f the exp-product density."""
    if not spec.valid:
        raise ValueError(f"n below n_0: I_n leaves the positive orthant at n={spec.n}")
    x = _pts(x, spec.d)
    return (_base(x) + spec.theta * _g_closed(x, spec)) / normalizer(spec)


@dataclass(frozen=True)
class Mml1Check:
    quadrature: float
    formula: float
    rel_error: float
    passed: bool
    quad: QuadResult


def check_mml1(spec: PerturbationSpec, rtol: float = 1e-6, mode: str = "closed") -> Mml1Check:
    """Quadrature of int_{I_n} g_n against (-1)^d b prod h_i^2 n^(-2/3)."""
    q = tensor_midpoint(lambda p: g_perturb(p, spec, mode), spec.breaks(), rtol=1e-10)
    formula = spec.sb * math.prod(v * v for v in spec.h) * spec.n ** (-2.0 / 3.0)
    rel = abs(q.value - formula) / abs(formula)
    return Mml1Check(q.value, formula, rel, rel <= rtol, q)


@dataclass(frozen=True)
class Mml2Check:
    quadrature: float
    printed_value: float
    derived_value: float
    printed_constant: float
    derived_constant: float
    verdict: str
    rel_error_printed: float
    rel_error_derived: float
    quad: QuadResult


def check_mml2(spec: PerturbationSpec, rtol: float = 1e-6, mode: str = "closed") -> Mml2Check:
    """Quadrature of int_{I_n} g_n^2 compared with both candidate constants.

    The verdict is "derived" when the (2/3)^d form matches within ``rtol``,
    "printed" when the printed (8/3)^d form does, otherwise "neither".
    """
    q = tensor_midpoint(lambda p: g_perturb(p, spec, mode) ** 2, spec.breaks(), rtol=1e-12)
    scale = spec.b**2 * math.prod(v**3 for v in spec.h) / spec.n
    pc, dc = (8.0 / 3.0) ** spec.d, (2.0 / 3.0) ** spec.d
    ep = abs(q.value - pc * scale) / (pc * scale)
    ed = abs(q.value - dc * scale) / (dc * scale)
    verdict = "derived" if ed <= rtol else "printed" if ep <= rtol else "neither"
    return Mml2Check(q.value, pc * scale, dc * scale, pc, dc, verdict, ep, ed, q)


def _mass_exp_box(lo: np.ndarray, hi: np.ndarray) -> float:
    return float(np.prod(np.exp(-lo) * -np.expm1(-(hi - lo))))


def hellinger_sq(spec: PerturbationSpec, rtol: float = 1e-9) -> float:
    """h^2(f_n, f) = (1/2) int (sqrt f_n - sqrt f)^2.

    Inside I_n by quadrature; outside f_n = f / d_n so the term is exactly
    (1/2) (1 - 1/sqrt(d_n))^2 times the base mass outside I_n.
    """
    dn = normalizer(spec)

    def inner(p):
        f = _base(p)
        fn = (f + spec.theta * _g_closed(p, spec)) / dn
        diff = fn - f
        return diff * diff / (np.sqrt(fn) + np.sqrt(f)) ** 2

    q = tensor_midpoint(inner, spec.breaks(), rtol=rtol, max_nodes=1 << 22)
    outside = 1.0 - _mass_exp_box(spec.lower, spec.upper)
    return 0.5 * q.value + 0.5 * (1.0 - 1.0 / math.sqrt(dn)) ** 2 * outside


def limit_constants(spec: PerturbationSpec) -> dict[str, float]:
    """Candidate limits of n h^2(f_n, f).

    "printed": 8^(d-1) / (3^d f(x0)) theta^2 b^2 prod h^3 (follows the (8/3)^d
    constant); "derived": (2/3)^d / (8 f(x0)) theta^2 b^2 prod h^3.
    """
    d = spec.d
    core = spec.theta**2 * spec.b**2 * math.prod(v**3 for v in spec.h) / spec.f_x0()
    return {"printed": 8.0 ** (d - 1) / 3.0**d * core, "derived": (2.0 / 3.0) ** d / 8.0 * core}


@dataclass(frozen=True)
class LimitSequence:
    ns: list
    values: list
    apparent_limit: float
    last_rel_change: float
    stabilized: bool
    constants: dict
    verdict: str


def hellinger_limit_sequence(spec: PerturbationSpec, ns: Sequence[float], stable_rtol: float = 0.05) -> LimitSequence:
    """n h^2(f_n, f) along ``ns``; the last value is the apparent limit.

    The verdict names the candidate constant within 5% of the apparent
    limit, or "neither".
    """
    ns = list(ns)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n list must be strictly increasing")
    vals = []
    for n in ns:
        s = spec.at(n)
        if not s.valid:
            raise ValueError(f"n={n} is below n_0 for this spec")
        vals.append(n * hellinger_sq(s))
    last = vals[-1]
    change = abs(vals[-1] - vals[-2]) / abs(vals[-1]) if len(vals) > 1 else math.inf
    consts = limit_constants(spec)
    verdict = "neither"
    for name in ("derived", "printed"):
        if abs(last - consts[name]) <= 0.05 * consts[name]:
            verdict = name
            break
    return LimitSequence(ns, vals, last, change, change < stable_rtol, consts, verdict)


@dataclass(frozen=True)
class MembershipScan:
    accepted: bool
    n: float
    min_difference: float
    witness: tuple | None = None

    def __bool__(self):
        return self.accepted


def _lattice_axis(lo: float, c: float, hi: float, resolution: int, collar: float) -> np.ndarray:
    pad = collar * (hi - lo)
    start = lo - pad if lo - pad > 0 else lo / 2.0
    pts = np.linspace(start, hi + pad, resolution)
    return np.unique(np.concatenate([pts, [lo, c, hi]]))


def membership_scan(spec: PerturbationSpec, resolution: int = 64, collar: float = 0.25, tol: float = 1e-10) -> MembershipScan:
    """Check (-1)^d mixed differences of f_n >= -tol on a lattice.

    The lattice covers I_n plus a collar of ``collar`` times its width on
    each side and always contains the kinks of g_n.
    """
    axes = [_lattice_axis(lo, c, hi, resolution, collar) for lo, c, hi in zip(spec.lower, spec.x0, spec.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = perturbed_density(pts, spec).reshape(mesh[0].shape)
    diff = vals
    for ax in range(spec.d):
        diff = -np.diff(diff, axis=ax)
    k = np.unravel_index(int(np.argmin(diff)), diff.shape)
    m = float(diff[k])
    if m >= -tol:
        return MembershipScan(True, spec.n, m)
    lower = tuple(float(a[i]) for a, i in zip(axes, k))
    upper = tuple(float(a[i + 1]) for a, i in zip(axes, k))
    return MembershipScan(False, spec.n, m, (lower, upper))


def find_n1(spec: PerturbationSpec, n_max: float = 2.0**40, resolution: int = 64) -> int | None:
    """Smallest integer n (by bisection) whose perturbation passes the scan.

    Assumes acceptance is monotone in n; returns None if ``n_max`` fails.
    """
    # n_0: smallest n with eps < x0 on every axis
    n0 = max(1, math.floor(max((hv / xv) ** (3 * spec.d) for hv, xv in zip(spec.h, spec.x0))) + 1)
    if not membership_scan(spec.at(n_max), resolution):
        return None
    if spec.at(n0).valid and membership_scan(spec.at(n0), resolution):
        return n0
    lo, hi = n0, int(n_max)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        s = spec.at(mid)
        if s.valid and membership_scan(s, resolution):
            hi = mid
        else:
            lo = mid
    return hi


def lower_bound_constant(f_at_x0: float, b: float, d: int, theta: float = 1.0) -> float:
    """e^(-1/3) / 2^d * (3^(d-1) theta)^(1/3) * ((-1)^d b f(x0))^(1/3).

    With ``theta=1`` this is the bound exactly as displayed; other values
    give the constant before the theta -> 1 limit.
    """
    if f_at_x0 <= 0:
        raise ValueError("f(x0) must be > 0")
    sb = (-1) ** d * b
    if sb <= 0:
        raise AssumptionError(f"(-1)^d b must be > 0, got b={b} in d={d}")
    return math.exp(-1.0 / 3.0) / 2.0**d * (3.0 ** (d - 1) * theta) ** (1.0 / 3.0) * (sb * f_at_x0) ** (1.0 / 3.0)


def _exponent_constant(f_at_x0: float, d: int, constant: str) -> float:
    # two times the limit of n h^2 per unit theta^2 b^2 c^3
    if constant == "printed":
        return 2.0 ** (3 * d - 2) / (3.0**d * f_at_x0)
    if constant == "derived":
        return 2.0 * (2.0 / 3.0) ** d / (8.0 * f_at_x0)
    raise ValueError(f"unknown constant {constant!r}")


def risk_bound(c: float, theta: float, f_at_x0: float, b: float, d: int, constant: str = "printed") -> float:
    """(1/4) (-1)^d b theta c exp(-K theta^2 b^2 c^3) for bandwidth product c."""
    k = _exponent_constant(f_at_x0, d, constant)
    sb = (-1) ** d * b
    return 0.25 * sb * theta * c * math.exp(-k * theta**2 * b * b * c**3)


def optimal_bandwidth_product(theta: float, f_at_x0: float, b: float, d: int, constant: str = "printed") -> float:
    """The c maximizing ``risk_bound``: (3 K theta^2 b^2)^(-1/3)."""
    k = _exponent_constant(f_at_x0, d, constant)
    return (3.0 * k * theta**2 * b * b) ** (-1.0 / 3.0)


def optimized_risk_constant(f_at_x0: float, b: float, d: int, theta: float = 1.0, constant: str = "printed") -> float:
    """``risk_bound`` evaluated at its maximizing bandwidth product."""
    c = optimal_bandwidth_product(theta, f_at_x0, b, d, constant)
    return risk_bound(c, theta, f_at_x0, b, d, constant)
