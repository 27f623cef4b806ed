"""Seeded consistency sweeps: simulate, fit, certify and score against the truth."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .metrics import hellinger, hellinger_vs_exp_truth, l1_distance, pointwise_error
from .smu import SmuDensity, TruthModel, sample
from .solver import fit

__all__ = ["SweepRecord", "SlopeFit", "derive_seed", "run_one", "run_sweep", "median_hellinger", "log_log_slope", "SWEEP_HEADER"]

SWEEP_HEADER = ("n", "rep", "hellinger", "l1", "ptwise_err", "iters", "cert_gap", "certified", "wall_ms")


def derive_seed(seed: int, n_index: int, rep: int) -> np.random.SeedSequence:
    """Seed for one replication, a pure function of (seed, n index, rep).

    Replication r of the i-th sample size always sees the same stream, so
    adding replications or running them in any order leaves earlier rows
    unchanged.
    """
    return np.random.SeedSequence([int(seed), int(n_index), int(rep)])


@dataclass(frozen=True)
class SweepRecord:
    n: int
    rep: int
    hellinger: float
    l1: float | None
    ptwise_err: float | None
    iters: int
    cert_gap: float
    certified: bool
    wall_ms: float

    def row(self) -> tuple:
        return tuple(getattr(self, k) for k in SWEEP_HEADER)


def _score(est, truth: TruthModel, probes):
    dens = est.density
    if truth.kind == "exp":
        h, l1 = hellinger_vs_exp_truth(dens), None
    else:
        ref = SmuDensity(truth.mixing)
        h, l1 = hellinger(dens, ref), l1_distance(dens, ref)
    pe = pointwise_error(dens, truth, probes) if probes is not None else None
    return h, l1, pe


def run_one(truth: TruthModel, n: int, n_index: int, rep: int, seed: int, tol: float = 1e-8,
            max_iter: int = 100_000, probes=None) -> SweepRecord:
    t0 = time.perf_counter()
    data = sample(truth, n, derive_seed(seed, n_index, rep))
    est = fit(data, tol=tol, max_iter=max_iter)
    cert = est.certificate
    gap = max(cert.max_ineq_gap, cert.worst_atom_gap, cert.offgrid_max_gap)
    h, l1, pe = _score(est, truth, probes)
    wall = 1000.0 * (time.perf_counter() - t0)
    return SweepRecord(n, rep, h, l1, pe, est.iterations, gap, est.certified, wall)


def run_sweep(truth: TruthModel, ns: Sequence[int], reps: int, seed: int, tol: float = 1e-8,
              max_iter: int = 100_000, probes=None) -> list[SweepRecord]:
    """One record per (n, replication), sorted by n then replication."""
    ns = [int(n) for n in ns]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n list must be non-empty and strictly increasing")
    if reps < 1:
        raise ValueError("replications must be >= 1")
    return [
        run_one(truth, n, i, r, seed, tol, max_iter, probes)
        for i, n in enumerate(ns)
        for r in range(reps)
    ]


def median_hellinger(records: Sequence[SweepRecord]) -> dict[int, float]:
    """Median Hellinger distance per n over certified rows."""
    by_n: dict[int, list[float]] = {}
    for rec in records:
        by_n.setdefault(rec.n, [])
        if rec.certified:
            by_n[rec.n].append(rec.hellinger)
    return {n: (float(np.median(v)) if v else math.nan) for n, v in sorted(by_n.items())}


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    medians: dict


def log_log_slope(records: Sequence[SweepRecord]) -> SlopeFit:
    """Least-squares slope of log median Hellinger against log n."""
    med = median_hellinger(records)
    pts = [(math.log(n), math.log(v)) for n, v in med.items() if v > 0 and not math.isnan(v)]
    if len(pts) < 2:
        return SlopeFit(math.nan, math.nan, math.nan, med)
    x, y = np.array(pts).T
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    if len(pts) > 2:
        resid = y - intercept - slope * x
        se = math.sqrt(float(resid @ resid) / (len(pts) - 2) / sxx)
    else:
        se = math.nan
    return SlopeFit(slope, se, intercept, med)
