import math

import numpy as np
import pytest

from smumle.smu import MixingMeasure, TruthModel
from smumle.sweep import SweepRecord, derive_seed, log_log_slope, run_sweep


def test_doubling_reps_reproduces_first_half():
    truth = TruthModel.exp_product(1)
    short = run_sweep(truth, [20, 40], 2, seed=9)
    long = run_sweep(truth, [20, 40], 4, seed=9)
    strip = lambda r: r.row()[:-1]  # wall time differs between runs
    assert [strip(r) for r in short] == [strip(r) for r in long if r.rep < 2]


def test_seeds_differ_between_cells():
    a = derive_seed(1, 0, 0).generate_state(2)
    assert not np.array_equal(a, derive_seed(1, 0, 1).generate_state(2))
    assert not np.array_equal(a, derive_seed(1, 1, 0).generate_state(2))
    assert np.array_equal(a, derive_seed(1, 0, 0).generate_state(2))


def test_discrete_truth_rows_have_l1():
    truth = TruthModel.discrete(MixingMeasure([(1.0, 2.0), (2.0, 1.0)], [0.5, 0.5]))
    probes = np.array([[0.5, 0.5]])
    rows = run_sweep(truth, [30], 2, seed=0, probes=probes)
    for r in rows:
        assert r.certified and r.cert_gap <= 1e-8
        assert 0 <= r.hellinger <= 1 and 0 <= r.l1 <= 2
        assert r.hellinger**2 <= r.l1 / 2 + 1e-12
        assert r.ptwise_err >= 0


def test_bad_configs():
    truth = TruthModel.exp_product(1)
    with pytest.raises(ValueError):
        run_sweep(truth, [40, 20], 1, 0)
    with pytest.raises(ValueError):
        run_sweep(truth, [20], 0, 0)


def _rec(n, h, ok=True):
    return SweepRecord(n, 0, h, None, None, 1, 0.0, ok, 0.0)


def test_slope_recovers_power_law():
    recs = [_rec(n, 3.0 * n**-0.4) for n in (50, 100, 200, 400)]
    fit = log_log_slope(recs)
    assert fit.slope == pytest.approx(-0.4, abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-12)


def test_slope_ignores_uncertified_rows():
    recs = [_rec(n, n**-0.5) for n in (50, 100, 200)] + [_rec(100, 10.0, ok=False)]
    assert log_log_slope(recs).slope == pytest.approx(-0.5, abs=1e-12)
    assert math.isnan(log_log_slope([_rec(50, 0.1)]).slope)
