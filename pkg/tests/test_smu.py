import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smumle.geometry import Grid, Rect
from smumle.smu import (
    GriddedDensity,
    MixingMeasure,
    NotSmuError,
    SmuDensity,
    TruthModel,
    eval_cdf,
    eval_density,
    exp_truth_cdf,
    exp_truth_density,
    is_smu,
    pointwise_bound_check,
    sample,
    weights_from_density,
)

from conftest import mixings, random_mixing, triangle_density


def brute_pdf(m: MixingMeasure, x):
    x = np.asarray(x, dtype=float)
    return sum(w * float(np.all(x <= y)) / np.prod(y) for y, w in zip(m.atoms, m.weights))


def brute_cdf(m: MixingMeasure, x):
    x = np.asarray(x, dtype=float)
    return sum(w * np.prod(np.minimum(x, y)) / np.prod(y) for y, w in zip(m.atoms, m.weights))


def test_single_atom_examples():
    f = SmuDensity(MixingMeasure.point_mass((2.0, 4.0)))
    assert eval_density(f, (1.0, 1.0)) == 1 / 8
    assert eval_density(f, (2.0, 4.0)) == 1 / 8
    assert eval_density(f, (2.5, 1.0)) == 0.0
    assert eval_cdf(f, (1.0, 2.0)) == pytest.approx(0.25)
    assert eval_cdf(f, (10.0, 10.0)) == pytest.approx(1.0)


def test_mixing_measure_normalizes_and_merges():
    m = MixingMeasure([(1, 2), (1, 2), (3, 1)], [1.0, 1.0, 2.0])
    assert len(m) == 2
    assert m.weights.sum() == pytest.approx(1.0)
    assert dict(zip(map(tuple, m.atoms.tolist()), m.weights.tolist())) == {(1, 2): 0.5, (3, 1): 0.5}
    assert m.join() == (3, 2)
    with pytest.raises(ValueError):
        MixingMeasure([(1, 2)], [-1.0])
    with pytest.raises(ValueError):
        MixingMeasure([(1, 2)], [1.0, 2.0])


@given(mixings(), st.integers(0, 2**31))
def test_pdf_and_cdf_match_definitions(m, seed):
    f = SmuDensity(m)
    x = np.random.default_rng(seed).uniform(0.05, 6.0, size=(10, m.dim))
    assert np.allclose(f.pdf(x), [brute_pdf(m, p) for p in x], rtol=1e-12, atol=0)
    assert np.allclose(f.cdf(x), [brute_cdf(m, p) for p in x], rtol=1e-12, atol=1e-15)


@given(mixings(), st.integers(0, 2**31))
def test_cdf_monotone_and_bounded(m, seed):
    f = SmuDensity(m)
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, 6.0, size=(20, m.dim))
    bigger = x + rng.uniform(0, 1, size=x.shape)
    assert np.all(f.cdf(bigger) >= f.cdf(x) - 1e-14)
    assert np.all((f.cdf(x) >= 0) & (f.cdf(x) <= 1 + 1e-12))
    assert f.cdf(np.asarray(m.join())) == pytest.approx(1.0, abs=1e-12)


@given(mixings(), st.integers(0, 2**31))
def test_density_block_decreasing_and_bounded(m, seed):
    f = SmuDensity(m)
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, 6.0, size=(20, m.dim))
    bigger = x.copy()
    bigger[:, 0] += rng.uniform(0, 2, size=x.shape[0])
    assert np.all(f.pdf(bigger) <= f.pdf(x))
    assert pointwise_bound_check(f, x) <= 1 + 1e-12


@given(mixings())
def test_on_grid_matches_pdf(m):
    f = SmuDensity(m)
    grid = Grid(tuple(np.unique(np.concatenate([m.atoms[:, j], m.atoms[:, j] * 0.7])) for j in range(m.dim)))
    assert np.allclose(f.on_grid(grid).ravel(), f.pdf(grid.points()), rtol=1e-12, atol=0)


@settings(max_examples=60)
@given(mixings(max_atoms=12))
def test_inversion_round_trip(m):
    f = SmuDensity(m)
    gd = f.to_gridded()
    assert gd.integral() == pytest.approx(1.0, abs=1e-12)
    back = weights_from_density(gd, gd.grid)
    assert np.array_equal(back.atoms, m.atoms)
    assert np.max(np.abs(back.weights - m.weights)) <= 1e-10


def test_inversion_rejects_non_smu():
    grid = Grid((np.array([1 / 8, 1 / 2]), np.array([1 / 8, 3 / 4])))
    gd = GriddedDensity.from_function(triangle_density, grid)
    with pytest.raises(NotSmuError, match="not an SMU density"):
        weights_from_density(gd, grid)


def test_is_smu_rejects_triangle_with_witness():
    grid = Grid((np.array([1 / 8, 1 / 2]), np.array([1 / 8, 3 / 4])))
    res = is_smu(GriddedDensity.from_function(triangle_density, grid))
    assert not res
    assert res.witness == Rect((1 / 8, 1 / 8), (1 / 2, 3 / 4))
    assert res.min_value == -2.0


@given(mixings())
def test_is_smu_accepts_smu(m):
    assert is_smu(SmuDensity(m).to_gridded(), tol=1e-12)


def test_gridded_density_cells():
    grid = Grid((np.array([1.0, 3.0]),))
    gd = GriddedDensity(grid, np.array([0.5, 0.25]))
    assert gd.integral() == pytest.approx(1.0)
    assert gd.pdf([[0.5], [1.0], [2.0], [3.0], [3.5]]).tolist() == [0.5, 0.5, 0.25, 0.25, 0.0]
    with pytest.raises(ValueError):
        GriddedDensity(grid, np.array([1.0]))


def test_exp_truth_closed_forms():
    assert exp_truth_density([1.0, 2.0]) == pytest.approx(math.exp(-3))
    assert exp_truth_cdf([1.0, 2.0]) == pytest.approx((1 - math.exp(-1)) * (1 - math.exp(-2)))
    assert TruthModel.exp_product(2).pdf([[1.0, 2.0]])[0] == pytest.approx(math.exp(-3))


def test_exp_truth_is_gamma_mixture():
    # f0(x) = E[1(x <= Y)/Y] with Y ~ Gamma(2, 1): int_x^inf y e^-y / y dy = e^-x
    y = np.linspace(1e-6, 60, 600_001)
    x = 0.7
    integrand = np.where(y >= x, np.exp(-y), 0.0)
    assert np.trapezoid(integrand, y) == pytest.approx(math.exp(-x), rel=1e-4)


def test_sample_exp_moments():
    x = sample(TruthModel.exp_product(2), 200_000, seed=1)
    assert np.all(x > 0)
    assert x.mean(axis=0) == pytest.approx([1.0, 1.0], abs=0.01)
    assert np.corrcoef(x.T)[0, 1] == pytest.approx(0.0, abs=0.01)


def test_sample_discrete_support_and_determinism():
    truth = TruthModel.discrete(MixingMeasure.point_mass((2.0, 2.0)))
    x = sample(truth, 500, seed=3)
    assert np.all((x > 0) & (x <= 2.0))
    assert np.array_equal(x, sample(truth, 500, seed=3))
    assert not np.array_equal(x, sample(truth, 500, seed=4))


def test_sample_discrete_matches_cdf():
    m = random_mixing(np.random.default_rng(5), 2, 4)
    x = sample(TruthModel.discrete(m), 100_000, seed=9)
    probe = np.array([1.0, 1.5])
    emp = np.mean(np.all(x <= probe, axis=1))
    assert emp == pytest.approx(SmuDensity(m).cdf(probe)[0], abs=0.006)
