import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smumle.geometry import Grid, Rect, as_point, g_volume, grid_join, make_grid, vertex_signs

from conftest import triangle_density

coords = st.floats(0.01, 100.0, allow_nan=False)


def test_vertex_signs_1d():
    sv = vertex_signs(Rect((1.0,), (4.0,)))
    assert [(v.sign, v.vertex) for v in sv] == [(-1, (1.0,)), (1, (4.0,))]


def test_vertex_signs_unit_square():
    signs = {v.vertex: v.sign for v in vertex_signs(Rect((1e-9, 1e-9), (1.0, 1.0)))}
    assert signs == {(1e-9, 1e-9): 1, (1e-9, 1.0): -1, (1.0, 1e-9): -1, (1.0, 1.0): 1}


@given(st.integers(1, 5), st.data())
def test_vertex_signs_sum_to_zero_and_alternate(d, data):
    lo = [data.draw(coords) for _ in range(d)]
    hi = [a + data.draw(st.floats(0.01, 10.0)) for a in lo]
    sv = vertex_signs(Rect(lo, hi))
    assert len(sv) == 2**d
    assert sum(v.sign for v in sv) == 0
    by_vertex = {v.vertex: v.sign for v in sv}
    for v in sv:
        for i in range(d):
            other = list(v.vertex)
            other[i] = hi[i] if v.vertex[i] == lo[i] else lo[i]
            assert by_vertex[tuple(other)] == -v.sign


def test_degenerate_rect_keeps_all_vertices():
    sv = vertex_signs(Rect((1.0, 2.0), (1.0, 3.0)))
    assert len(sv) == 4
    assert g_volume(lambda p: p[0] * p[1], Rect((1.0, 2.0), (1.0, 3.0))) == 0.0


def test_triangle_volume_is_minus_two():
    r = Rect((1 / 8, 1 / 8), (1 / 2, 3 / 4))
    assert g_volume(triangle_density, r) == -2.0


@given(st.floats(-10, 10), st.integers(1, 4), st.data())
def test_constant_has_zero_volume(c, d, data):
    lo = [data.draw(coords) for _ in range(d)]
    hi = [a + 1.0 for a in lo]
    assert g_volume(lambda p: c, Rect(lo, hi)) == 0.0


def test_one_dimensional_volume_is_difference():
    # the spec example uses [0, 1); zero is allowed as a rectangle corner
    r = Rect((0.0,), (1.0,))
    assert g_volume(lambda p: math.exp(-p[0]), r) == pytest.approx(math.exp(-1) - 1, abs=1e-15)


@given(st.data())
def test_g_volume_additive_over_splits(data):
    lo = [data.draw(coords) for _ in range(2)]
    hi = [a + data.draw(st.floats(0.1, 5.0)) for a in lo]
    t = data.draw(st.floats(0.05, 0.95))
    mid = lo[0] + t * (hi[0] - lo[0])

    def g(p):
        return math.sin(p[0]) * math.exp(-p[1]) + p[0] ** 2 * p[1]

    whole = g_volume(g, Rect(lo, hi))
    left = g_volume(g, Rect(lo, (mid, hi[1])))
    right = g_volume(g, Rect((mid, lo[1]), hi))
    assert whole == pytest.approx(left + right, abs=1e-9 * (1 + abs(whole)))


def test_g_volume_names_failing_vertex():
    def g(p):
        if p == (2.0, 2.0):
            raise RuntimeError("boom")
        return 0.0

    with pytest.raises(ValueError, match=r"\(2.0, 2.0\)"):
        g_volume(g, Rect((1.0, 1.0), (2.0, 2.0)))
    with pytest.raises(ValueError, match="not finite"):
        g_volume(lambda p: math.inf, Rect((1.0,), (2.0,)))


def test_rect_closure_membership():
    lo, hi = (1.0, 1.0), (2.0, 2.0)
    assert (1.0, 1.0) in Rect(lo, hi, "closed")
    assert (1.0, 1.0) in Rect(lo, hi)
    assert (2.0, 1.5) not in Rect(lo, hi)
    assert (2.0, 1.5) in Rect(lo, hi, "lower-open-upper-closed")
    assert (1.0, 1.5) not in Rect(lo, hi, "open")
    with pytest.raises(ValueError):
        Rect((2.0,), (1.0,))
    with pytest.raises(ValueError):
        Rect((1.0,), (2.0,), "half")


def test_point_validation():
    assert as_point([1, 2]) == (1.0, 2.0)
    for bad in ([], [0.0], [-1.0, 2.0], [math.nan]):
        with pytest.raises(ValueError):
            as_point(bad)


def test_make_grid_example():
    g = make_grid([(1, 3), (3, 2)])
    assert [c.tolist() for c in g.coords] == [[1, 3], [2, 3]]
    assert list(g) == [(1, 2), (1, 3), (3, 2), (3, 3)]
    assert g.size == 4


def test_make_grid_collapses_duplicates():
    g = make_grid([(1, 2), (1, 2)])
    assert list(g) == [(1, 2)] and g.size == 1
    assert list(make_grid([(5,)])) == [(5.0,)]


def test_make_grid_errors():
    with pytest.raises(ValueError):
        make_grid([])
    with pytest.raises(ValueError, match="mixed"):
        make_grid([(1, 2), (1,)])


@given(st.integers(1, 3), st.integers(1, 25), st.integers(0, 2**31))
def test_grid_invariants(d, n, seed):
    x = np.random.default_rng(seed).integers(1, 8, size=(n, d)).astype(float)
    g = make_grid(x)
    assert g.size == math.prod(len(c) for c in g.coords) <= n**d
    for c in g.coords:
        assert np.all(np.diff(c) > 0)
    pts = g.points()
    assert pts.shape == (g.size, d)
    assert [tuple(p) for p in pts] == sorted(tuple(p) for p in pts)
    idx = g.locate_many(x)
    assert np.array_equal(pts[np.ravel_multi_index(tuple(idx.T), g.shape)], x)
    assert np.allclose(g.volumes().ravel(), np.prod(pts, axis=1))
    assert grid_join(x) in g


def test_locate_rejects_off_grid():
    g = Grid((np.array([1.0, 2.0]),))
    assert g.locate((2.0,)) == (1,)
    with pytest.raises(KeyError):
        g.locate((1.5,))


def test_grid_join_examples():
    assert grid_join([(1, 3), (3, 2)]) == (3, 3)
    assert grid_join([(1, 3)]) == (1, 3)
    assert grid_join([(1, 1), (1, 2), (2, 1)]) == (2, 2)
    with pytest.raises(ValueError):
        grid_join([])
