import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrorder.errors import DomainError, InvalidInputError
from lrorder.geometry import PiecewiseLinearFn, PointSet, gcm, lcm, left_derivative
from oracles import brute_gcm


def diagrams(max_size=30):
    def build(ys, gaps):
        x = np.cumsum(np.asarray(gaps, dtype=float))
        return PointSet(x, np.asarray(ys[: len(x)], dtype=float))

    return st.integers(2, max_size).flatmap(
        lambda n: st.builds(
            build,
            st.lists(st.integers(-20, 20), min_size=n, max_size=n),
            st.lists(st.integers(1, 5), min_size=n, max_size=n),
        )
    )


def test_gcm_of_ordinal_curve_example():
    d = PointSet([0, 0.3, 0.4, 0.9, 1], [0, 0.25, 0.25, 1, 1])
    np.testing.assert_allclose(gcm(d)(d.x), [0, 3 / 16, 1 / 4, 7 / 8, 1], atol=1e-12)


def test_lcm_example():
    d = PointSet([0, 0.3, 0.4, 0.9, 1], [0, 1 / 3, 1 / 2, 5 / 6, 1])
    np.testing.assert_allclose(lcm(d)(d.x), [0, 3 / 8, 1 / 2, 11 / 12, 1], atol=1e-12)


def test_gcm_of_convex_diagram_is_itself():
    d = PointSet([0, 1, 2], [0, 0, 1])
    f = gcm(d)
    np.testing.assert_array_equal(f.vx, d.x)
    np.testing.assert_array_equal(f.vy, d.y)


def test_collinear_points_are_not_vertices():
    f = gcm(PointSet([0, 1, 2, 3], [0, 1, 2, 3]))
    np.testing.assert_array_equal(f.vx, [0, 3])


def test_left_derivative_example():
    f = gcm(PointSet([0, 0.5, 1], [0, 0.25, 1]))
    assert left_derivative(f, 0.4) == pytest.approx(0.5)
    assert left_derivative(f, 0.5) == pytest.approx(0.5)
    assert left_derivative(f, 0.75) == pytest.approx(1.5)
    assert left_derivative(f, 1.0) == pytest.approx(1.5)


def test_left_derivative_of_affine():
    f = PiecewiseLinearFn(np.array([0.0, 2.0, 5.0]), np.array([1.0, 2.0, 3.5]), convex=True)
    np.testing.assert_allclose(left_derivative(f, np.linspace(0.01, 5, 40)), 0.5)


def test_left_derivative_domain():
    f = gcm(PointSet([0, 1], [0, 1]))
    with pytest.raises(DomainError):
        left_derivative(f, 0.0)
    with pytest.raises(DomainError):
        left_derivative(f, 1.5)


def test_evaluation_outside_domain():
    with pytest.raises(DomainError):
        gcm(PointSet([0, 1], [0, 1]))(-0.1)


@pytest.mark.parametrize(
    "x, y",
    [([0.0], [1.0]), ([0, 0], [1, 2]), ([1, 0], [0, 0]), ([0, 1], [0, np.nan])],
)
def test_point_set_validation(x, y):
    with pytest.raises(InvalidInputError):
        PointSet(x, y)


def test_from_pairs():
    d = PointSet.from_pairs([(0, 1), (2, 3)])
    np.testing.assert_array_equal(d.x, [0, 2])


def test_brute_force_oracle_on_many_random_diagrams():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = rng.integers(2, 31)
        x = np.cumsum(rng.uniform(0.1, 1.0, n))
        y = rng.normal(size=n)
        if rng.random() < 0.3:
            y = np.round(y, 1)
        d = PointSet(x, y)
        np.testing.assert_allclose(gcm(d)(x), brute_gcm(x, y), atol=1e-10)
        np.testing.assert_allclose(lcm(d)(x), -brute_gcm(x, -y), atol=1e-10)


def test_fifty_point_diagram():
    rng = np.random.default_rng(5)
    x = np.sort(rng.choice(1000, 50, replace=False)) / 100
    y = rng.normal(size=50)
    d = PointSet(x, y)
    np.testing.assert_allclose(gcm(d)(x), brute_gcm(x, y), atol=1e-10)
    np.testing.assert_allclose(lcm(d)(x), -brute_gcm(x, -y), atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(diagrams())
def test_hull_properties(d):
    g, c = gcm(d), lcm(d)
    assert np.all(g(d.x) <= d.y + 1e-12)
    assert np.all(c(d.x) >= d.y - 1e-12)
    assert np.all(np.diff(g.slopes) >= -1e-12)
    assert np.all(np.diff(c.slopes) <= 1e-12)
    # touches at both ends, vertices come from the diagram
    assert g.vy[0] == d.y[0] and g.vy[-1] == d.y[-1]
    assert set(g.vx) <= set(d.x)
    np.testing.assert_allclose(g(g.vx), g.vy)
    # reflection identity
    np.testing.assert_allclose(c(d.x), -gcm(PointSet(d.x, -d.y))(d.x), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(diagrams())
def test_gcm_idempotent(d):
    g = gcm(d)
    if len(g.vx) < 2:
        return
    again = gcm(PointSet(g.vx, g.vy))
    np.testing.assert_array_equal(again.vx, g.vx)
    np.testing.assert_allclose(again(d.x), g(d.x))


@settings(max_examples=100, deadline=None)
@given(diagrams())
def test_left_derivative_monotone_on_grid(d):
    g = gcm(d)
    grid = np.linspace(d.x[0], d.x[-1], 101)[1:]
    assert np.all(np.diff(left_derivative(g, grid)) >= -1e-12)
