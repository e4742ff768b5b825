import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topodeeponet.errors import OutOfDomainError, RejectedInputError, SpaceMismatchError
from topodeeponet.spaces import (
    CompactFamily,
    DualFunctional,
    Grid,
    MeasurementSpace,
    SpaceElement,
    UniformRandom,
    coordinate_family,
    element_distance,
    element_from_function,
    element_of,
    evaluate_element,
    functional_from_density,
    hermite_family,
    hermite_functions,
    pair,
    sample_family,
    trig_family,
)

ALL_SPACES = [
    MeasurementSpace.matrix(3, 2),
    MeasurementSpace.sequence_lp(7, p=1.5),
    MeasurementSpace.sequence_c0(6),
    MeasurementSpace.l2_interval(12, -1.0, 2.0),
    MeasurementSpace.schwartz_hermite(9),
]


def test_pair_matrix_trace():
    sp = MeasurementSpace.matrix(2, 2)
    f = DualFunctional(sp, np.eye(2).ravel())
    u = SpaceElement(sp, np.array([[3.0, 0.0], [0.0, 4.0]]).ravel())
    assert pair(f, u) == 7.0


def test_pair_l2_constant():
    sp = MeasurementSpace.l2_interval(17)
    f = functional_from_density(sp, lambda x: np.ones_like(x))
    u = element_from_function(sp, lambda x: np.ones_like(x))
    assert abs(pair(f, u) - 1.0) <= 1e-14


def test_pair_sequence_lp():
    sp = MeasurementSpace.sequence_lp(4)
    f = DualFunctional(sp, [1.0, 0.5, 0.25, 0.125])
    u = SpaceElement(sp, np.ones(4))
    assert pair(f, u) == math.fsum([1.0, 0.5, 0.25, 0.125]) == 1.875


def test_pair_space_mismatch():
    f = DualFunctional(MeasurementSpace.sequence_lp(3), np.ones(3))
    u = SpaceElement(MeasurementSpace.sequence_c0(3), np.ones(3))
    with pytest.raises(SpaceMismatchError):
        pair(f, u)


@pytest.mark.parametrize("sp", ALL_SPACES, ids=lambda s: s.kind.value)
def test_pair_linearity(sp, rng):
    for _ in range(100):
        f = DualFunctional(sp, rng.standard_normal(sp.dim))
        u = SpaceElement(sp, rng.standard_normal(sp.dim))
        v = SpaceElement(sp, rng.standard_normal(sp.dim))
        a, b = rng.standard_normal(2)
        lhs = pair(f, a * u + b * v)
        rhs = a * pair(f, u) + b * pair(f, v)
        scale = np.abs(f.effective).sum() * max(np.abs(u.coeffs).max(), np.abs(v.coeffs).max())
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(a) + abs(b)) * scale


def test_gauss_exactness_under_doubling():
    # g*u has degree 2 + 3 = 5 <= 2Q - 1 for Q = 3
    g = lambda x: 1 + x - 2 * x ** 2  # noqa: E731
    p = lambda x: x ** 3 - 0.5 * x  # noqa: E731
    vals = []
    for q in (3, 6, 12):
        sp = MeasurementSpace.l2_interval(q)
        vals.append(pair(functional_from_density(sp, g), element_from_function(sp, p)))
    exact = 1 / 4 - 0.5 / 2 + 1 / 5 - 0.5 / 3 - 2 / 6 + 1 / 4
    assert all(abs(v - vals[0]) <= 1e-13 for v in vals)
    assert abs(vals[0] - exact) <= 1e-13


def test_hermite_orthonormality():
    sp = MeasurementSpace.schwartz_hermite(8)
    gram = np.empty((8, 8))
    for i in range(8):
        u = element_from_function(sp, lambda x, i=i: hermite_functions(i + 1, x)[i])
        for j in range(8):
            f = functional_from_density(sp, lambda x, j=j: hermite_functions(j + 1, x)[j])
            gram[i, j] = pair(f, u)
    assert np.max(np.abs(gram - np.eye(8))) <= 1e-10


def test_quadrature_invariants():
    for sp in (MeasurementSpace.l2_interval(20, -2, 3), MeasurementSpace.schwartz_hermite(10)):
        x, w = sp.quadrature
        assert np.all(w > 0)
        assert np.all(np.diff(x) > 0)


def test_rejects_bad_dimensions():
    with pytest.raises(RejectedInputError):
        MeasurementSpace.matrix(0, 2)
    with pytest.raises(RejectedInputError):
        MeasurementSpace.l2_interval(4, 1.0, 1.0)
    with pytest.raises(RejectedInputError):
        SpaceElement(MeasurementSpace.sequence_lp(3), np.ones(4))


def test_element_of_examples():
    sp = MeasurementSpace.l2_interval(16)
    fam = trig_family(sp, [("sin", 1), ("cos", 1)], (-2.0, 2.0))
    assert np.all(element_of(fam, [0.0, 0.0]).coeffs == 0.0)
    x = sp.quadrature[0]
    u = element_of(fam, [1.0, 1.0])
    assert np.max(np.abs(u.coeffs - (np.sin(2 * np.pi * x) + np.cos(2 * np.pi * x)))) <= 1e-14
    single = CompactFamily(sp, fam.basis[:1], [0.0], [3.0])
    assert np.array_equal(element_of(single, [2.0]).coeffs, 2.0 * fam.basis[0])


def test_element_of_out_of_box():
    fam = coordinate_family(MeasurementSpace.sequence_lp(3), [0, 1], (0.0, 1.0))
    with pytest.raises(OutOfDomainError):
        element_of(fam, [0.5, 1.5])


def test_element_of_affine():
    fam = coordinate_family(MeasurementSpace.matrix(2, 2), [0, 1, 3], (-1.0, 1.0))
    c1, c2 = np.array([0.25, -0.5, 0.125]), np.array([0.5, 0.25, -0.75])
    s = element_of(fam, c1) + element_of(fam, c2)
    assert np.array_equal(s.coeffs, element_of(fam, c1 + c2).coeffs)


def test_sample_family_grid_and_random():
    fam1 = coordinate_family(MeasurementSpace.sequence_lp(2), [0], (0.0, 1.0))
    cs = [c[0] for c, _ in sample_family(fam1, Grid(3))]
    assert cs == [0.0, 0.5, 1.0]
    fam2 = coordinate_family(MeasurementSpace.sequence_lp(2), [0, 1], (-1.0, 2.0))
    corners = {tuple(c) for c, _ in sample_family(fam2, Grid(2))}
    assert corners == {(-1.0, -1.0), (-1.0, 2.0), (2.0, -1.0), (2.0, 2.0)}
    a = sample_family(fam2, UniformRandom(5, seed=7))
    b = sample_family(fam2, UniformRandom(5, seed=7))
    assert all(np.array_equal(x[0], y[0]) and np.array_equal(x[1].coeffs, y[1].coeffs) for x, y in zip(a, b))


def test_element_distance_examples():
    sp = MeasurementSpace.matrix(2, 2)
    eye, zero = SpaceElement(sp, np.eye(2).ravel()), SpaceElement(sp, np.zeros(4))
    assert element_distance(sp, eye, eye) == 0.0
    assert element_distance(sp, eye, zero) == math.sqrt(2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from(["euclidean", "sup", "l2"]))
def test_element_distance_triangle(seed, metric):
    sp = MeasurementSpace.l2_interval(9)
    r = np.random.default_rng(seed)
    u, v, w = (SpaceElement(sp, r.standard_normal(9)) for _ in range(3))
    d = lambda a, b: element_distance(sp, a, b, metric)  # noqa: E731
    assert d(u, w) <= d(u, v) + d(v, w) + 1e-12


def test_functional_range_is_exact():
    sp = MeasurementSpace.l2_interval(16)
    fam = trig_family(sp, [("sin", 1), ("cos", 2), ("mono", 1)], (-1.0, 0.5))
    f = functional_from_density(sp, lambda x: np.cos(3 * x) - x)
    lo, hi = fam.functional_range(f)
    vals = [pair(f, u) for _, u in sample_family(fam, Grid(2))]
    assert abs(lo - min(vals)) <= 1e-12 and abs(hi - max(vals)) <= 1e-12


def test_evaluate_element_interpolates():
    sp = MeasurementSpace.l2_interval(10, -1.0, 1.0)
    u = element_from_function(sp, lambda x: x ** 5 - x)
    x = np.linspace(-1, 1, 7)
    assert np.max(np.abs(evaluate_element(u, x) - (x ** 5 - x))) <= 1e-12


def test_describe_round_trip():
    for sp in ALL_SPACES:
        assert MeasurementSpace.from_description(sp.describe()) == sp


def test_hermite_family_rejects_wrong_space():
    with pytest.raises(RejectedInputError):
        hermite_family(MeasurementSpace.l2_interval(4), [0, 1])
