import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topodeeponet.constructive import (
    build_separable_approximant,
    build_universal_approximant,
    cover_image,
    discretize_functional,
    error_table,
    expansion_to_deeponet,
    partition_of_unity,
    partition_weights,
    sensor_rule,
)
from topodeeponet.constructive.cover import grid_distance
from topodeeponet.constructive.separable import SeparableExpansion
from topodeeponet.constructive.universal import draw_dictionary, split_outputs
from topodeeponet.deeponet import TrunkNetwork, evaluate, sup_error, tensor_grid
from topodeeponet.errors import CoverError
from topodeeponet.operators import OperatorKind, OperatorOracle, RankOneMatrix
from topodeeponet.spaces import (
    Grid,
    MeasurementSpace,
    SpaceElement,
    UniformRandom,
    coordinate_family,
    element_of,
    evaluate_element,
    functional_from_density,
    hermite_family,
    pair,
    sample_family,
    trig_family,
)
from topodeeponet.toponet import FunctionalLayer, TopoNetwork, forward


# -- universal approximant -----------------------------------------------------


@pytest.fixture(scope="module")
def l2_16():
    return MeasurementSpace.l2_interval(16)


def test_universal_linear_target(l2_16):
    fam = trig_family(l2_16, [("sin", 1)], (-1.0, 1.0))
    ell = draw_dictionary(fam, 16, 0).functionals()[1]
    val = sample_family(fam, UniformRandom(2000, 77))
    fit = build_universal_approximant(lambda u: pair(ell, u), fam, 16, 1e-6, seed=0, n_train=500, validation=val)
    dense = max(abs(pair(ell, u) - forward(fit.network, u)[0]) for _, u in sample_family(fam, Grid(501)))
    assert fit.achieved_error <= 1e-6 and dense <= 1e-6


def test_universal_constant_target(l2_16):
    fam = trig_family(l2_16, [("sin", 1), ("cos", 1)], (-1.0, 1.0))
    fit = build_universal_approximant(lambda u: 3.0, fam, 4, 1e-9, seed=0, n_train=50)
    assert fit.achieved_error <= 1e-9 and fit.tolerance_met


def test_universal_degenerate_box(l2_16):
    fam = trig_family(l2_16, [("sin", 1), ("cos", 1)], (0.3, 0.3))
    f = functional_from_density(l2_16, np.cos)
    fit = build_universal_approximant(lambda u: np.sin(pair(f, u)), fam, 4, 1e-9, seed=0, n_train=20)
    assert fit.tolerance_met


def test_universal_hidden_units_are_ridge_of_dictionary(l2_16):
    fam = trig_family(l2_16, [("sin", 1)], (-1.0, 1.0))
    fit = build_universal_approximant(lambda u: u.coeffs[3] ** 2, fam, 6, 1e-3, seed=2, n_train=300)
    d = fit.dictionary
    rows = fit.network.layer.weights
    # every functional row is a scalar multiple of some dictionary functional
    for row in rows:
        ok = any(np.allclose(np.outer(row, w), np.outer(w, row), atol=1e-12) for w in d.weights)
        assert ok
    assert fit.exp_tolerance <= 1e-3 / (2 * (1 + np.abs(d.alphas).sum())) * (1 + 1e-12)


def test_dictionary_ranges_cover_family(l2_16):
    fam = trig_family(l2_16, [("sin", 1), ("cos", 2)], (-1.0, 0.5))
    d = draw_dictionary(fam, 12, 4)
    vals = np.array([[pair(f, u) for f in d.functionals()] for _, u in sample_family(fam, Grid(5))])
    assert np.all(vals >= d.ranges[:, 0]) and np.all(vals <= d.ranges[:, 1])
    assert np.all(np.abs(d.ranges) <= 2.0 * 1.1 + 1e-12)


def test_split_outputs(rng, l2_16):
    fam = trig_family(l2_16, [("sin", 1)], (-1.0, 1.0))
    fit = build_universal_approximant(lambda u: [u.coeffs[2], 2.0 * u.coeffs[5]], fam, 6, 1e-2, seed=1, n_train=200)
    u = element_of(fam, [0.4])
    for r in range(2):
        sub = split_outputs(fit.network, [r])
        assert abs(forward(sub, u)[0] - forward(fit.network, u)[r]) <= 1e-12


# -- cover and partition of unity ------------------------------------------------


def test_cover_identical_samples():
    h = np.tile(np.linspace(0, 1, 11), (20, 1))
    assert cover_image(h, 0.1).size == 1


def test_cover_two_clusters(rng):
    delta = 0.1
    base = np.sin(np.linspace(0, 3, 25))
    a = base + rng.uniform(-delta / 4, delta / 4, (30, 25))
    b = base + 3 * delta + rng.uniform(-delta / 4, delta / 4, (30, 25))
    cover = cover_image(np.concatenate([a, b])[rng.permutation(60)], delta)
    assert cover.size == 2


def test_cover_large_delta_and_empty(rng):
    h = rng.uniform(-1, 1, (40, 9))
    assert cover_image(h, 10.0).size == 1
    assert cover_image(np.empty((0, 9)), 0.5).size == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.05, 1.0))
def test_cover_properties(seed, delta):
    r = np.random.default_rng(seed)
    h = r.uniform(-1, 1, (60, 7, 2))
    cover = cover_image(h, delta)
    reps = cover.representatives
    for x in h:
        assert grid_distance(x, reps).min() <= delta
    for j in range(cover.size):
        d = grid_distance(reps[j], reps)
        d[j] = np.inf
        assert np.all(d > delta)
    eta = partition_weights(reps, delta, h)
    assert np.all(eta >= 0)
    assert np.max(np.abs(eta.sum(axis=1) - 1.0)) <= 1e-14
    dists = np.stack([grid_distance(x, reps) for x in h])
    assert np.all((eta == 0) == (dists >= 2 * delta))


def test_pou_examples():
    delta = 0.1
    reps = np.array([[0.0, 0.0], [1.0, 1.0], [0.2, 0.2]])
    assert np.array_equal(partition_of_unity(reps, delta, reps[1]), [0.0, 1.0, 0.0])
    eta = partition_of_unity(reps, delta, np.array([0.1, 0.1]))
    assert np.allclose(eta, [0.5, 0.0, 0.5], atol=1e-15)
    with pytest.raises(CoverError):
        partition_of_unity(reps, delta, np.array([0.5, 0.6]))


# -- separable construction ----------------------------------------------------------


class _Zero(OperatorOracle):
    kind = OperatorKind.ANTIDERIVATIVE

    def __init__(self, space):
        self.space = space
        self.domain = (np.zeros(1), np.ones(1))

    def _field(self, u, ys):
        return np.zeros(len(ys))


def test_separable_zero_operator(l2_16):
    fam = trig_family(l2_16, [("sin", 1)], (-1.0, 1.0))
    exp, rep = build_separable_approximant(_Zero(l2_16), fam, 0.1, n_train=50, n_validation=20, dict_size=4)
    assert rep.empirical_sup == 0.0 and rep.cover_size == 1
    u = element_of(fam, [0.7])
    assert all(np.all(forward(n, u) == 0.0) for n in exp.coeff_nets)


@pytest.fixture(scope="module")
def rank_one_build():
    sp = MeasurementSpace.matrix(2, 2)
    fam = coordinate_family(sp, [0], (-0.02, 0.02))
    op = RankOneMatrix(sp, [1.0, 0.0, 0.0, 1.0], [1.0], [2.0])
    exp, rep = build_separable_approximant(op, fam, 0.1, n_train=300, n_validation=100, dict_size=32)
    return op, fam, exp, rep


def test_separable_rank_one(rank_one_build):
    op, fam, exp, rep = rank_one_build
    assert rep.cover_size == 1
    model = expansion_to_deeponet(exp)
    err = sup_error(model, op, fam, sample_family(fam, Grid(51)), tensor_grid([0], [1], 101))
    assert err.sup <= 0.1
    assert rep.audit_ok and rep.empirical_sup <= rep.bound
    assert rep.fit_slack == 0.0 and rep.empirical_sup <= rep.epsilon


def test_expansion_to_deeponet_equivalence(rank_one_build, rng):
    op, fam, exp, rep = rank_one_build
    model = expansion_to_deeponet(exp)
    assert model.latent_dim == exp.n_atoms
    for _ in range(100):
        u = element_of(fam, rng.uniform(-0.02, 0.02, 1))
        y = rng.uniform(0, 1, 1)
        assert np.max(np.abs(evaluate(model, u, y) - exp.value(u, y))) <= 1e-13


def test_expansion_to_deeponet_trivial(l2_16):
    zero = TopoNetwork(FunctionalLayer(l2_16, np.zeros((1, 16)), [0.0]), [[0.0]])
    exp = SeparableExpansion(TrunkNetwork([[1.5]], [0.2]), (zero,), (np.zeros(1), np.ones(1)))
    model = expansion_to_deeponet(exp)
    u = SpaceElement(l2_16, np.ones(16))
    assert model.latent_dim == 1 and evaluate(model, u, [0.3])[0] == 0.0
    one = TopoNetwork(FunctionalLayer(l2_16, np.full((1, 16), 0.1), [0.3]), [[2.0]])
    exp1 = SeparableExpansion(TrunkNetwork([[1.5]], [0.2]), (one,), (np.zeros(1), np.ones(1)))
    assert evaluate(expansion_to_deeponet(exp1), u, [0.3])[0] == exp1.value(u, [0.3])[0]


# -- sensor discretization ------------------------------------------------------------


def test_sensor_constant_density_exact():
    sp = MeasurementSpace.l2_interval(32)
    fam = trig_family(sp, [("mono", 0)], (-2.0, 2.0))
    f = functional_from_density(sp, np.ones_like)
    for k in (1, 2, 5, 32):
        x, xi = sensor_rule(f, k)
        assert abs(xi.sum() - 1.0) <= 1e-14
    assert error_table(f, fam, [1, 2, 4])[0][1] <= 1e-14


def test_sensor_huge_delta_single_sensor():
    sp = MeasurementSpace.l2_interval(32)
    fam = trig_family(sp, [("sin", 1), ("cos", 2)], (-1.0, 1.0))
    d = discretize_functional(functional_from_density(sp, lambda x: x), fam, 100.0)
    assert d.k == 1 and d.tolerance_met


def test_sensor_unreachable_flagged():
    sp = MeasurementSpace.l2_interval(8)
    fam = trig_family(sp, [("sin", 9)], (-1.0, 1.0))
    d = discretize_functional(functional_from_density(sp, lambda x: x), fam, 1e-30)
    assert not d.tolerance_met and d.k <= 8


def test_sensor_hermite_space():
    sp = MeasurementSpace.schwartz_hermite(6)
    fam = hermite_family(sp, [0, 2, 5], (-1.0, 1.0))
    f = functional_from_density(sp, lambda x: np.exp(-x * x / 2) * (1 + x))
    d = discretize_functional(f, fam, 1e-8)
    assert d.tolerance_met and d.sampled_error <= 1.5 * d.certified_error + 1e-15


def test_sensor_certificate_is_box_maximum():
    sp = MeasurementSpace.l2_interval(32)
    fam = trig_family(sp, [("sin", 3), ("cos", 5), ("mono", 4)], (-1.0, 1.0))
    f = functional_from_density(sp, lambda x: np.exp(x))
    x, xi = sensor_rule(f, 4)
    table = error_table(f, fam, [4])
    # the sensor form reads u through its node interpolant, the element's own definition
    corners = [abs(pair(f, u) - sum(w * v for w, v in zip(xi, evaluate_element(u, x))))
               for _, u in sample_family(fam, Grid(2))]
    assert abs(table[0][1] - max(corners)) <= 1e-13
