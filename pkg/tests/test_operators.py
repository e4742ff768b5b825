import math

import numpy as np
import pytest

from topodeeponet.errors import OutOfDomainError, SpaceMismatchError
from topodeeponet.operators import (
    Antiderivative,
    GaussianConvolution,
    NonlinearComposition,
    OperatorKind,
    OperatorOracle,
    PowerSeries,
    RankOneMatrix,
    apply,
    lipschitz_probe,
    softplus,
)
from topodeeponet.spaces import (
    MeasurementSpace,
    SpaceElement,
    UniformRandom,
    coordinate_family,
    element_of,
    hermite_family,
    hermite_functions,
    sample_family,
    trig_family,
)


@pytest.fixture(scope="module")
def wide_family():
    sp = MeasurementSpace.l2_interval(32)
    return trig_family(sp, [("cos", 1), ("sin", 1), ("sin", 2), ("mono", 2)], (-1.0, 1.0))


def test_antiderivative_zero_and_closed_form(wide_family):
    op = Antiderivative(wide_family)
    zero = element_of(wide_family, np.zeros(4))
    assert np.all(op.field(zero, np.linspace(0, 1, 9)) == 0.0)
    u = element_of(wide_family, [1.0, 0.0, 0.0, 0.0])
    assert abs(apply(op, u, 0.25)[0] - 1 / (2 * math.pi)) <= 1e-12
    assert abs(apply(op, u, 0.25)[0] - 0.15915494) <= 1e-8


def test_antiderivative_linearity(wide_family, rng):
    op = Antiderivative(wide_family)
    ys = np.linspace(0, 1, 17)
    for _ in range(20):
        c1, c2 = rng.uniform(-0.5, 0.5, (2, 4))
        a, b = rng.uniform(-1, 1, 2)
        u, v = element_of(wide_family, c1), element_of(wide_family, c2)
        lhs = op.field(a * u + b * v, ys)
        rhs = a * op.field(u, ys) + b * op.field(v, ys)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_antiderivative_fundamental_theorem(wide_family, rng):
    op = Antiderivative(wide_family)
    h = 1e-4
    y = np.linspace(0.05, 0.95, 19)
    for _ in range(5):
        c = rng.uniform(-1, 1, 4)
        u = element_of(wide_family, c)
        fd = (op.field(u, y + h) - op.field(u, y - h))[:, 0] / (2 * h)
        exact = sum(ci * g.value(y) for ci, g in zip(c, wide_family.generators))
        assert np.max(np.abs(fd - exact)) <= 1e-6


def test_antiderivative_domain(wide_family):
    op = Antiderivative(wide_family)
    with pytest.raises(OutOfDomainError):
        apply(op, element_of(wide_family, np.zeros(4)), 1.5)
    with pytest.raises(SpaceMismatchError):
        apply(op, SpaceElement(MeasurementSpace.l2_interval(8), np.zeros(8)), 0.5)


def test_rank_one_matrix(rng):
    sp = MeasurementSpace.matrix(2, 3)
    w0 = rng.standard_normal(6)
    op = RankOneMatrix(sp, w0, [1.0, -2.0], [1.5, 0.5], 0.3, ([0, 0], [1, 1]))
    a = SpaceElement(sp, rng.standard_normal(6))
    y = np.array([0.2, 0.7])
    amp = math.log1p(math.exp(float(np.dot(w0, a.coeffs))))
    expected = amp * math.sin(1.5 * 0.2 + 0.5 * 0.7 + 0.3) * np.array([1.0, -2.0])
    assert np.max(np.abs(apply(op, a, y) - expected)) <= 1e-13
    assert op.output_dim == 2 and op.input_dim == 2


def test_softplus_stable():
    assert softplus(800.0) == 800.0
    assert softplus(-800.0) == 0.0


def test_power_series():
    sp = MeasurementSpace.sequence_lp(6)
    op = PowerSeries(sp)
    e1 = SpaceElement(sp, [1.0, 0, 0, 0, 0, 0])
    assert np.all(op.field(e1, np.linspace(-0.9, 0.9, 7)) == 1.0)
    x = SpaceElement(sp, [0.3, -1, 2, 0.5, 0.25, -0.125])
    assert apply(op, x, 0.0)[0] == 0.3
    y = 0.7
    assert abs(apply(op, x, y)[0] - sum(c * y ** n for n, c in enumerate(x.coeffs))) <= 1e-14
    with pytest.raises(OutOfDomainError):
        apply(op, x, 0.95)


def test_gaussian_convolution():
    sp = MeasurementSpace.schwartz_hermite(10)
    op = GaussianConvolution(sp, s=0.3)
    d = op.damping
    assert np.all((d > 0) & (d <= 1)) and np.all(np.diff(d) <= 0)
    u = SpaceElement(sp, np.eye(10)[3])
    y = np.array([-1.0, 0.2, 2.5])
    expected = math.exp(-0.9) * hermite_functions(4, y)[3]
    assert np.max(np.abs(op.field(u, y)[:, 0] - expected)) <= 1e-14


def test_nonlinear_composition(wide_family, rng):
    op = NonlinearComposition(wide_family)
    c = rng.uniform(-1, 1, 4)
    y = np.linspace(0, 1, 11)
    expected = np.sin(sum(ci * g.value(y) for ci, g in zip(c, wide_family.generators)))
    assert np.max(np.abs(op.field(element_of(wide_family, c), y)[:, 0] - expected)) <= 1e-12


class _Constant(OperatorOracle):
    kind = OperatorKind.ANTIDERIVATIVE

    def __init__(self, space):
        self.space = space
        self.domain = (np.zeros(1), np.ones(1))

    def _field(self, u, ys):
        return np.full(len(ys), 2.0)


def test_lipschitz_probe_constant(wide_family):
    assert lipschitz_probe(_Constant(wide_family.space), wide_family, 10, 0) == 0.0


def test_lipschitz_probe_antiderivative_bound():
    sp = MeasurementSpace.l2_interval(32)
    fam = trig_family(sp, [("cos", 1), ("sin", 1), ("cos", 2), ("sin", 3)], (0.0, 1.0))
    op = Antiderivative(fam)
    est = lipschitz_probe(op, fam, 50, 3)
    assert 0 < est <= op.lipschitz_constant == 1.0
    assert est == lipschitz_probe(op, fam, 50, 3)


@pytest.mark.parametrize("make", [
    lambda: (PowerSeries(MeasurementSpace.sequence_lp(6)), coordinate_family(MeasurementSpace.sequence_lp(6), range(6))),
    lambda: (PowerSeries(MeasurementSpace.sequence_c0(6)), coordinate_family(MeasurementSpace.sequence_c0(6), range(6))),
    lambda: (GaussianConvolution(MeasurementSpace.schwartz_hermite(8)),
             hermite_family(MeasurementSpace.schwartz_hermite(8), range(8))),
    lambda: (RankOneMatrix(MeasurementSpace.matrix(2, 2), [1, 0, 0, 1], [1.0], [2.0]),
             coordinate_family(MeasurementSpace.matrix(2, 2), range(4))),
])
def test_documented_lipschitz_constants(make):
    op, fam = make()
    assert lipschitz_probe(op, fam, 100, 0) <= op.lipschitz_constant * (1 + 1e-9)


def test_nonlinear_lipschitz(wide_family):
    op = NonlinearComposition(wide_family)
    assert lipschitz_probe(op, wide_family, 100, 0) <= op.lipschitz_constant * (1 + 1e-9)


def test_deterministic(wide_family):
    op = Antiderivative(wide_family)
    u = sample_family(wide_family, UniformRandom(1, 5))[0][1]
    ys = np.linspace(0, 1, 5)
    assert np.array_equal(op.field(u, ys), op.field(u, ys))
