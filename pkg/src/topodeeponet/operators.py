"""Synthetic ground-truth operators ``G: V -> C(K; R^m)`` with closed-form oracles.

Each oracle is bound to a measurement space and an output box ``K``. The
function-space oracles additionally hold the compact family they act on so
that elements can be mapped back to basis coefficients and integrated or
evaluated in closed form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomainError, RejectedInputError, SpaceMismatchError
from .spaces import (
    CompactFamily,
    MeasurementSpace,
    SpaceElement,
    SpaceKind,
    UniformRandom,
    element_distance,
    hermite_functions,
    sample_family,
)

__all__ = [
    "OperatorKind",
    "OperatorOracle",
    "Antiderivative",
    "RankOneMatrix",
    "PowerSeries",
    "GaussianConvolution",
    "NonlinearComposition",
    "apply",
    "lipschitz_probe",
    "softplus",
]

DOMAIN_SLACK = 1e-12


class OperatorKind(str, enum.Enum):
    ANTIDERIVATIVE = "antiderivative"
    RANK_ONE_MATRIX = "rank_one_matrix"
    POWER_SERIES = "power_series"
    GAUSSIAN_CONVOLUTION = "gaussian_convolution"
    NONLINEAR_COMPOSITION = "nonlinear_composition"


def softplus(t):
    t = np.asarray(t, dtype=float)
    return np.logaddexp(0.0, t)


def _box(lo, hi):
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or np.any(lo > hi):
        raise RejectedInputError("domain box needs lo <= hi with matching shapes")
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


class OperatorOracle:
    """Base class: subclasses implement ``_field(u, ys) -> (n, m)``.

    ``lipschitz_constant`` bounds ``sup_y |G(u)(y) - G(v)(y)|_inf`` by
    ``L * element_distance(u, v, lipschitz_metric)`` on the family.
    """

    kind: OperatorKind
    space: MeasurementSpace
    domain: tuple
    output_dim: int = 1
    lipschitz_metric: str = "euclidean"

    @property
    def input_dim(self):
        return self.domain[0].size

    @property
    def lipschitz_constant(self) -> float:
        raise NotImplementedError

    def _check(self, u, ys):
        if not isinstance(u, SpaceElement) or u.space != self.space:
            raise SpaceMismatchError(f"{self.kind.value} oracle expects an element of {self.space.kind.value}")
        ys = np.asarray(ys, dtype=float)
        if ys.ndim == 1:
            ys = ys.reshape(-1, self.input_dim)
        if ys.ndim != 2 or ys.shape[1] != self.input_dim:
            raise RejectedInputError(f"points must have {self.input_dim} coordinates")
        lo, hi = self.domain
        bad = np.any((ys < lo - DOMAIN_SLACK) | (ys > hi + DOMAIN_SLACK), axis=1)
        if np.any(bad):
            raise OutOfDomainError(f"point {ys[np.argmax(bad)].tolist()} lies outside K")
        return ys

    def field(self, u: SpaceElement, ys) -> np.ndarray:
        """Values ``G(u)(y)`` for every row of ``ys``; shape (n, m)."""
        ys = self._check(u, ys)
        return np.asarray(self._field(u, ys), dtype=float).reshape(ys.shape[0], self.output_dim)

    def __call__(self, u, y):
        return apply(self, u, y)

    def describe(self) -> dict:
        raise NotImplementedError


def apply(oracle: OperatorOracle, u: SpaceElement, y) -> np.ndarray:
    """``G(u)(y)`` as an m-vector."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return oracle.field(u, y.reshape(1, -1))[0]


class _FamilyOracle(OperatorOracle):
    """Oracles on L2 spaces that read an element back as basis coefficients."""

    def _init_family(self, family: CompactFamily):
        if family.space.kind is not SpaceKind.L2_INTERVAL or not family.generators:
            raise RejectedInputError(f"{self.kind.value} needs an l2_interval family with closed-form generators")
        self.family = family
        self.space = family.space
        # least-squares recovery c = P u of the generator coefficients
        self._recover = np.linalg.pinv(family.basis.T)

    def coefficients(self, u):
        return self._recover @ u.coeffs

    def _recovery_lipschitz(self, rows):
        """max over dense y of |g(y)^T P|_2, g the per-generator row values."""
        return float(np.max(np.linalg.norm(rows.T @ self._recover, axis=1)))


class Antiderivative(_FamilyOracle):
    """``G(u)(y) = int_a^y u(s) ds`` on an L2 interval [a, b]; d = m = 1.

    Integrals are taken analytically from the recovered generator
    coefficients. Lipschitz constant ``sqrt(b - a)`` in the quadrature L2
    metric (Cauchy-Schwarz).
    """

    kind = OperatorKind.ANTIDERIVATIVE
    lipschitz_metric = "l2"

    def __init__(self, family: CompactFamily):
        self._init_family(family)
        self.domain = _box([family.space.interval[0]], [family.space.interval[1]])

    @property
    def lipschitz_constant(self):
        a, b = self.space.interval
        return math.sqrt(b - a)

    def _field(self, u, ys):
        c = self.coefficients(u)
        rows = np.stack([g.integral(ys[:, 0], self.space.interval) for g in self.family.generators])
        return c @ rows

    def describe(self):
        return {"kind": self.kind.value}


class NonlinearComposition(_FamilyOracle):
    """``G(u)(y) = sin(u(y))`` with ``u(y)`` rebuilt from generator coefficients."""

    kind = OperatorKind.NONLINEAR_COMPOSITION

    def __init__(self, family: CompactFamily):
        self._init_family(family)
        self.domain = _box([family.space.interval[0]], [family.space.interval[1]])

    @property
    def lipschitz_constant(self):
        a, b = self.space.interval
        y = np.linspace(a, b, 2001)
        rows = np.stack([g.value(y, self.space.interval) for g in self.family.generators])
        return self._recovery_lipschitz(rows)

    def _field(self, u, ys):
        c = self.coefficients(u)
        rows = np.stack([g.value(ys[:, 0], self.space.interval) for g in self.family.generators])
        return np.sin(c @ rows)

    def describe(self):
        return {"kind": self.kind.value}


@dataclass(eq=False)
class RankOneMatrix(OperatorOracle):
    """``G(A)(y) = softplus(trace(W0^T A)) * v * sin(omega0 . y + zeta0)``.

    Lipschitz constant ``|W0|_F * |v|_inf`` in the Frobenius metric.
    """

    space: MeasurementSpace
    w0: np.ndarray
    v: np.ndarray
    omega0: np.ndarray
    zeta0: float = 0.0
    domain: tuple = field(default=None)
    kind = OperatorKind.RANK_ONE_MATRIX

    def __post_init__(self):
        if self.space.kind is not SpaceKind.MATRIX:
            raise RejectedInputError("rank_one_matrix needs a matrix space")
        self.w0 = np.asarray(self.w0, dtype=float).reshape(self.space.dim)
        self.v = np.atleast_1d(np.asarray(self.v, dtype=float))
        self.omega0 = np.atleast_1d(np.asarray(self.omega0, dtype=float))
        self.zeta0 = float(self.zeta0)
        d = self.omega0.size
        if self.domain is None:
            self.domain = (np.zeros(d), np.ones(d))
        self.domain = _box(*self.domain)
        if self.domain[0].size != d:
            raise RejectedInputError("domain dimension must match omega0")
        self.output_dim = self.v.size

    @property
    def lipschitz_constant(self):
        return float(np.linalg.norm(self.w0) * np.max(np.abs(self.v)))

    def _field(self, u, ys):
        amp = float(softplus(np.dot(self.w0, u.coeffs)))
        return amp * np.outer(np.sin(ys @ self.omega0 + self.zeta0), self.v)

    def describe(self):
        return {"kind": self.kind.value, "w0": self.w0.tolist(), "v": self.v.tolist(),
                "omega0": self.omega0.tolist(), "zeta0": self.zeta0,
                "domain": [self.domain[0].tolist(), self.domain[1].tolist()]}


@dataclass(eq=False)
class PowerSeries(OperatorOracle):
    """``G(x)(y) = sum_n x_n y**(n-1)`` on ``K = [-r, r]`` (default r = 0.9).

    Lipschitz constant ``1/sqrt(1 - r**2)`` in the Euclidean metric and
    ``1/(1 - r)`` in the sup metric used for c0.
    """

    space: MeasurementSpace
    radius: float = 0.9
    domain: tuple = field(default=None)
    kind = OperatorKind.POWER_SERIES

    def __post_init__(self):
        if self.space.kind not in (SpaceKind.SEQUENCE_LP, SpaceKind.SEQUENCE_C0):
            raise RejectedInputError("power_series needs a sequence space")
        if not 0.0 < self.radius < 1.0:
            raise RejectedInputError("radius must lie in (0, 1)")
        self.domain = _box([-self.radius], [self.radius])
        self.lipschitz_metric = "sup" if self.space.kind is SpaceKind.SEQUENCE_C0 else "euclidean"

    @property
    def lipschitz_constant(self):
        r = self.radius
        if self.lipschitz_metric == "sup":
            return 1.0 / (1.0 - r)
        return 1.0 / math.sqrt(1.0 - r * r)

    def _field(self, u, ys):
        # Horner keeps y = 0 exactly equal to x_1
        out = np.zeros(ys.shape[0])
        for x in u.coeffs[::-1]:
            out = out * ys[:, 0] + x
        return out

    def describe(self):
        return {"kind": self.kind.value, "radius": self.radius}


@dataclass(eq=False)
class GaussianConvolution(OperatorOracle):
    """Hermite-diagonal Gaussian smoothing ``sum_n exp(-s n) f_n h_n(y)``.

    This is the Mehler (harmonic-oscillator heat) kernel, an integral operator
    with a Gaussian kernel that is diagonal in the Hermite basis, so the
    damping is exact. Lipschitz constant
    ``pi**(-1/4) * sqrt(sum_n exp(-2 s n))`` in the Euclidean metric.
    """

    space: MeasurementSpace
    s: float = 0.5
    half_width: float = 3.0
    domain: tuple = field(default=None)
    kind = OperatorKind.GAUSSIAN_CONVOLUTION

    def __post_init__(self):
        if self.space.kind is not SpaceKind.SCHWARTZ_HERMITE:
            raise RejectedInputError("gaussian_convolution needs a schwartz_hermite space")
        if not self.s >= 0.0 or not self.half_width > 0.0:
            raise RejectedInputError("s must be >= 0 and half_width > 0")
        self.domain = _box([-self.half_width], [self.half_width])

    @property
    def damping(self):
        return np.exp(-self.s * np.arange(self.space.dim))

    @property
    def lipschitz_constant(self):
        return float(math.pi ** -0.25 * math.sqrt(np.sum(self.damping ** 2)))

    def _field(self, u, ys):
        return (self.damping * u.coeffs) @ hermite_functions(self.space.dim, ys[:, 0])

    def describe(self):
        return {"kind": self.kind.value, "s": self.s, "half_width": self.half_width}


def lipschitz_probe(oracle: OperatorOracle, family: CompactFamily, n_pairs: int, seed: int,
                    n_points: int = 101) -> float:
    """Max over random pairs of ``sup_y |G(u) - G(v)|_inf / dist(u, v)``.

    ``y`` ranges over a tensor grid of ``n_points`` per axis (capped at 4096
    points); distances use the oracle's documented metric.
    """
    if n_pairs < 1:
        raise RejectedInputError("n_pairs must be >= 1")
    lo, hi = oracle.domain
    per_axis = max(2, min(n_points, int(round(4096 ** (1.0 / lo.size)))))
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    ys = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
    samples = sample_family(family, UniformRandom(2 * n_pairs, seed))
    best = 0.0
    for (_, u), (_, v) in zip(samples[::2], samples[1::2]):
        dist = element_distance(family.space, u, v, oracle.lipschitz_metric)
        if dist == 0.0:
            continue
        diff = np.max(np.abs(oracle.field(u, ys) - oracle.field(v, ys)))
        best = max(best, float(diff) / dist)
    return best
