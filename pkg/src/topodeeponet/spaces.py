"""Measurement spaces: elements of X and continuous linear functionals from X*.

Every space is finite-dimensional at desk scale. Elements store a coefficient
vector whose meaning depends on the space kind:

* ``matrix``            flattened (row-major) matrix entries
* ``sequence_lp``       the first N entries of a sequence in l_p
* ``sequence_c0``       the first N entries of a null sequence (tail is zero)
* ``l2_interval``       values at the Gauss-Legendre nodes of [a, b]
* ``schwartz_hermite``  coefficients in the orthonormal Hermite-function basis

A functional stores a weight vector in the matching dual representation:
a matrix W for ``A -> trace(W^T A)``, an l_q / l_1 weight sequence, a density
sampled at the quadrature nodes, or the Hermite coefficients of a pairing
distribution.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import hermite as _herm
from numpy.polynomial import legendre as _leg

from .errors import OutOfDomainError, RejectedInputError, SpaceMismatchError

__all__ = [
    "SpaceKind",
    "MeasurementSpace",
    "SpaceElement",
    "DualFunctional",
    "BasisFunction",
    "CompactFamily",
    "Grid",
    "UniformRandom",
    "pair",
    "element_of",
    "sample_family",
    "element_distance",
    "hermite_functions",
    "scaled_hermite_functions",
    "functional_from_density",
    "element_from_function",
    "evaluate_element",
    "density_values",
    "trig_family",
    "hermite_family",
    "coordinate_family",
]


class SpaceKind(str, enum.Enum):
    MATRIX = "matrix"
    SEQUENCE_LP = "sequence_lp"
    SEQUENCE_C0 = "sequence_c0"
    L2_INTERVAL = "l2_interval"
    SCHWARTZ_HERMITE = "schwartz_hermite"


_QUADRATURE_KINDS = (SpaceKind.L2_INTERVAL, SpaceKind.SCHWARTZ_HERMITE)


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def scaled_hermite_functions(n, x):
    """Return ``h_k(x) * exp(x**2 / 2)`` for k < n, shape ``(n, len(x))``.

    The exponential factor is stripped so the three-term recurrence stays
    finite far out in the tails where ``h_k`` itself underflows.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((n, x.size))
    if n == 0:
        return out
    out[0] = math.pi ** -0.25
    if n > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, n - 1):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def hermite_functions(n, x):
    """Orthonormal Hermite functions ``h_0..h_{n-1}`` evaluated at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return scaled_hermite_functions(n, x) * np.exp(-0.5 * x * x)


@dataclass(frozen=True)
class MeasurementSpace:
    """Descriptor of a finite-dimensional stand-in for a locally convex space.

    Two spaces are the same space iff their descriptors compare equal; the
    quadrature rule is derived from the descriptor, never stored separately.
    """

    kind: SpaceKind
    shape: tuple
    interval: tuple = (0.0, 1.0)
    p: float = 2.0
    quad_order: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", SpaceKind(self.kind))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "interval", (float(self.interval[0]), float(self.interval[1])))
        if any(s < 1 for s in self.shape):
            raise RejectedInputError(f"space dimensions must be >= 1, got {self.shape}")
        expected = 2 if self.kind is SpaceKind.MATRIX else 1
        if len(self.shape) != expected:
            raise RejectedInputError(f"{self.kind.value} expects {expected} size parameter(s)")
        if self.kind is SpaceKind.L2_INTERVAL and not self.interval[0] < self.interval[1]:
            raise RejectedInputError(f"interval must satisfy a < b, got {self.interval}")
        if self.kind is SpaceKind.SEQUENCE_LP and not self.p >= 1.0:
            raise RejectedInputError(f"l_p exponent must be >= 1, got {self.p}")
        if self.kind is SpaceKind.SCHWARTZ_HERMITE and self.quad_order == 0:
            object.__setattr__(self, "quad_order", 2 * self.shape[0] + 8)

    @classmethod
    def matrix(cls, rows, cols):
        return cls(SpaceKind.MATRIX, (rows, cols))

    @classmethod
    def sequence_lp(cls, n, p=2.0):
        return cls(SpaceKind.SEQUENCE_LP, (n,), p=p)

    @classmethod
    def sequence_c0(cls, n):
        return cls(SpaceKind.SEQUENCE_C0, (n,))

    @classmethod
    def l2_interval(cls, q, a=0.0, b=1.0):
        return cls(SpaceKind.L2_INTERVAL, (q,), interval=(a, b))

    @classmethod
    def schwartz_hermite(cls, h, quad_order=0):
        return cls(SpaceKind.SCHWARTZ_HERMITE, (h,), quad_order=quad_order)

    @property
    def dim(self):
        return int(np.prod(self.shape))

    @cached_property
    def quadrature(self):
        """(nodes, weights) of the space's fixed rule, or None.

        L2 spaces use Gauss-Legendre mapped to [a, b]. Hermite spaces use
        Gauss-Hermite for the weight ``exp(-x**2)``.
        """
        if self.kind is SpaceKind.L2_INTERVAL:
            t, w = _leg.leggauss(self.shape[0])
            a, b = self.interval
            half = 0.5 * (b - a)
            return _readonly(a + half * (t + 1.0)), _readonly(half * w)
        if self.kind is SpaceKind.SCHWARTZ_HERMITE:
            x, w = _herm.hermgauss(self.quad_order)
            return _readonly(x), _readonly(w)
        return None

    def effective_weights(self, weights):
        """Weights to dot directly against element coefficients."""
        if self.kind is SpaceKind.L2_INTERVAL:
            return np.asarray(weights) * self.quadrature[1]
        return np.asarray(weights)

    def describe(self):
        return {
            "kind": self.kind.value,
            "shape": list(self.shape),
            "interval": list(self.interval),
            "p": self.p,
            "quad_order": self.quad_order,
        }

    @classmethod
    def from_description(cls, d):
        return cls(SpaceKind(d["kind"]), tuple(d["shape"]), tuple(d.get("interval", (0.0, 1.0))),
                   float(d.get("p", 2.0)), int(d.get("quad_order", 0)))


def _check_vector(space, values, what):
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size != space.dim:
        raise RejectedInputError(f"{what} must have length {space.dim} for {space.kind.value}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise RejectedInputError(f"{what} contains non-finite values")
    return _readonly(v)


@dataclass(frozen=True, eq=False)
class SpaceElement:
    space: MeasurementSpace
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _check_vector(self.space, self.coeffs, "element coefficients"))

    def _other(self, other):
        if not isinstance(other, SpaceElement):
            return NotImplemented
        if other.space != self.space:
            raise SpaceMismatchError("cannot combine elements of different spaces")
        return other.coeffs

    def __add__(self, other):
        oc = self._other(other)
        if oc is NotImplemented:
            return oc
        return SpaceElement(self.space, self.coeffs + oc)

    def __sub__(self, other):
        oc = self._other(other)
        if oc is NotImplemented:
            return oc
        return SpaceElement(self.space, self.coeffs - oc)

    def __mul__(self, alpha):
        return SpaceElement(self.space, float(alpha) * self.coeffs)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DualFunctional:
    space: MeasurementSpace
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _check_vector(self.space, self.weights, "functional weights"))

    @cached_property
    def effective(self):
        return _readonly(self.space.effective_weights(self.weights))

    def scaled(self, s):
        return DualFunctional(self.space, float(s) * self.weights)


def pair(f: DualFunctional, u: SpaceElement) -> float:
    """Evaluate the functional ``f`` on ``u``."""
    if f.space != u.space:
        raise SpaceMismatchError(f"functional on {f.space.kind.value} paired with element of {u.space.kind.value}")
    return float(np.dot(f.effective, u.coeffs))


# -- function-space helpers ---------------------------------------------------


def _to_reference(space, x):
    a, b = space.interval
    return (2.0 * np.asarray(x, dtype=float) - (a + b)) / (b - a)


def _legendre_coefficients(space, values):
    q = space.shape[0]
    t, w = _leg.leggauss(q)
    vander = _leg.legvander(t, q - 1)
    scale = (2.0 * np.arange(q) + 1.0) / 2.0
    return scale * (vander.T @ (w * np.asarray(values)))


def _interpolate_nodes(space, values, x):
    if space.kind is SpaceKind.L2_INTERVAL:
        return _leg.legval(_to_reference(space, x), _legendre_coefficients(space, values))
    if space.kind is SpaceKind.SCHWARTZ_HERMITE:
        return np.asarray(values) @ hermite_functions(space.dim, x)
    raise RejectedInputError(f"{space.kind.value} elements are not functions of a real variable")


def evaluate_element(u: SpaceElement, x) -> np.ndarray:
    """Point values ``u(x)`` for function-valued spaces.

    L2 elements are the degree ``Q-1`` polynomial through their node values;
    Hermite elements are their finite Hermite expansion.
    """
    return _interpolate_nodes(u.space, u.coeffs, x)


def density_values(f: DualFunctional, x) -> np.ndarray:
    """Pointwise values of the density representing an integral functional."""
    return _interpolate_nodes(f.space, f.weights, x)


def _hermite_projection(space, func):
    x, w = space.quadrature
    g = np.asarray(func(x), dtype=float) * np.exp(0.5 * x * x)
    return scaled_hermite_functions(space.dim, x) @ (w * g)


def functional_from_density(space: MeasurementSpace, g: Callable) -> DualFunctional:
    """Integral functional ``u -> integral of g*u`` on a function space."""
    if space.kind is SpaceKind.L2_INTERVAL:
        return DualFunctional(space, np.asarray(g(space.quadrature[0]), dtype=float))
    if space.kind is SpaceKind.SCHWARTZ_HERMITE:
        return DualFunctional(space, _hermite_projection(space, g))
    raise RejectedInputError(f"{space.kind.value} has no integral functionals")


def element_from_function(space: MeasurementSpace, func: Callable) -> SpaceElement:
    if space.kind is SpaceKind.L2_INTERVAL:
        return SpaceElement(space, np.asarray(func(space.quadrature[0]), dtype=float))
    if space.kind is SpaceKind.SCHWARTZ_HERMITE:
        return SpaceElement(space, _hermite_projection(space, func))
    raise RejectedInputError(f"{space.kind.value} elements are not functions of a real variable")


# -- compact families ---------------------------------------------------------


@dataclass(frozen=True)
class BasisFunction:
    """A closed-form generator: ``sin``/``cos`` of frequency k, ``x**k``, or ``h_k``.

    Trig generators on [a, b] have period ``b - a`` divided by k.
    """

    kind: str
    k: int

    def value(self, x, interval=(0.0, 1.0)):
        x = np.asarray(x, dtype=float)
        a, b = interval
        omega = 2.0 * math.pi * self.k / (b - a)
        if self.kind == "sin":
            return np.sin(omega * (x - a))
        if self.kind == "cos":
            return np.cos(omega * (x - a))
        if self.kind == "mono":
            return x ** self.k
        if self.kind == "hermite":
            return hermite_functions(self.k + 1, x)[self.k]
        raise RejectedInputError(f"unknown basis kind {self.kind!r}")

    def integral(self, y, interval=(0.0, 1.0)):
        """Antiderivative ``int_a^y`` in closed form (trig and monomials)."""
        y = np.asarray(y, dtype=float)
        a, b = interval
        omega = 2.0 * math.pi * self.k / (b - a)
        if self.kind == "sin":
            if self.k == 0:
                return np.zeros_like(y)
            return (1.0 - np.cos(omega * (y - a))) / omega
        if self.kind == "cos":
            if self.k == 0:
                return y - a
            return np.sin(omega * (y - a)) / omega
        if self.kind == "mono":
            return (y ** (self.k + 1) - a ** (self.k + 1)) / (self.k + 1)
        raise RejectedInputError(f"no closed-form antiderivative for {self.kind!r}")

    def label(self):
        return f"{self.kind}{self.k}"


@dataclass(frozen=True, eq=False)
class CompactFamily:
    """Image of a closed coefficient box under ``c -> sum_j c_j * basis[j]``."""

    space: MeasurementSpace
    basis: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    generators: tuple = field(default=())

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.shape[1] != self.space.dim:
            raise RejectedInputError(f"basis rows must have length {self.space.dim}")
        lo = np.atleast_1d(np.asarray(self.box_lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.box_hi, dtype=float))
        if lo.shape != (basis.shape[0],) or hi.shape != lo.shape:
            raise RejectedInputError("box bounds must have one entry per basis element")
        if np.any(lo > hi):
            raise RejectedInputError("box_lo must be <= box_hi componentwise")
        if self.generators and len(self.generators) != basis.shape[0]:
            raise RejectedInputError("generators must match the basis length")
        object.__setattr__(self, "basis", _readonly(basis))
        object.__setattr__(self, "box_lo", _readonly(lo))
        object.__setattr__(self, "box_hi", _readonly(hi))
        object.__setattr__(self, "generators", tuple(self.generators))

    @property
    def n_params(self):
        return self.basis.shape[0]

    def contains(self, c):
        c = np.asarray(c, dtype=float)
        return bool(np.all(c >= self.box_lo) and np.all(c <= self.box_hi))

    def coefficient_matrix(self, cs):
        """Element coefficients for many parameter vectors, row by row."""
        return np.stack([element_of(self, c).coeffs for c in cs]) if len(cs) else np.empty((0, self.space.dim))

    def functional_range(self, f: DualFunctional):
        """Exact [min, max] of ``f`` over the family (affine in c over a box)."""
        g = self.basis @ f.effective
        lo = np.minimum(g * self.box_lo, g * self.box_hi).sum()
        hi = np.maximum(g * self.box_lo, g * self.box_hi).sum()
        return float(lo), float(hi)


def element_of(family: CompactFamily, c) -> SpaceElement:
    c = np.asarray(c, dtype=float)
    if c.shape != (family.n_params,):
        raise RejectedInputError(f"parameter vector must have length {family.n_params}")
    if not family.contains(c):
        raise OutOfDomainError(f"parameters {c.tolist()} lie outside the family box")
    return SpaceElement(family.space, np.dot(c, family.basis))


@dataclass(frozen=True)
class Grid:
    k: int


@dataclass(frozen=True)
class UniformRandom:
    n: int
    seed: int = 0


def sample_family(family: CompactFamily, scheme) -> list:
    """Sample ``(c, element)`` pairs; grids include every box corner."""
    if isinstance(scheme, Grid):
        if scheme.k < 2:
            raise RejectedInputError("grid sampling needs k >= 2")
        axes = [np.linspace(lo, hi, scheme.k) for lo, hi in zip(family.box_lo, family.box_hi)]
        cs = [np.array(c) for c in itertools.product(*axes)]
    elif isinstance(scheme, UniformRandom):
        if scheme.n < 1:
            raise RejectedInputError("random sampling needs n >= 1")
        rng = np.random.default_rng(scheme.seed)
        cs = list(rng.uniform(family.box_lo, family.box_hi, size=(scheme.n, family.n_params)))
    else:
        raise RejectedInputError(f"unknown sampling scheme {scheme!r}")
    return [(c, element_of(family, c)) for c in cs]


def element_distance(space: MeasurementSpace, u: SpaceElement, v: SpaceElement, metric=None) -> float:
    """Distance on the coefficient representation.

    ``metric`` is ``"euclidean"`` (default, ``"sup"`` for c0), ``"sup"``, or
    ``"l2"``, the quadrature L2 norm on L2 spaces (Euclidean elsewhere).
    """
    if u.space != space or v.space != space:
        raise SpaceMismatchError("distance between elements of different spaces")
    if metric is None:
        metric = "sup" if space.kind is SpaceKind.SEQUENCE_C0 else "euclidean"
    diff = u.coeffs - v.coeffs
    if metric == "euclidean":
        return float(np.linalg.norm(diff))
    if metric == "sup":
        return float(np.max(np.abs(diff)))
    if metric == "l2":
        if space.kind is SpaceKind.L2_INTERVAL:
            return float(math.sqrt(np.dot(space.quadrature[1], diff * diff)))
        return float(np.linalg.norm(diff))
    raise RejectedInputError(f"unknown metric {metric!r}")


# -- family builders -----------------------------------------------------------


def _box(n, box):
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
    return lo, hi


def trig_family(space: MeasurementSpace, modes: Sequence, box=(-1.0, 1.0)) -> CompactFamily:
    """Family spanned by closed-form generators on an L2 space.

    ``modes`` is a sequence of ``(kind, k)`` pairs such as ``("sin", 1)``.
    """
    if space.kind is not SpaceKind.L2_INTERVAL:
        raise RejectedInputError("trig_family needs an l2_interval space")
    gens = tuple(BasisFunction(kind, int(k)) for kind, k in modes)
    nodes = space.quadrature[0]
    basis = np.stack([g.value(nodes, space.interval) for g in gens])
    lo, hi = _box(len(gens), box)
    return CompactFamily(space, basis, lo, hi, gens)


def hermite_family(space: MeasurementSpace, orders: Sequence[int], box=(-1.0, 1.0)) -> CompactFamily:
    if space.kind is not SpaceKind.SCHWARTZ_HERMITE:
        raise RejectedInputError("hermite_family needs a schwartz_hermite space")
    basis = np.zeros((len(orders), space.dim))
    for row, k in enumerate(orders):
        basis[row, k] = 1.0
    lo, hi = _box(len(orders), box)
    return CompactFamily(space, basis, lo, hi, tuple(BasisFunction("hermite", int(k)) for k in orders))


def coordinate_family(space: MeasurementSpace, indices: Sequence[int], box=(-1.0, 1.0)) -> CompactFamily:
    """Family moving the listed flat coordinates (matrix entries, sequence terms)."""
    basis = np.zeros((len(indices), space.dim))
    for row, k in enumerate(indices):
        basis[row, k] = 1.0
    lo, hi = _box(len(indices), box)
    return CompactFamily(space, basis, lo, hi)
