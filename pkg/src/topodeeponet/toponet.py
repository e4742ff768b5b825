"""Feedforward networks whose first layer measures the input with functionals.

A network is ``H(x) = A_L z_{L-1}(x)`` with

    z_1 = sigma(T(x)),  T(x) = (f_1(x) - theta_1, ..., f_r(x) - theta_r)
    z_l = sigma(A_l z_{l-1} - b_l)

and no hidden layers means the shallow form ``H(x) = A sigma(T(x))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError, SpaceMismatchError
from .ridge1d import Activation
from .spaces import DualFunctional, MeasurementSpace, SpaceElement

__all__ = [
    "FunctionalLayer",
    "TopoNetwork",
    "forward",
    "forward_batch",
    "parameter_vector",
    "with_parameters",
    "random_network",
]


def _frozen(a, ndim):
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != ndim:
        raise RejectedInputError(f"expected a {ndim}-d array, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FunctionalLayer:
    """Rows of ``weights`` are functionals f_i in the space's dual representation."""

    space: MeasurementSpace
    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        w = _frozen(np.atleast_2d(self.weights) if np.size(self.weights) else np.zeros((0, self.space.dim)), 2)
        b = _frozen(np.atleast_1d(self.biases), 1)
        if w.shape[1] != self.space.dim:
            raise RejectedInputError(f"functional weights need {self.space.dim} columns, got {w.shape[1]}")
        if b.shape != (w.shape[0],):
            raise RejectedInputError("one bias per functional is required")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @classmethod
    def from_functionals(cls, functionals, biases):
        functionals = list(functionals)
        if not functionals:
            raise RejectedInputError("at least one functional is required")
        space = functionals[0].space
        if any(f.space != space for f in functionals):
            raise SpaceMismatchError("all functionals of a layer must share one space")
        return cls(space, np.stack([f.weights for f in functionals]), biases)

    @property
    def width(self):
        return self.weights.shape[0]

    @property
    def effective(self):
        return self.space.effective_weights(self.weights)

    def functionals(self):
        return [DualFunctional(self.space, row) for row in self.weights]

    def __call__(self, u: SpaceElement):
        if u.space != self.space:
            raise SpaceMismatchError("element and functional layer live in different spaces")
        return self.effective @ u.coeffs - self.biases


@dataclass(frozen=True, eq=False)
class TopoNetwork:
    layer: FunctionalLayer
    output: np.ndarray
    hidden: tuple = field(default=())
    activation: Activation = Activation.TANH

    def __post_init__(self):
        object.__setattr__(self, "activation", Activation(self.activation))
        hidden = tuple((_frozen(a, 2), _frozen(b, 1)) for a, b in self.hidden)
        out = _frozen(np.atleast_2d(self.output), 2)
        width = self.layer.width
        for a, b in hidden:
            if a.shape[1] != width or b.shape != (a.shape[0],):
                raise RejectedInputError(f"hidden layer shape {a.shape} does not chain from width {width}")
            width = a.shape[0]
        if out.shape[1] != width:
            raise RejectedInputError(f"output matrix has {out.shape[1]} columns, previous layer has {width} units")
        object.__setattr__(self, "hidden", hidden)
        object.__setattr__(self, "output", out)

    @property
    def space(self):
        return self.layer.space

    @property
    def output_dim(self):
        return self.output.shape[0]

    @property
    def n_parameters(self):
        n = self.layer.weights.size + self.layer.biases.size + self.output.size
        return n + sum(a.size + b.size for a, b in self.hidden)

    def __call__(self, u):
        return forward(self, u)

    def forward_coeffs(self, coeffs):
        """Vectorized forward pass on a (n, dim) matrix of element coefficients.

        Agrees with ``forward`` up to floating-point reassociation only.
        """
        z = self.activation(np.asarray(coeffs) @ self.layer.effective.T - self.layer.biases)
        for a, b in self.hidden:
            z = self.activation(z @ a.T - b)
        return z @ self.output.T


def forward(net: TopoNetwork, u: SpaceElement) -> np.ndarray:
    z = net.activation(net.layer(u))
    for a, b in net.hidden:
        z = net.activation(a @ z - b)
    return net.output @ z


def forward_batch(net: TopoNetwork, elements) -> np.ndarray:
    """Row i is ``forward(net, elements[i])``, computed by the same code path."""
    elements = list(elements)
    if not elements:
        return np.empty((0, net.output_dim))
    return np.stack([forward(net, u) for u in elements])


def parameter_vector(net: TopoNetwork) -> np.ndarray:
    """Flatten parameters in the order: functional weights (row-major), biases
    theta, then each hidden (A_l row-major, b_l), then the output matrix."""
    parts = [net.layer.weights.ravel(), net.layer.biases]
    for a, b in net.hidden:
        parts += [a.ravel(), b]
    parts.append(net.output.ravel())
    return np.concatenate(parts)


def with_parameters(net: TopoNetwork, v) -> TopoNetwork:
    v = np.asarray(v, dtype=float)
    if v.shape != (net.n_parameters,):
        raise RejectedInputError(f"expected {net.n_parameters} parameters, got {v.shape}")
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        out = v[pos:pos + size].reshape(shape)
        pos += size
        return out

    w = take(net.layer.weights.shape)
    theta = take(net.layer.biases.shape)
    hidden = tuple((take(a.shape), take(b.shape)) for a, b in net.hidden)
    out = take(net.output.shape)
    return TopoNetwork(FunctionalLayer(net.space, w, theta), out, hidden, net.activation)


def random_network(space: MeasurementSpace, widths, output_dim, rng, activation=Activation.TANH) -> TopoNetwork:
    """Uniform(-s, s) initialization with ``s = 1/sqrt(fan_in)`` per layer.

    ``widths`` lists the hidden sizes n_1..n_{L-1}; the first entry is the
    number of functionals.
    """
    widths = list(widths)
    if not widths or min(widths) < 1:
        raise RejectedInputError("widths must be a non-empty list of positive sizes")

    def uniform(shape, fan_in):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape)

    layer = FunctionalLayer(space, uniform((widths[0], space.dim), space.dim), uniform(widths[0], space.dim))
    hidden = tuple((uniform((n, prev), prev), uniform(n, prev)) for prev, n in zip(widths[:-1], widths[1:]))
    out = uniform((output_dim, widths[-1]), widths[-1])
    return TopoNetwork(layer, out, hidden, activation)
