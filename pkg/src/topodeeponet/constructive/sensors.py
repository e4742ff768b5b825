"""Point-evaluation (sensor) forms of integral functionals.

An integral functional ``u -> int g u`` is replaced by ``sum_j xi_j u(x_j)``
with k-point Gauss nodes. The sensor count doubles (1, 2, 4, ...) until the
certified error over the family is at most delta.

Because both the functional and the sensor sum are linear in u, the error on
``u = sum_i c_i phi_i`` is ``sum_i c_i e_i`` with ``e_i`` the error on the
generator ``phi_i``; its exact maximum over the coefficient box is the
certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite as _herm
from numpy.polynomial import legendre as _leg

from ..errors import RejectedInputError
from ..spaces import (
    CompactFamily,
    DualFunctional,
    SpaceElement,
    SpaceKind,
    UniformRandom,
    density_values,
    evaluate_element,
    pair,
    sample_family,
)

__all__ = ["SensorDiscretization", "discretize_functional", "error_table", "sensor_rule", "sensor_sum"]


@dataclass(frozen=True, eq=False)
class SensorDiscretization:
    points: np.ndarray
    weights: np.ndarray
    certified_error: float
    tolerance: float
    tolerance_met: bool
    sampled_error: float
    table: tuple = field(default=())

    @property
    def k(self):
        return self.points.size

    def __call__(self, u: SpaceElement) -> float:
        return sensor_sum(self, u)


def sensor_rule(f: DualFunctional, k: int):
    """Nodes ``x_j`` and weights ``xi_j`` of the k-sensor form of ``f``."""
    space = f.space
    if k < 1:
        raise RejectedInputError("sensor count must be >= 1")
    if space.kind is SpaceKind.L2_INTERVAL:
        t, w = _leg.leggauss(k)
        a, b = space.interval
        half = 0.5 * (b - a)
        x = a + half * (t + 1.0)
        return x, half * w * density_values(f, x)
    if space.kind is SpaceKind.SCHWARTZ_HERMITE:
        # int g u = int exp(-x^2) [g e^{x^2/2}] [u e^{x^2/2}]; u(x_j) carries one factor
        x, w = _herm.hermgauss(k)
        return x, w * density_values(f, x) * np.exp(x * x)
    raise RejectedInputError(f"{space.kind.value} functionals have no integral representation")


def sensor_sum(disc, u: SpaceElement) -> float:
    return float(np.dot(disc.weights, evaluate_element(u, disc.points)))


def _generator_errors(f, family, x, xi):
    vals = np.stack([evaluate_element(SpaceElement(family.space, row), x) for row in family.basis])
    exact = family.basis @ f.effective
    return vals @ xi - exact


def _box_max(e, family):
    return float(np.sum(np.maximum(np.abs(e * family.box_lo), np.abs(e * family.box_hi))))


def discretize_functional(f: DualFunctional, family: CompactFamily, delta: float, *,
                          max_nodes: int | None = None, n_check: int = 1000, seed: int = 0) -> SensorDiscretization:
    """Coarsest doubling sensor count whose certified error is <= delta.

    ``max_nodes`` defaults to the count at which the Gauss rule reproduces
    the space's own pairing exactly (Q for L2 spaces, H for Hermite spaces);
    it is always tried last. ``sampled_error`` is the max error over
    ``n_check`` random family elements. ``table`` lists ``(k, certified)``
    for every count tried.
    """
    if not delta > 0:
        raise RejectedInputError("delta must be positive")
    if f.space != family.space:
        raise RejectedInputError("functional and family live in different spaces")
    if max_nodes is None:
        max_nodes = family.space.dim
    counts = []
    k = 1
    while k < max_nodes:
        counts.append(k)
        k *= 2
    counts.append(max_nodes)

    table = []
    chosen = None
    for k in counts:
        x, xi = sensor_rule(f, k)
        cert = _box_max(_generator_errors(f, family, x, xi), family)
        table.append((k, cert))
        if cert <= delta:
            chosen = (x, xi, cert)
            break
    if chosen is None:
        best = min(range(len(table)), key=lambda i: table[i][1])
        x, xi = sensor_rule(f, table[best][0])
        chosen = (x, xi, table[best][1])
    x, xi, cert = chosen

    samples = sample_family(family, UniformRandom(n_check, seed))
    sampled = max(abs(pair(f, u) - float(np.dot(xi, evaluate_element(u, x)))) for _, u in samples)
    return SensorDiscretization(x, xi, cert, float(delta), cert <= delta, float(sampled), tuple(table))


def error_table(f: DualFunctional, family: CompactFamily, counts) -> list:
    """Certified error for each sensor count in ``counts``."""
    rows = []
    for k in counts:
        x, xi = sensor_rule(f, k)
        rows.append((int(k), _box_max(_generator_errors(f, family, x, xi), family)))
    return rows
