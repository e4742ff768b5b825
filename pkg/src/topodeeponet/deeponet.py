"""Topological DeepONets ``G_hat(u)(y) = B(u) T(y)``.

The branch ``B(u)`` is the m x p matrix whose k-th column is the output of a
topological network ``b_k`` on ``u``; the trunk ``T(y)`` is the p-vector of
ridge features ``sigma(omega_k . y + zeta_k)``, optionally mixed by a p x p
matrix.

All products are written as explicit sums over the latent index so that
single-point and grid evaluations agree bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import OracleError, RejectedInputError, SpaceMismatchError
from .ridge1d import Activation
from .spaces import SpaceElement
from .toponet import TopoNetwork, forward

__all__ = [
    "TrunkNetwork",
    "BranchNetwork",
    "TopologicalDeepONet",
    "ErrorReport",
    "evaluate",
    "evaluate_field",
    "separable_sum",
    "sup_error",
    "tensor_grid",
]


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _lincomb(x, w):
    """``x @ w.T`` as an explicit sum over the shared index (row-order independent)."""
    out = np.zeros((x.shape[0], w.shape[0]))
    for j in range(x.shape[1]):
        out += x[:, j, None] * w[None, :, j]
    return out


@dataclass(frozen=True, eq=False)
class TrunkNetwork:
    omegas: np.ndarray
    zetas: np.ndarray
    activation: Activation = Activation.TANH
    mixing: np.ndarray = field(default=None)

    def __post_init__(self):
        omegas = _frozen(np.atleast_2d(self.omegas))
        zetas = _frozen(np.atleast_1d(self.zetas))
        if omegas.shape[0] < 1 or omegas.shape[1] < 1:
            raise RejectedInputError("trunk needs p >= 1 atoms in d >= 1 dimensions")
        if zetas.shape != (omegas.shape[0],):
            raise RejectedInputError("one zeta per trunk atom is required")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "zetas", zetas)
        object.__setattr__(self, "activation", Activation(self.activation))
        if self.mixing is not None:
            m = _frozen(self.mixing)
            if m.shape != (self.p, self.p):
                raise RejectedInputError(f"mixing matrix must be {self.p} x {self.p}")
            object.__setattr__(self, "mixing", m)

    @property
    def p(self):
        return self.omegas.shape[0]

    @property
    def d(self):
        return self.omegas.shape[1]

    def preactivations(self, ys):
        return _lincomb(ys, self.omegas) + self.zetas

    def features(self, ys) -> np.ndarray:
        """Rows ``T(y)`` for each row of ``ys``; shape (n, p)."""
        ys = np.asarray(ys, dtype=float).reshape(-1, self.d)
        t = self.activation(self.preactivations(ys))
        return t if self.mixing is None else _lincomb(t, self.mixing)

    def __call__(self, y):
        return self.features(np.atleast_1d(y).reshape(1, -1))[0]


@dataclass(frozen=True, eq=False)
class BranchNetwork:
    columns: tuple

    def __post_init__(self):
        cols = tuple(self.columns)
        if not cols:
            raise RejectedInputError("branch needs at least one column")
        space, m = cols[0].space, cols[0].output_dim
        for c in cols:
            if c.space != space:
                raise SpaceMismatchError("branch columns must share one space")
            if c.output_dim != m:
                raise RejectedInputError("branch columns must share one output dimension")
        object.__setattr__(self, "columns", cols)

    @property
    def space(self):
        return self.columns[0].space

    @property
    def output_dim(self):
        return self.columns[0].output_dim

    @property
    def p(self):
        return len(self.columns)

    def matrix(self, u: SpaceElement) -> np.ndarray:
        """The m x p matrix ``B(u)``."""
        return np.stack([forward(c, u) for c in self.columns], axis=1)

    def matrices(self, coeffs) -> np.ndarray:
        """Vectorized ``B`` over coefficient rows; shape (n, m, p), rounding-level agreement."""
        return np.stack([c.forward_coeffs(coeffs) for c in self.columns], axis=2)


@dataclass(frozen=True, eq=False)
class TopologicalDeepONet:
    branch: BranchNetwork
    trunk: TrunkNetwork
    domain: tuple

    def __post_init__(self):
        if self.branch.p != self.trunk.p:
            raise RejectedInputError(f"branch has p = {self.branch.p}, trunk has p = {self.trunk.p}")
        lo, hi = (_frozen(np.atleast_1d(v)) for v in self.domain)
        if lo.shape != (self.trunk.d,) or hi.shape != lo.shape or np.any(lo > hi):
            raise RejectedInputError("domain box must match the trunk input dimension")
        object.__setattr__(self, "domain", (lo, hi))

    @property
    def space(self):
        return self.branch.space

    @property
    def output_dim(self):
        return self.branch.output_dim

    @property
    def latent_dim(self):
        return self.trunk.p

    def __call__(self, u, y):
        return evaluate(self, u, y)


def _combine(b, t):
    """Rows ``B t_i`` for a single m x p matrix ``b`` and trunk rows ``t``."""
    return _lincomb(t, b)


def evaluate(model: TopologicalDeepONet, u: SpaceElement, y) -> np.ndarray:
    if u.space != model.space:
        raise SpaceMismatchError("element and model live in different spaces")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (model.trunk.d,):
        raise RejectedInputError(f"y must have {model.trunk.d} coordinates")
    return _combine(model.branch.matrix(u), model.trunk.features(y[None, :]))[0]


def evaluate_field(model: TopologicalDeepONet, u: SpaceElement, grid) -> np.ndarray:
    """``evaluate`` on every grid row, computing the trunk once."""
    if u.space != model.space:
        raise SpaceMismatchError("element and model live in different spaces")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        return np.empty((0, model.output_dim))
    grid = grid.reshape(-1, model.trunk.d)
    return _combine(model.branch.matrix(u), model.trunk.features(grid))


def separable_sum(model: TopologicalDeepONet, u: SpaceElement, y) -> np.ndarray:
    """``sum_k b_k(u) t_k(y)`` accumulated term by term in plain Python."""
    t = model.trunk(np.atleast_1d(y))
    out = np.zeros(model.output_dim)
    for col, tk in zip(model.branch.columns, t):
        out = out + forward(col, u) * tk
    return out


def tensor_grid(lo, hi, n):
    """Tensor-product grid with ``n`` points per axis over the box [lo, hi]."""
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)


@dataclass(frozen=True)
class ErrorReport:
    sup: float
    mean: float
    argmax_c: tuple
    argmax_y: tuple
    n_pairs: int

    def as_dict(self):
        return {"sup": self.sup, "mean": self.mean, "argmax_c": list(self.argmax_c),
                "argmax_y": list(self.argmax_y), "n_pairs": self.n_pairs}


def _reference_field(reference, u, ys, c):
    try:
        return np.asarray(reference.field(u, ys), dtype=float).reshape(len(ys), -1)
    except Exception as exc:
        for y in ys:
            try:
                reference.field(u, y[None, :])
            except Exception:
                raise OracleError(f"reference failed at c={np.asarray(c).tolist()}, y={y.tolist()}: {exc}",
                                  c=c, y=y) from exc
        raise OracleError(f"reference failed at c={np.asarray(c).tolist()}: {exc}", c=c) from exc


def sup_error(model, reference, family, u_samples, y_grid, workers: int = 1) -> ErrorReport:
    """Sup and mean over samples x grid of ``|G(u)(y) - model(u)(y)|_inf``.

    ``model`` and ``reference`` both expose ``field(u, ys)``-style evaluation:
    a TopologicalDeepONet is evaluated with ``evaluate_field``. ``u_samples``
    is a list of ``(c, element)`` pairs. Per-sample work may run on a thread
    pool; the reduction runs in sample order, so the report does not depend
    on ``workers``.
    """
    ys = np.asarray(y_grid, dtype=float)
    ys = ys.reshape(len(ys), -1)
    samples = list(u_samples)
    if not samples or ys.shape[0] == 0:
        raise RejectedInputError("sup_error needs at least one sample and one grid point")

    def model_field(u):
        if isinstance(model, TopologicalDeepONet):
            return evaluate_field(model, u, ys)
        return np.asarray(model.field(u, ys), dtype=float).reshape(len(ys), -1)

    def one(item):
        c, u = item
        diff = np.abs(_reference_field(reference, u, ys, c) - model_field(u))
        return diff.max(axis=1)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, samples))
    else:
        rows = [one(s) for s in samples]

    errs = np.stack(rows)
    flat = int(np.argmax(errs))
    i, j = divmod(flat, ys.shape[0])
    return ErrorReport(float(errs[i, j]), float(errs.mean()), tuple(np.asarray(samples[i][0], dtype=float).tolist()),
                       tuple(ys[j].tolist()), int(errs.size))
