"""Gradient training of topological DeepONets on sampled operator data.

Gradients of the mean squared error are computed by hand (reverse mode over
the branch columns and the trunk). The optimizer is Adam with

    m <- b1 m + (1 - b1) g,    v <- b2 v + (1 - b2) g**2
    theta <- theta - lr_t * (m / (1 - b1**t)) / (sqrt(v / (1 - b2**t)) + eps)

where ``lr_t = learning_rate * decay**epoch``, b1 = 0.9, b2 = 0.999 and
eps = 1e-8.

Parameter vectors of a DeepONet concatenate ``parameter_vector`` of every
branch column (in column order), then the trunk omegas (row-major), zetas
and, when present, the mixing matrix (row-major).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .deeponet import BranchNetwork, TopologicalDeepONet, TrunkNetwork
from .errors import OracleError, RejectedInputError, SpaceMismatchError
from .ridge1d import Activation
from .spaces import CompactFamily, SpaceElement, UniformRandom, sample_family
from .toponet import FunctionalLayer, TopoNetwork, parameter_vector, random_network, with_parameters

__all__ = [
    "OperatorDataset",
    "TrainConfig",
    "TrainResult",
    "generate_dataset",
    "train",
    "gradient_check",
    "mse_and_gradient",
    "deeponet_parameters",
    "deeponet_with_parameters",
    "random_deeponet",
    "predict",
]

TRAIN = "train"
VALIDATION = "validation"


@dataclass(frozen=True, eq=False)
class OperatorDataset:
    """Targets ``g[i, j] = G(u_i)(y_j)`` on a shared y-grid, split by element."""

    family: CompactFamily
    params: np.ndarray
    coeffs: np.ndarray
    ys: np.ndarray
    targets: np.ndarray
    split: tuple
    seed: int = 0
    oracle_kind: str = ""

    @property
    def space(self):
        return self.family.space

    def indices(self, tag):
        return np.array([i for i, s in enumerate(self.split) if s == tag], dtype=int)

    @property
    def train_index(self):
        return self.indices(TRAIN)

    @property
    def validation_index(self):
        return self.indices(VALIDATION)

    def records(self, tag=None):
        """Flat ``(c, u, y, g, split)`` records, element-major."""
        out = []
        for i, s in enumerate(self.split):
            if tag is not None and s != tag:
                continue
            u = SpaceElement(self.space, self.coeffs[i])
            for j, y in enumerate(self.ys):
                out.append((self.params[i], u, y, self.targets[i, j], s))
        return out

    def subset(self, index):
        index = np.asarray(index, dtype=int)
        return OperatorDataset(self.family, self.params[index], self.coeffs[index], self.ys,
                               self.targets[index], tuple(self.split[i] for i in index), self.seed,
                               self.oracle_kind)


def generate_dataset(oracle, family: CompactFamily, n_u: int, y_grid, seed: int,
                     split_ratio: float = 0.8) -> OperatorDataset:
    """Sample ``n_u`` elements, evaluate the oracle on ``y_grid`` and split.

    A seeded permutation assigns ``round(split_ratio * n_u)`` elements (kept
    within [1, n_u - 1]) to training and the rest to validation.
    """
    if n_u < 2:
        raise RejectedInputError("n_u must be >= 2")
    ys = np.asarray(y_grid, dtype=float)
    ys = ys.reshape(len(ys), -1) if ys.size else ys
    if ys.size == 0:
        raise RejectedInputError("y grid must be nonempty")
    if oracle.space != family.space:
        raise SpaceMismatchError("oracle and family live in different spaces")
    samples = sample_family(family, UniformRandom(n_u, seed))
    targets = []
    for c, u in samples:
        try:
            targets.append(oracle.field(u, ys))
        except Exception as exc:
            raise OracleError(f"oracle failed at c={np.asarray(c).tolist()}: {exc}", c=c) from exc
    n_train = int(min(max(round(split_ratio * n_u), 1), n_u - 1))
    order = np.random.default_rng(seed).permutation(n_u)
    split = [VALIDATION] * n_u
    for i in order[:n_train]:
        split[i] = TRAIN
    return OperatorDataset(family, np.stack([c for c, _ in samples]), np.stack([u.coeffs for _, u in samples]),
                           ys, np.stack(targets), tuple(split), seed, oracle.kind.value)


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    epochs: int = 200
    batch_size: int = 16
    learning_rate: float = 1e-3
    decay: float = 1.0
    freeze_functionals: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0 or not self.decay > 0:
            raise RejectedInputError("epochs and batch_size must be >= 1, learning_rate and decay > 0")


@dataclass
class TrainResult:
    model: TopologicalDeepONet
    history: list
    best_epoch: int
    diverged: bool = False
    notes: list = field(default_factory=list)


# -- parameter plumbing -------------------------------------------------------


def deeponet_parameters(model: TopologicalDeepONet) -> np.ndarray:
    parts = [parameter_vector(c) for c in model.branch.columns]
    parts += [model.trunk.omegas.ravel(), model.trunk.zetas]
    if model.trunk.mixing is not None:
        parts.append(model.trunk.mixing.ravel())
    return np.concatenate(parts)


def deeponet_with_parameters(model: TopologicalDeepONet, v) -> TopologicalDeepONet:
    v = np.asarray(v, dtype=float)
    pos = 0
    cols = []
    for c in model.branch.columns:
        n = c.n_parameters
        cols.append(with_parameters(c, v[pos:pos + n]))
        pos += n
    t = model.trunk
    omegas = v[pos:pos + t.omegas.size].reshape(t.omegas.shape)
    pos += t.omegas.size
    zetas = v[pos:pos + t.p]
    pos += t.p
    mixing = None
    if t.mixing is not None:
        mixing = v[pos:pos + t.mixing.size].reshape(t.mixing.shape)
        pos += t.mixing.size
    if pos != v.size:
        raise RejectedInputError(f"expected {pos} parameters, got {v.size}")
    return TopologicalDeepONet(BranchNetwork(tuple(cols)), TrunkNetwork(omegas, zetas, t.activation, mixing),
                               model.domain)


def random_deeponet(space, p: int, branch_widths, output_dim: int, domain, rng,
                    activation=Activation.TANH, mixing: bool = True) -> TopologicalDeepONet:
    """Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization."""
    lo, hi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in domain)
    d = lo.size
    cols = tuple(random_network(space, branch_widths, output_dim, rng, activation) for _ in range(p))
    s = 1.0 / np.sqrt(d)
    omegas = rng.uniform(-s, s, (p, d))
    zetas = rng.uniform(-s, s, p)
    mix = rng.uniform(-1.0 / np.sqrt(p), 1.0 / np.sqrt(p), (p, p)) if mixing else None
    return TopologicalDeepONet(BranchNetwork(cols), TrunkNetwork(omegas, zetas, activation, mix), (lo, hi))


# -- forward / backward ------------------------------------------------------


def _column_forward(net: TopoNetwork, coeffs):
    act = net.activation
    pres = [coeffs @ net.layer.effective.T - net.layer.biases]
    zs = [act(pres[0])]
    for a, b in net.hidden:
        pres.append(zs[-1] @ a.T - b)
        zs.append(act(pres[-1]))
    return zs[-1] @ net.output.T, (pres, zs)


def _column_backward(net: TopoNetwork, coeffs, cache, d_out):
    act = net.activation
    pres, zs = cache
    d_output = d_out.T @ zs[-1]
    dz = d_out @ net.output
    hidden_grads = []
    for l in range(len(net.hidden) - 1, -1, -1):
        a, _ = net.hidden[l]
        dpre = dz * act.derivative(pres[l + 1])
        hidden_grads.append((dpre.T @ zs[l], -dpre.sum(axis=0)))
        dz = dpre @ a
    hidden_grads.reverse()
    dpre = dz * act.derivative(pres[0])
    d_weights = net.space.effective_weights(dpre.T @ coeffs)
    parts = [np.asarray(d_weights).ravel(), -dpre.sum(axis=0)]
    for da, db in hidden_grads:
        parts += [da.ravel(), db]
    parts.append(d_output.ravel())
    return np.concatenate(parts)


def predict(model: TopologicalDeepONet, coeffs, ys) -> np.ndarray:
    """Vectorized ``G_hat(u_i)(y_j)``; shape (n, n_grid, m)."""
    b = model.branch.matrices(coeffs)
    t = model.trunk.features(ys)
    return np.einsum("nrk,gk->ngr", b, t)


def mse_and_gradient(model: TopologicalDeepONet, coeffs, ys, targets, freeze_functionals=False):
    """Mean squared error over all (element, point, component) entries and its gradient."""
    coeffs = np.asarray(coeffs, dtype=float)
    cols = model.branch.columns
    outs, caches = zip(*[_column_forward(c, coeffs) for c in cols])
    b = np.stack(outs, axis=2)
    trunk = model.trunk
    pre_t = ys @ trunk.omegas.T + trunk.zetas
    t_raw = trunk.activation(pre_t)
    t = t_raw if trunk.mixing is None else t_raw @ trunk.mixing.T
    pred = np.einsum("nrk,gk->ngr", b, t)
    resid = pred - targets
    count = resid.size
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(np.sum(resid * resid) / count)

    d_pred = 2.0 * resid / count
    d_b = np.einsum("ngr,gk->nrk", d_pred, t)
    d_t = np.einsum("ngr,nrk->gk", d_pred, b)
    grads = []
    for k, col in enumerate(cols):
        g = _column_backward(col, coeffs, caches[k], d_b[:, :, k])
        if freeze_functionals:
            g[:col.layer.weights.size] = 0.0
        grads.append(g)
    d_mix = None
    if trunk.mixing is not None:
        d_mix = d_t.T @ t_raw
        d_t = d_t @ trunk.mixing
    d_pre = d_t * trunk.activation.derivative(pre_t)
    grads += [(d_pre.T @ ys).ravel(), d_pre.sum(axis=0)]
    if d_mix is not None:
        grads.append(d_mix.ravel())
    return loss, np.concatenate(grads)


def _mse(model, coeffs, ys, targets):
    if len(coeffs) == 0:
        return float("nan")
    r = predict(model, coeffs, ys) - targets
    return float(np.mean(r * r))


def train(model: TopologicalDeepONet, dataset: OperatorDataset, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Adam on minibatches of elements (each with the full y-grid).

    History rows hold the epoch's train and validation MSE of the current
    parameters. The returned model carries the parameters with the lowest
    validation MSE seen (train MSE when the validation split is empty). A
    non-finite loss aborts training and returns the best finite state with
    ``diverged=True``.
    """
    if model.space != dataset.space:
        raise SpaceMismatchError("model and dataset live in different spaces")
    rng = np.random.default_rng(config.seed)
    tr, va = dataset.train_index, dataset.validation_index
    ys = dataset.ys
    theta = deeponet_parameters(model)
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    step = 0
    history = []
    best = (np.inf, theta.copy(), 0)
    diverged = False
    for epoch in range(config.epochs):
        lr = config.learning_rate * config.decay ** epoch
        order = rng.permutation(tr)
        for start in range(0, order.size, config.batch_size):
            batch = order[start:start + config.batch_size]
            current = deeponet_with_parameters(model, theta)
            loss, grad = mse_and_gradient(current, dataset.coeffs[batch], ys, dataset.targets[batch],
                                          config.freeze_functionals)
            if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
                diverged = True
                break
            step += 1
            m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad
            m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad * grad
            m_hat = m1 / (1.0 - config.beta1 ** step)
            v_hat = m2 / (1.0 - config.beta2 ** step)
            theta = theta - lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
        if diverged:
            break
        current = deeponet_with_parameters(model, theta)
        train_mse = _mse(current, dataset.coeffs[tr], ys, dataset.targets[tr])
        val_mse = _mse(current, dataset.coeffs[va], ys, dataset.targets[va])
        if not (np.isfinite(train_mse) and (va.size == 0 or np.isfinite(val_mse))):
            diverged = True
            break
        # without a validation split the checkpoint follows the train MSE
        score = val_mse if va.size else train_mse
        if score < best[0]:
            best = (score, theta.copy(), epoch + 1)
        history.append({"epoch": epoch + 1, "train_mse": train_mse, "validation_mse": val_mse,
                        "best_validation_mse": best[0], "learning_rate": lr})
    if not np.isfinite(best[0]):
        # no epoch finished: keep the starting parameters
        best = (np.nan, deeponet_parameters(model), 0)
    notes = ["non-finite loss; returned the best finite state"] if diverged else []
    return TrainResult(deeponet_with_parameters(model, best[1]), history, best[2], diverged, notes)


def _kink_free(model, coeffs, ys, guard):
    """Boolean masks of elements and points whose preactivations avoid |pre| <= guard."""
    u_ok = np.ones(len(coeffs), dtype=bool)
    for col in model.branch.columns:
        _, (pres, _) = _column_forward(col, coeffs)
        for p in pres:
            u_ok &= np.all(np.abs(p) > guard, axis=1)
    pre_t = ys @ model.trunk.omegas.T + model.trunk.zetas
    y_ok = np.all(np.abs(pre_t) > guard, axis=1)
    return u_ok, y_ok


def gradient_check(model: TopologicalDeepONet, dataset: OperatorDataset, eps_fd: float = 1e-6,
                   index=None, guard: float = 1e-3) -> float:
    """Max relative deviation between the analytic MSE gradient and central differences.

    ``index`` selects elements (default: all). For relu models only elements
    and points whose preactivations all exceed ``guard`` in magnitude are
    used. The deviation of component i is
    ``|a_i - f_i| / max(|a_i|, |f_i|, 1e-4 * max|a|, 1e-12)``.
    """
    if not 1e-7 <= eps_fd <= 1e-4:
        raise RejectedInputError("eps_fd must lie in [1e-7, 1e-4]")
    index = dataset.train_index if index is None else np.asarray(index, dtype=int)
    if index.size == 0:
        raise RejectedInputError("gradient check needs a nonempty slice")
    coeffs, ys, targets = dataset.coeffs[index], dataset.ys, dataset.targets[index]
    if model.trunk.activation is Activation.RELU or any(c.activation is Activation.RELU
                                                         for c in model.branch.columns):
        u_ok, y_ok = _kink_free(model, coeffs, ys, guard)
        if not (np.any(u_ok) and np.any(y_ok)):
            raise RejectedInputError("no kink-free elements or points in the slice")
        coeffs, ys, targets = coeffs[u_ok], ys[y_ok], targets[u_ok][:, y_ok]
    _, grad = mse_and_gradient(model, coeffs, ys, targets)
    theta = deeponet_parameters(model)
    fd = np.empty_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += eps_fd
        down[i] -= eps_fd
        fd[i] = (_mse(deeponet_with_parameters(model, up), coeffs, ys, targets)
                 - _mse(deeponet_with_parameters(model, down), coeffs, ys, targets)) / (2.0 * eps_fd)
    scale = np.maximum.reduce([np.abs(grad), np.abs(fd), np.full_like(grad, 1e-4 * np.max(np.abs(grad))),
                               np.full_like(grad, 1e-12)])
    return float(np.max(np.abs(grad - fd) / scale))
