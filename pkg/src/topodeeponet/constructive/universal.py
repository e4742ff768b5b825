"""Shallow topological networks approximating continuous maps on a compact family.

The construction runs in four stages:

1. draw functionals l_1..l_M (l_1 = 0, the rest seeded random directions
   rescaled so every l_i(V) lies in [-2, 2], with the range extent drawn
   from the levels 2 * 2**(-k/2), k = 0..6);
2. least-squares fit of ``g ~ sum_i alpha_i exp(l_i(u))`` on training samples
   to within eps/4 of the target (sampled sup), using the largest ridge
   penalty that gets there;
3. replace each ``exp`` by a ridge expansion on [a_i, b_i] accurate to
   ``eps / (2 (1 + sum_i |alpha_i|))``;
4. assemble the hidden units ``sigma(w_ij l_i(x) - theta_ij)`` into one
   shallow network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import RejectedInputError
from ..ridge1d import Activation, RidgeFit, approx_exp
from ..spaces import CompactFamily, DualFunctional, UniformRandom, sample_family
from ..toponet import FunctionalLayer, TopoNetwork

__all__ = [
    "ExpDictionary",
    "UniversalFit",
    "draw_dictionary",
    "build_universal_approximant",
    "fit_universal",
    "split_outputs",
    "RANGE_HALF_WIDTH",
    "RANGE_PADDING",
]

RANGE_HALF_WIDTH = 2.0
RANGE_PADDING = 0.05
SCALE_LEVELS = tuple(2.0 ** (-k / 2.0) for k in range(7))
PENALTY_PATH = tuple(10.0 ** -k for k in range(1, 16)) + (0.0,)
# unit realizing a constant: sigma(0 * x - CONST_BIAS) = sigma(1) != 0
CONST_BIAS = -1.0


@dataclass(frozen=True, eq=False)
class ExpDictionary:
    """Functionals (rows of ``weights``), their ranges on V and fitted alphas.

    ``alphas`` has shape (m, M), one row per output component.
    """

    family: CompactFamily
    weights: np.ndarray
    ranges: np.ndarray
    alphas: np.ndarray = field(default=None)

    @property
    def size(self):
        return self.weights.shape[0]

    def functionals(self):
        return [DualFunctional(self.family.space, w) for w in self.weights]

    def features(self, coeffs):
        eff = self.family.space.effective_weights(self.weights)
        return np.exp(np.asarray(coeffs) @ eff.T)


@dataclass(frozen=True, eq=False)
class UniversalFit:
    network: TopoNetwork
    achieved_error: float
    tolerance_met: bool
    dictionary: ExpDictionary
    alpha_error: float
    penalty: float
    exp_tolerance: float
    exp_fits: tuple
    seed: int
    achieved_errors: np.ndarray = None
    tolerances: np.ndarray = None

    @property
    def exp_errors(self):
        return [None if f is None else f.sup_error for f in self.exp_fits]

    def report(self):
        return {
            "dict_size": self.dictionary.size,
            "hidden_units": self.network.layer.width,
            "alpha_error": self.alpha_error,
            "alpha_l1": float(np.abs(self.dictionary.alphas).sum(axis=1).max()),
            "penalty": self.penalty,
            "exp_tolerance": self.exp_tolerance,
            "exp_max_error": max([e for e in self.exp_errors if e is not None], default=0.0),
            "achieved_error": self.achieved_error,
            "tolerance_met": self.tolerance_met,
            "seed": self.seed,
        }


def draw_dictionary(family: CompactFamily, size: int, seed: int) -> ExpDictionary:
    """``size`` functionals: the zero functional plus seeded random ones.

    Each random functional is rescaled so the larger endpoint of its exact
    range over the family box has magnitude ``2 * level`` for a random level
    in SCALE_LEVELS. Ranges are then padded by 5% of their width.
    """
    if size < 1:
        raise RejectedInputError("dictionary size must be >= 1")
    space = family.space
    rng = np.random.default_rng(seed)
    weights = [np.zeros(space.dim)]
    ranges = [(0.0, 0.0)]
    attempts = 0
    while len(weights) < size:
        attempts += 1
        w = rng.standard_normal(space.dim)
        lo, hi = family.functional_range(DualFunctional(space, w))
        extent = max(abs(lo), abs(hi))
        if extent == 0.0:
            if attempts > 10 * size:
                # every direction is constant on V (a zero-dimensional box)
                weights.append(w)
                ranges.append((0.0, 0.0))
            continue
        s = RANGE_HALF_WIDTH * SCALE_LEVELS[rng.integers(len(SCALE_LEVELS))] / extent
        weights.append(s * w)
        ranges.append((s * lo, s * hi))
    padded = []
    for lo, hi in ranges:
        pad = RANGE_PADDING * (hi - lo) if hi > lo else RANGE_PADDING * max(abs(lo), 1.0)
        padded.append((lo - pad, hi + pad))
    return ExpDictionary(family, np.array(weights), np.array(padded))


def _fit_alphas(features, targets, goals):
    """Ridge path: the largest penalty whose sampled sup error meets ``goals``.

    ``goals`` holds one sup-error goal per target column. Penalties are
    relative to the largest squared singular value; every penalty's fit comes
    from one SVD. Falls back to the penalty with the smallest worst ratio
    error/goal when none succeeds. Returns (alphas (m, M), errors (m,), penalty).
    """
    u, sv, vt = np.linalg.svd(features, full_matrices=False)
    uty = u.T @ targets
    top = sv[0] ** 2
    keep = sv > sv[0] * max(features.shape) * np.finfo(float).eps
    best = None
    for lam in PENALTY_PATH:
        filt = np.where(keep, sv / (sv ** 2 + lam * top), 0.0)
        a = vt.T @ (filt[:, None] * uty)
        errs = np.max(np.abs(features @ a - targets), axis=0)
        ratio = float(np.max(errs / goals))
        if ratio <= 1.0:
            return a.T, errs, lam
        if best is None or ratio < best[0]:
            best = (ratio, a.T, errs, lam)
    return best[1:]


def fit_universal(family: CompactFamily, train_coeffs, train_values, val_coeffs, val_values,
                  dict_size: int, tol, seed: int = 0,
                  activation=Activation.TANH) -> UniversalFit:
    """Array-level construction; values are (n, m) target matrices.

    ``tol`` is a scalar or one tolerance per output component. All outputs
    share the dictionary and the hidden layer.
    """
    activation = Activation(activation)
    train_values = np.asarray(train_values, dtype=float).reshape(len(train_coeffs), -1)
    val_values = np.asarray(val_values, dtype=float).reshape(len(val_coeffs), -1)
    m = train_values.shape[1]
    tols = np.broadcast_to(np.asarray(tol, dtype=float), (m,)).copy()
    if not np.all(tols > 0):
        raise RejectedInputError("tolerance must be positive")
    dictionary = draw_dictionary(family, dict_size, seed)

    feats = dictionary.features(train_coeffs)
    alphas, alpha_errs, lam = _fit_alphas(feats, train_values, tols / 4.0)
    l1 = np.abs(alphas).sum(axis=1)
    exp_tol = float(np.min(tols / (2.0 * (1.0 + l1))))

    space = family.space
    unit_weights, unit_bias, out_cols, exp_fits = [], [], [], []
    const_unit = float(activation(np.array(-CONST_BIAS)))
    for i in range(dictionary.size):
        col_alpha = alphas[:, i]
        lo, hi = dictionary.ranges[i]
        if not np.any(dictionary.weights[i]):
            exp_fits.append(None)
            unit_weights.append(np.zeros(space.dim))
            unit_bias.append(CONST_BIAS)
            out_cols.append(col_alpha / const_unit)
            continue
        if not np.any(col_alpha):
            exp_fits.append(None)
            continue
        fit: RidgeFit = approx_exp((lo, hi), activation, exp_tol)
        exp_fits.append(fit)
        e = fit.expansion
        for c, w, th in zip(e.coeffs, e.slopes, e.offsets):
            unit_weights.append(w * dictionary.weights[i])
            unit_bias.append(th)
            out_cols.append(col_alpha * c)

    layer = FunctionalLayer(space, np.array(unit_weights), np.array(unit_bias))
    net = TopoNetwork(layer, np.array(out_cols).T, (), activation)
    dictionary = ExpDictionary(family, dictionary.weights, dictionary.ranges, alphas)

    pred = net.forward_coeffs(val_coeffs)
    achieved = np.max(np.abs(pred - val_values), axis=0) if len(val_values) else np.zeros(m)
    return UniversalFit(net, float(achieved.max()), bool(np.all(achieved <= tols)), dictionary,
                        float(alpha_errs.max()), lam, exp_tol, tuple(exp_fits), seed,
                        achieved, tols)


def build_universal_approximant(target, family: CompactFamily, dict_size: int, tol: float, *,
                                seed: int = 0, n_train: int = 2000, validation=None,
                                activation=Activation.TANH) -> UniversalFit:
    """Shallow network H with sup |target - H| <= tol on held-out samples of V.

    ``target`` maps a SpaceElement to a scalar or m-vector. ``validation`` is a
    list of ``(c, element)`` pairs (default: 2000 fresh random samples).
    A zero-dimensional box degenerates to a constant fit. ``tol`` may hold
    one tolerance per output component.
    """
    train = sample_family(family, UniformRandom(n_train, seed))
    if validation is None:
        validation = sample_family(family, UniformRandom(2000, seed + 1))

    def values(samples):
        return np.array([np.atleast_1d(np.asarray(target(u), dtype=float)) for _, u in samples])

    tc = np.stack([u.coeffs for _, u in train])
    vc = np.stack([u.coeffs for _, u in validation])
    return fit_universal(family, tc, values(train), vc, values(validation), dict_size, tol, seed, activation)


def split_outputs(net: TopoNetwork, rows) -> TopoNetwork:
    """The sub-network computing the output components listed in ``rows``.

    Hidden units with all-zero output weights for those rows are dropped.
    """
    out = net.output[list(rows)]
    keep = np.any(out != 0.0, axis=0)
    if not np.any(keep):
        keep[0] = True
    layer = FunctionalLayer(net.space, net.layer.weights[keep], net.layer.biases[keep])
    return TopoNetwork(layer, out[:, keep], (), net.activation)
