"""One-dimensional ridge expansions ``t -> sum_j c_j * sigma(w_j * t - theta_j)``.

Fits select terms greedily from a fixed dictionary: slopes ``w`` are powers of
two between ``1/(b-a)`` and ``64/(b-a)`` (both signs), and offsets are chosen
so the activation transition points ``theta/w`` tile ``[a, b]``.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import RejectedInputError

__all__ = [
    "Activation",
    "Ridge1DExpansion",
    "RidgeFit",
    "fit_ridge_1d",
    "approx_exp",
    "eval_expansion",
    "ridge_dictionary",
    "greedy_least_squares",
    "VALIDATION_POINTS",
]

VALIDATION_POINTS = 10_000
FIT_POINTS_PER_TERM = 64
N_SLOPES = 7
N_CENTERS = 33
APPROX_EXP_BUDGET = 128
CHECK_EVERY = 4


class Activation(str, enum.Enum):
    TANH = "tanh"
    RELU = "relu"
    SIGMOID = "sigmoid"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self is Activation.TANH:
            return np.tanh(x)
        if self is Activation.RELU:
            return np.maximum(x, 0.0)
        # split by sign so exp never overflows
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self is Activation.TANH:
            t = np.tanh(x)
            return 1.0 - t * t
        if self is Activation.RELU:
            return (x > 0).astype(float)
        s = self(x)
        return s * (1.0 - s)


@dataclass(frozen=True, eq=False)
class Ridge1DExpansion:
    activation: Activation
    coeffs: np.ndarray
    slopes: np.ndarray
    offsets: np.ndarray
    interval: tuple

    def __post_init__(self):
        object.__setattr__(self, "activation", Activation(self.activation))
        for name in ("coeffs", "slopes", "offsets"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not (self.coeffs.size == self.slopes.size == self.offsets.size):
            raise RejectedInputError("coefficient, slope and offset arrays must have equal length")
        a, b = (float(v) for v in self.interval)
        if not a < b:
            raise RejectedInputError(f"interval must satisfy a < b, got {self.interval}")
        object.__setattr__(self, "interval", (a, b))

    @property
    def n_terms(self):
        return self.coeffs.size

    def __call__(self, t):
        return eval_expansion(self, t)

    def pruned(self):
        keep = self.coeffs != 0.0
        return Ridge1DExpansion(self.activation, self.coeffs[keep], self.slopes[keep],
                                self.offsets[keep], self.interval)


@dataclass(frozen=True)
class RidgeFit:
    expansion: Ridge1DExpansion
    sup_error: float
    tolerance_met: bool


def eval_expansion(exp: Ridge1DExpansion, t):
    """``sum_j c_j * sigma(w_j * t - theta_j)``; scalar in, scalar out."""
    t_arr = np.asarray(t, dtype=float)
    if exp.n_terms == 0:
        out = np.zeros_like(t_arr)
    else:
        pre = np.multiply.outer(t_arr, exp.slopes) - exp.offsets
        out = exp.activation(pre) @ exp.coeffs
    return float(out) if out.ndim == 0 else out


def ridge_dictionary(interval, n_slopes=N_SLOPES, n_centers=N_CENTERS):
    """Candidate ``(slopes, offsets)`` arrays for an interval."""
    a, b = interval
    length = b - a
    mags = 2.0 ** np.arange(n_slopes) / length
    centers = np.linspace(a, b, n_centers)
    w = np.concatenate([mags, -mags])
    ww, cc = np.meshgrid(w, centers, indexing="ij")
    return ww.ravel(), (ww * cc).ravel()


def greedy_least_squares(features, target, budget, tol, val_features=None, val_target=None, seed_atoms=()):
    """Greedy orthogonal least squares over the columns of ``features``.

    ``target`` is (n_points,) or (n_points, n_targets); several targets share
    one atom set. Each step adds the atom whose component orthogonal to the
    current selection removes the most residual energy, summed over targets.
    Candidates stay orthogonalized against the selection (classical
    Gram-Schmidt applied twice). Prefixes are scored on the validation data
    with an SVD least-squares refit whenever the fit-grid residual reaches
    ``tol`` and every ``CHECK_EVERY`` steps. Stops once a scored prefix meets
    ``tol``. Columns listed in ``seed_atoms`` are selected first, in order.

    Returns ``(indices, coefficients, sup_error)`` for the best prefix seen.
    """
    y = np.asarray(target, dtype=float)
    single = y.ndim == 1
    if single:
        y = y[:, None]
    if val_features is None:
        val_features, val_target = features, y
    else:
        val_target = np.asarray(val_target, dtype=float)
        if val_target.ndim == 1:
            val_target = val_target[:, None]

    n, n_atoms = features.shape
    budget = min(int(budget), n_atoms, n)
    col_sq = np.einsum("ij,ij->j", features, features)
    atoms = features.copy()
    residual = y.copy()
    chosen = []

    def score_prefix(k):
        coef = np.linalg.lstsq(features[:, chosen[:k]], y, rcond=None)[0]
        return coef, _sup(val_features[:, chosen[:k]] @ coef - val_target)

    best_k, best_coef, best_err = 0, np.zeros((0, y.shape[1])), _sup(val_target)
    seeds = list(seed_atoms)
    while best_err > tol and len(chosen) < budget:
        nr = np.einsum("ij,ij->j", atoms, atoms)
        ok = nr > 1e-20 * col_sq
        ok[chosen] = False
        if seeds:
            j = int(seeds.pop(0))
            if not ok[j]:
                continue
        else:
            if not np.any(ok):
                break
            proj = atoms[:, ok].T @ residual
            score = np.full(n_atoms, -1.0)
            score[ok] = np.einsum("ij,ij->i", proj, proj) / nr[ok]
            j = int(np.argmax(score))
            if score[j] <= 0.0:
                break
        q = atoms[:, j] / np.sqrt(nr[j])
        residual -= np.outer(q, q @ residual)
        for _ in range(2):
            atoms -= np.outer(q, q @ atoms)
        chosen.append(j)

        # the orthogonal residual is the fit-grid error; refit only at checkpoints
        k = len(chosen)
        if _sup(residual) <= tol or k % CHECK_EVERY == 0 or k == budget:
            coef, err = score_prefix(k)
            if err < best_err:
                best_k, best_coef, best_err = k, coef, err
    if len(chosen) > best_k and best_err > tol:
        coef, err = score_prefix(len(chosen))
        if err < best_err:
            best_k, best_coef, best_err = len(chosen), coef, err
    idx = chosen[:best_k]
    return idx, (best_coef[:, 0] if single else best_coef), best_err


def _sup(r):
    r = np.asarray(r)
    return float(np.max(np.abs(r))) if r.size else 0.0


def fit_ridge_1d(target, interval, activation=Activation.TANH, budget=32, tol=1e-3,
                 extra_candidates=None) -> RidgeFit:
    """Fit ``target`` on ``[a, b]`` with at most ``budget`` ridge terms.

    ``target`` is a vectorized callable. The reported error is the sup over a
    10**4-point validation grid, recomputed from the returned expansion.
    If ``tol`` is not reached the best expansion found is returned with
    ``tolerance_met=False``.

    ``extra_candidates`` is an optional ``(k, 2)`` array of ``(slope, offset)``
    pairs added in front of the default dictionary. They seed the greedy
    selection (up to ``budget`` of them), so a target lying in their span is
    reproduced to rounding.
    """
    a, b = (float(v) for v in interval)
    if not a < b:
        raise RejectedInputError(f"interval must satisfy a < b, got {(a, b)}")
    if budget < 1:
        raise RejectedInputError("budget must be >= 1")
    activation = Activation(activation)

    t_fit = np.linspace(a, b, FIT_POINTS_PER_TERM * budget)
    t_val = np.linspace(a, b, VALIDATION_POINTS)
    y_fit = np.asarray(target(t_fit), dtype=float)
    y_val = np.asarray(target(t_val), dtype=float)
    if not (np.all(np.isfinite(y_fit)) and np.all(np.isfinite(y_val))):
        raise RejectedInputError("target is not finite on the interval")

    w, th = ridge_dictionary((a, b))
    if extra_candidates is not None:
        extra = np.asarray(extra_candidates, dtype=float).reshape(-1, 2)
        w = np.concatenate([extra[:, 0], w])
        th = np.concatenate([extra[:, 1], th])
    phi_fit = activation(np.multiply.outer(t_fit, w) - th)
    phi_val = activation(np.multiply.outer(t_val, w) - th)

    n_seed = 0 if extra_candidates is None else min(len(extra), budget)
    idx, coef, _ = greedy_least_squares(phi_fit, y_fit, budget, tol, phi_val, y_val, seed_atoms=range(n_seed))
    exp = Ridge1DExpansion(activation, coef, w[idx], th[idx], (a, b))
    err = _sup(np.asarray(eval_expansion(exp, t_val)) - y_val)
    return RidgeFit(exp, err, err <= tol)


_exp_cache: dict = {}
_exp_lock = threading.Lock()
TOL_STEPS_PER_DECADE = 8


def _tolerance_floor(tol):
    """Largest ``10**(-k/8)`` not above ``tol``; a fit meeting it meets ``tol``."""
    k = math.ceil(-TOL_STEPS_PER_DECADE * math.log10(tol) - 1e-9)
    return 10.0 ** (-k / TOL_STEPS_PER_DECADE)


def _centered_exp(half, activation, tol):
    key = (half, activation, tol)
    with _exp_lock:
        hit = _exp_cache.get(key)
    if hit is not None:
        return hit
    fit = fit_ridge_1d(np.exp, (-half, half), activation, APPROX_EXP_BUDGET, tol)
    with _exp_lock:
        return _exp_cache.setdefault(key, fit)


def approx_exp(interval, activation=Activation.TANH, tol=1e-3) -> RidgeFit:
    """Ridge approximation of ``exp`` on ``[a, b]`` with sup error <= tol.

    Uses ``exp(t) = exp(m) * exp(t - m)`` with ``m`` the midpoint: the fit is
    done once on ``[-h, h]`` (cached per half-width, activation and a
    tolerance rounded down to a fixed grid) and shifted into place. The
    returned error is re-measured on ``[a, b]``.
    """
    a, b = (float(v) for v in interval)
    if not a < b:
        raise RejectedInputError(f"interval must satisfy a < b, got {(a, b)}")
    if not tol > 0:
        raise RejectedInputError("tol must be positive")
    activation = Activation(activation)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    scale = math.exp(mid)
    base = _centered_exp(half, activation, _tolerance_floor(tol / scale)).expansion
    exp = Ridge1DExpansion(activation, scale * base.coeffs, base.slopes,
                           base.offsets + base.slopes * mid, (a, b))
    t_val = np.linspace(a, b, VALIDATION_POINTS)
    err = _sup(eval_expansion(exp, t_val) - np.exp(t_val))
    return RidgeFit(exp, err, err <= tol)
