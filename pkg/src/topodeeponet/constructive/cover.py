"""Greedy delta-nets of sampled output functions and hat partitions of unity.

Output functions ``h = G(u)`` are arrays of values on a fixed y-grid, shape
(n_grid, m); the distance between two of them is the max over the grid of
the sup norm on R^m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CoverError, RejectedInputError

__all__ = ["Cover", "cover_image", "grid_distance", "partition_of_unity", "partition_weights"]


def grid_distance(h, reps) -> np.ndarray:
    """Distances from one function ``h`` (n_grid, m) to each of ``reps`` (M, n_grid, m)."""
    reps = np.asarray(reps, dtype=float)
    if reps.shape[0] == 0:
        return np.empty(0)
    diff = np.abs(reps - np.asarray(h, dtype=float)[None])
    return diff.reshape(reps.shape[0], -1).max(axis=1)


@dataclass(frozen=True, eq=False)
class Cover:
    representatives: np.ndarray
    indices: tuple
    delta: float

    @property
    def size(self):
        return len(self.indices)


def _as_functions(samples):
    h = np.asarray(samples, dtype=float)
    if h.ndim == 2:
        h = h[:, :, None]
    if h.ndim != 3 and h.size:
        raise RejectedInputError("samples must be an (n, n_grid) or (n, n_grid, m) array")
    return h


def cover_image(samples, delta: float) -> Cover:
    """Greedy delta-net in sample order.

    A sample becomes a representative when it lies farther than ``delta``
    from every earlier representative, so every sample ends up within delta
    of some representative and representatives are pairwise > delta apart.
    """
    if not delta > 0:
        raise RejectedInputError("delta must be positive")
    h = _as_functions(samples)
    if h.size == 0:
        return Cover(np.empty((0,) + h.shape[1:]), (), float(delta))
    flat = h.reshape(h.shape[0], -1)
    chosen = [0]
    nearest = np.max(np.abs(flat - flat[0]), axis=1)
    while True:
        far = np.nonzero(nearest > delta)[0]
        if far.size == 0:
            break
        j = int(far[0])
        chosen.append(j)
        nearest = np.minimum(nearest, np.max(np.abs(flat - flat[j]), axis=1))
    return Cover(h[chosen].copy(), tuple(chosen), float(delta))


def partition_of_unity(representatives, delta: float, h) -> np.ndarray:
    """Hat weights ``eta_j = psi_j / sum_k psi_k`` with ``psi_j = max(0, 2 delta - dist_j)``."""
    reps = _as_functions(representatives)
    h = np.asarray(h, dtype=float).reshape(reps.shape[1:])
    psi = np.maximum(0.0, 2.0 * delta - grid_distance(h, reps))
    total = psi.sum()
    if not total > 0.0:
        raise CoverError(f"function is at least 2*delta = {2 * delta:g} from every representative "
                         f"(nearest distance {grid_distance(h, reps).min():g})")
    return psi / total


def partition_weights(representatives, delta: float, samples) -> np.ndarray:
    """``partition_of_unity`` for every sample; shape (n, M)."""
    h = _as_functions(samples)
    out = np.empty((h.shape[0], len(representatives)))
    for i, hi in enumerate(h):
        try:
            out[i] = partition_of_unity(representatives, delta, hi)
        except CoverError as exc:
            raise CoverError(f"sample {i}: {exc}") from exc
    return out
