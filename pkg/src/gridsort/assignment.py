"""Linear assignment: minimum-cost bijection between inputs and map slots."""

from __future__ import annotations

from itertools import permutations

import numpy as np

from . import _backend
from .core import InvalidInputError

EXHAUSTIVE_LIMIT = 4


def _check_costs(costs) -> np.ndarray:
    c = np.asarray(costs, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InvalidInputError(f"cost matrix must be square, got shape {c.shape}")
    if c.shape[0] < 1:
        raise InvalidInputError("cost matrix must be at least 1x1")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("cost matrix has NaN or infinite entries")
    if (c < 0).any():
        raise InvalidInputError("cost matrix has negative entries")
    return np.ascontiguousarray(c)


def assignment_cost(costs: np.ndarray, perm: np.ndarray) -> float:
    """Sum of ``costs[i, perm[i]]`` accumulated in row order."""
    total = 0.0
    for i, j in enumerate(perm):
        total += float(costs[i, j])
    return total


def solve_lap(costs, backend: str | None = None) -> tuple[np.ndarray, float]:
    """Exact minimum-cost assignment.

    Returns ``(perm, cost)`` where row ``i`` is assigned column ``perm[i]``.
    """
    c = _check_costs(costs)
    perm = np.asarray(_backend.get(backend).lapjv(c), dtype=np.int64)
    return perm, assignment_cost(c, perm)


def build_cost_matrix(inputs, map_slots, q: float = 2.0) -> np.ndarray:
    """``costs[i, j] = ||inputs[i] - map_slots[j]|| ** q``; no square root for q=2."""
    x = np.asarray(inputs, dtype=np.float64)
    m = np.asarray(map_slots, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if m.ndim == 1:
        m = m[:, None]
    if x.shape[1] != m.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {x.shape[1]} vs {m.shape[1]}")
    if x.shape[0] != m.shape[0]:
        raise InvalidInputError(f"count mismatch: {x.shape[0]} inputs vs {m.shape[0]} slots")
    if not q > 0:
        raise InvalidInputError("cost exponent q must be positive")
    sq = np.zeros((x.shape[0], m.shape[0]))
    for e in range(x.shape[1]):
        diff = x[:, e][:, None] - m[:, e][None, :]
        sq += diff * diff
    if q == 2:
        return sq
    return np.sqrt(sq) ** q


def best_permutation_small(inputs, targets, q: float = 2.0, backend: str | None = None) -> tuple[tuple[int, ...], float]:
    """Optimal input-to-target permutation for a small candidate set.

    Up to four items are scanned exhaustively in lexicographic order, so the
    lowest-lexicographic optimum wins ties. Larger sets go through the solver.
    """
    costs = build_cost_matrix(inputs, targets, q)
    n = costs.shape[0]
    if n <= EXHAUSTIVE_LIMIT:
        best, best_cost = None, np.inf
        for perm in permutations(range(n)):
            total = assignment_cost(costs, perm)
            if total < best_cost:
                best, best_cost = perm, total
        return tuple(best), best_cost
    perm, total = solve_lap(costs, backend=backend)
    return tuple(int(p) for p in perm), total
