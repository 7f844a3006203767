"""Slow, independent reference implementations used only by the test suite.

Everything here is written from first principles: exhaustive grid search for
the l1-penalized least squares problem, Gaussian elimination for least
squares, and a quadratic-time mode finder.  Nothing in this module calls the
production code, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import BudgetError, DimensionError

GRID_BUDGET = 100_000_000


@dataclass(frozen=True)
class GridSpec:
    low: float = -3.0
    high: float = 3.0
    pitch: float = 1e-3

    def axis(self) -> np.ndarray:
        count = int(round((self.high - self.low) / self.pitch)) + 1
        return self.low + self.pitch * np.arange(count)


def oracle_lasso(X: np.ndarray, y: np.ndarray, lam: float,
                 grid: GridSpec = GridSpec()) -> np.ndarray:
    """Exhaustive grid minimizer of |y - Xb|^2 / n + 2 lam |b|_1.

    Only feasible for very small column counts; raises BudgetError when the
    grid would exceed GRID_BUDGET points.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, s = X.shape
    axis = grid.axis()
    if len(axis) ** s > GRID_BUDGET:
        raise BudgetError(
            f"grid of {len(axis)}^{s} points exceeds the {GRID_BUDGET} budget")

    # The objective decomposes over the Gram matrix:
    #   |y - Xb|^2 = y'y - 2 b'X'y + b'X'Xb
    # so we never materialize n-length residuals for every grid point.
    G = X.T @ X
    c = X.T @ y
    yty = float(y @ y)
    lam2n = 2.0 * lam * n

    if s == 1:
        b = axis
        obj = G[0, 0] * b * b - 2.0 * c[0] * b + lam2n * np.abs(b)
        best = int(np.argmin(obj))
        return np.array([axis[best]])

    # build the objective tensor axis by axis
    shape = (len(axis),) * s
    obj = np.full(shape, yty)
    for j in range(s):
        view = [np.newaxis] * s
        view[j] = slice(None)
        term = G[j, j] * axis * axis - 2.0 * c[j] * axis + lam2n * np.abs(axis)
        obj = obj + term[tuple(view)]
        for k in range(j + 1, s):
            vj = [np.newaxis] * s
            vj[j] = slice(None)
            vk = [np.newaxis] * s
            vk[k] = slice(None)
            obj = obj + 2.0 * G[j, k] * axis[tuple(vj)] * axis[tuple(vk)]
    flat = int(np.argmin(obj))
    idx = np.unravel_index(flat, shape)
    return np.array([axis[i] for i in idx])


def oracle_ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares via explicit Gaussian elimination with partial pivoting."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    s = X.shape[1]
    A = (X.T @ X).astype(float)
    b = (X.T @ y).astype(float)
    # forward elimination
    for col in range(s):
        pivot = col + int(np.argmax(np.abs(A[col:, col])))
        if abs(A[pivot, col]) < 1e-300:
            raise DimensionError("rank-deficient design in oracle_ols")
        if pivot != col:
            A[[col, pivot]] = A[[pivot, col]]
            b[col], b[pivot] = b[pivot], b[col]
        for row in range(col + 1, s):
            factor = A[row, col] / A[col, col]
            A[row, col:] -= factor * A[col, col:]
            b[row] -= factor * b[col]
    # back substitution
    beta = np.zeros(s)
    for col in range(s - 1, -1, -1):
        beta[col] = (b[col] - A[col, col + 1:] @ beta[col + 1:]) / A[col, col]
    return beta


def oracle_mode(values: Sequence[float], ses, threshold: float) -> Tuple[list, dict]:
    """Quadratic-time voting: item j votes for item l when
    |values[j] - values[l]| <= threshold * ses(j, l).  Returns the winners
    (max vote count, ties kept, input order) and the per-item counts."""
    values = list(values)
    k = len(values)
    counts = {}
    for l in range(k):
        votes = 0
        for j in range(k):
            if abs(values[j] - values[l]) <= threshold * ses(j, l):
                votes += 1
        counts[l] = votes
    if not counts:
        return [], {}
    top = max(counts.values())
    winners = [l for l in range(k) if counts[l] == top]
    return winners, counts
