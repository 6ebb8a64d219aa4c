"""Monotone alignment between frame and text sequences over a cost matrix.

Two alignment routines are provided.  ``dtw_greedy`` is a single backward
greedy trace from the (T, N) corner, accumulating every visited cell; it is
cheap but not globally optimal.  ``dtw_dp`` is the classic dynamic-program
over an accumulated-cost table and serves as the optimal-cost oracle.  Both
report the cells they visited as a 1-based path from (T, N) down to (1, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMatrixError, NonFiniteError, PathMismatchError
from .numerics import as_matrix


@dataclass(frozen=True)
class CostMatrix:
    """Non-negative T x N distance matrix between frames (rows) and texts (cols).

    ``beta`` records the temperature the distances were built with and
    ``reversed_cols`` whether the text axis has been temporally reversed.
    """

    values: np.ndarray
    beta: float = 0.1
    reversed_cols: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise EmptyMatrixError(f"cost matrix must be at least 1x1, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("cost matrix contains non-finite entries")
        if np.any(values < 0):
            raise ValueError("cost matrix entries must be non-negative")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class AlignmentResult:
    """Alignment cost plus the visited cells, 1-based, from (T, N) to (1, 1)."""

    cost: float
    path: tuple[tuple[int, int], ...] = field(default_factory=tuple)


def _values(c) -> np.ndarray:
    if isinstance(c, CostMatrix):
        return c.values
    v = as_matrix(c, "cost matrix")
    if v.size == 0:
        raise EmptyMatrixError("cost matrix is empty")
    return v


def dtw_greedy(c: CostMatrix | np.ndarray) -> AlignmentResult:
    """Greedy backward trace: start at (T, N), step toward (1, 1).

    At each cell the diagonal neighbour is taken when it is no more costly
    than both the up and left neighbours, else the cheaper of up/left.  On
    the borders the only in-bounds move is forced: up when j == 1, left
    when i == 1 (the corner cell exits through the left move).  Every
    visited cell's cost is accumulated, the start and end cells included.
    """
    v = _values(c)
    t, n = v.shape
    i, j = t, n
    cost = 0.0
    path: list[tuple[int, int]] = []
    while i > 0 and j > 0:
        cost += v[i - 1, j - 1]
        path.append((i, j))
        if i > 1 and j > 1 and v[i - 2, j - 2] <= v[i - 2, j - 1] and v[i - 2, j - 2] <= v[i - 1, j - 2]:
            i -= 1
            j -= 1
        elif i > 1 and (j == 1 or v[i - 2, j - 1] <= v[i - 1, j - 2]):
            i -= 1
        else:
            j -= 1
    return AlignmentResult(cost=float(cost), path=tuple(path))


def dtw_dp(c: CostMatrix | np.ndarray) -> AlignmentResult:
    """Globally minimal monotone path cost via an accumulated-cost table.

    Moves are {down, right, diagonal} from (1, 1) to (T, N); the path is
    recovered by backtracking the table with ties broken diagonal, then up,
    then left.
    """
    v = _values(c)
    t, n = v.shape
    acc = np.empty_like(v)
    acc[0, 0] = v[0, 0]
    for i in range(1, t):
        acc[i, 0] = acc[i - 1, 0] + v[i, 0]
    for j in range(1, n):
        acc[0, j] = acc[0, j - 1] + v[0, j]
    for i in range(1, t):
        for j in range(1, n):
            acc[i, j] = v[i, j] + min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])

    path: list[tuple[int, int]] = []
    i, j = t - 1, n - 1
    while True:
        path.append((i + 1, j + 1))
        if i == 0 and j == 0:
            break
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
    return AlignmentResult(cost=float(acc[t - 1, n - 1]), path=tuple(path))


DTW_ALGORITHMS = {"greedy": dtw_greedy, "dp": dtw_dp}


def align(c: CostMatrix | np.ndarray, algorithm: str = "greedy") -> AlignmentResult:
    """Dispatch to one of the registered alignment routines."""
    try:
        return DTW_ALGORITHMS[algorithm](c)
    except KeyError:
        raise ValueError(f"unknown DTW algorithm {algorithm!r}; expected one of {sorted(DTW_ALGORITHMS)}") from None


def reverse_columns(c: CostMatrix) -> CostMatrix:
    """Flip the text axis: out[i][j] = in[i][N+1-j], toggling the reversed flag."""
    return CostMatrix(
        values=c.values[:, ::-1].copy(),
        beta=c.beta,
        reversed_cols=not c.reversed_cols,
    )


def dtw_subgradient(c: CostMatrix | np.ndarray, result: AlignmentResult) -> np.ndarray:
    """Fixed-path subgradient: 1.0 on path cells, 0.0 elsewhere.

    Holding the path constant, the alignment cost is linear in the visited
    entries, so this is its exact gradient away from decision ties.
    """
    v = _values(c)
    t, n = v.shape
    grad = np.zeros((t, n), dtype=np.float64)
    for i, j in result.path:
        if not (1 <= i <= t and 1 <= j <= n):
            raise PathMismatchError(f"path cell ({i}, {j}) outside {t}x{n} matrix")
        grad[i - 1, j - 1] = 1.0
    return grad
