"""Dense float64 numerics shared by every other module.

All functions are pure, operate on and return ``numpy`` float64 arrays, and
are deterministic: the same inputs produce bit-identical outputs across
runs.  Randomness enters only through an explicitly seeded generator from
:func:`make_rng`.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import (
    DimMismatchError,
    NonFiniteError,
    NonPositiveTemperatureError,
    ZeroVectorError,
)

ZERO_NORM_TOL = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; equal seeds give identical streams everywhere."""
    return np.random.default_rng(int(seed))


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise DimMismatchError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{name} contains non-finite values")
    return m


def l2_normalize(v) -> np.ndarray:
    """Scale a vector to unit Euclidean norm, preserving direction.

    Raises ZeroVectorError when the norm is below 1e-12.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("cannot normalize a non-finite vector")
    norm = np.linalg.norm(v)
    if norm < ZERO_NORM_TOL:
        raise ZeroVectorError(f"vector norm {norm} below {ZERO_NORM_TOL}")
    return v / norm


def l2_normalize_rows(m) -> np.ndarray:
    """Row-wise :func:`l2_normalize` for a 2-D array."""
    m = as_matrix(m)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms < ZERO_NORM_TOL):
        bad = int(np.argmin(norms))
        raise ZeroVectorError(f"row {bad} has norm {float(norms[bad, 0])}")
    return m / norms


def cosine_similarity_matrix(a, b) -> np.ndarray:
    """Pairwise dot products between the rows of two matrices.

    Rows are expected to be unit-norm, making the dot product a cosine.
    Computed via einsum rather than BLAS so that
    ``cosine_similarity_matrix(a, b) == cosine_similarity_matrix(b, a).T``
    holds bit-exactly regardless of operand sizes.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise DimMismatchError(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    return np.einsum("ik,jk->ij", a, b)


def softmax_rows(m, temperature: float = 1.0) -> np.ndarray:
    """Row-wise softmax of ``m / temperature`` with max-subtraction.

    Max-subtraction keeps ``exp`` in range even at temperatures like 0.1
    where raw logits would overflow.
    """
    if not temperature > 0:
        raise NonPositiveTemperatureError(f"temperature must be > 0, got {temperature}")
    m = as_matrix(m)
    z = m / temperature
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(m, temperature: float = 1.0) -> np.ndarray:
    """Row-wise log-softmax of ``m / temperature``, max-stabilized."""
    if not temperature > 0:
        raise NonPositiveTemperatureError(f"temperature must be > 0, got {temperature}")
    m = as_matrix(m)
    z = m / temperature
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def finite_diff_grad(fn: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient oracle: (fn(x+h e_i) - fn(x-h e_i)) / 2h.

    The default step balances truncation against round-off for float64
    inputs scaled to O(1).
    """
    if not h > 0:
        raise ValueError(f"step h must be > 0, got {h}")
    x = np.asarray(x, dtype=np.float64).copy()
    grad = np.zeros_like(x)
    flat = x.ravel()
    out = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = float(fn(x))
        flat[i] = orig - h
        down = float(fn(x))
        flat[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NonFiniteError(f"fn non-finite near coordinate {i}")
        out[i] = (up - down) / (2.0 * h)
    return grad
