"""Training objectives: contrastive InfoNCE, alignment-cost construction,
the DTW hinge on reversed text sequences, and their level-specific
combinations.

Every loss returns a :class:`LossValue` carrying the scalar, analytic
gradients with respect to each input array, and the component scalars that
make up the total.  Gradients are exact (validated against central finite
differences in the test suite) and treat the inputs as free variables; the
encoder's normalization Jacobian is applied separately by the encoder
backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .alignment import CostMatrix, align, dtw_subgradient, reverse_columns
from .errors import (
    DimMismatchError,
    EmptyChildSequenceError,
    EmptyPositiveSetError,
    RowNotNormalizedError,
    ShapeMismatchError,
    ZeroVectorError,
)
from .numerics import as_matrix, log_softmax_rows, softmax_rows

HINGE_FORMS = ("standard", "literal")
ROW_NORM_TOL = 1e-6


@dataclass
class LossConfig:
    """Hyperparameters shared by all objectives.

    ``beta`` tempers the alignment-cost softmax, ``phi`` is the hinge
    margin between forward and reversed alignment costs, and
    ``lambda_dtw`` scales the alignment term against the contrastive one.
    """

    temperature_infonce: float = 0.07
    beta: float = 0.1
    phi: float = 0.1
    lambda_dtw: float = 0.01
    hinge_form: str = "standard"
    symmetric: bool = True

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.temperature_infonce > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature_infonce}")
        if self.lambda_dtw < 0:
            raise ValueError(f"lambda_dtw must be >= 0, got {self.lambda_dtw}")
        if self.hinge_form not in HINGE_FORMS:
            raise ValueError(f"hinge_form must be one of {HINGE_FORMS}, got {self.hinge_form!r}")


@dataclass
class LossValue:
    """Scalar loss, per-input gradients, and named component scalars."""

    value: float
    grads: dict = field(default_factory=dict)
    components: dict = field(default_factory=dict)


def diagonal_positives(n: int) -> list[list[int]]:
    """The standard matched-pair positive sets: row i's positive is column i."""
    return [[i] for i in range(n)]


def _row_nce(z: np.ndarray, positives: Sequence[Sequence[int]]) -> tuple[float, np.ndarray]:
    """Mean over rows of -log(sum_pos e^z / sum_all e^z) plus its gradient.

    ``z`` is the already-tempered logit matrix.  The gradient is with
    respect to ``z``.
    """
    b, m = z.shape
    if len(positives) != b:
        raise DimMismatchError(f"{len(positives)} positive sets for {b} rows")
    shifted = z - z.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1)
    p_all = exp / denom[:, None]

    value = 0.0
    grad = p_all / b
    for i, pos in enumerate(positives):
        idx = np.asarray(sorted(set(int(j) for j in pos)), dtype=int)
        if idx.size == 0:
            raise EmptyPositiveSetError(f"row {i} has no positives")
        if idx.min() < 0 or idx.max() >= m:
            raise DimMismatchError(f"row {i} positive index out of range for {m} columns")
        pos_sum = exp[i, idx].sum()
        value += float(np.log(denom[i]) - np.log(pos_sum))
        grad[i, idx] -= exp[i, idx] / pos_sum / b
    return value / b, grad


def info_nce(
    sim,
    positives: Sequence[Sequence[int]],
    temperature: float = 0.07,
    symmetric: bool = True,
) -> LossValue:
    """Multi-positive contrastive loss over a similarity matrix.

    Row i is an anchor whose positive columns are ``positives[i]``; the
    loss is the mean over rows of -log of the positive mass under the
    row softmax of ``sim / temperature``.  With ``symmetric=True`` the
    matrix must be square and the column direction (single positive on the
    diagonal) is averaged in, matching two-way retrieval training.
    """
    sim = as_matrix(sim, "sim")
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    z = sim / temperature

    row_value, row_grad = _row_nce(z, positives)
    if not symmetric:
        return LossValue(value=row_value, grads={"sim": row_grad / temperature})

    if sim.shape[0] != sim.shape[1]:
        raise DimMismatchError(f"symmetric loss needs a square matrix, got {sim.shape}")
    col_value, col_grad = _row_nce(z.T, diagonal_positives(sim.shape[1]))
    value = 0.5 * (row_value + col_value)
    grad = 0.5 * (row_grad + col_grad.T) / temperature
    return LossValue(value=value, grads={"sim": grad})


def build_cost_matrix(frames, texts, beta: float = 0.1, validate: bool = True) -> CostMatrix:
    """Per-frame negative log-probability of each text under a softmax over texts.

    ``c[i][j] = -log softmax_j(frames[i] . texts[j] / beta)``; rows of both
    inputs are expected unit-norm so the dot products are cosines.  Entries
    are non-negative and each row satisfies sum_j exp(-c[i][j]) = 1.
    """
    frames = as_matrix(frames, "frames")
    texts = as_matrix(texts, "texts")
    if frames.shape[1] != texts.shape[1]:
        raise DimMismatchError(f"embedding dims differ: {frames.shape[1]} vs {texts.shape[1]}")
    if validate:
        for name, m in (("frames", frames), ("texts", texts)):
            norms = np.linalg.norm(m, axis=1)
            if np.any(np.abs(norms - 1.0) > ROW_NORM_TOL):
                bad = int(np.argmax(np.abs(norms - 1.0)))
                raise RowNotNormalizedError(f"{name} row {bad} has norm {norms[bad]:.9f}")
    cost = -log_softmax_rows(frames @ texts.T, beta)
    return CostMatrix(values=cost, beta=beta, reversed_cols=False)


def cost_matrix_backward(frames, texts, beta: float, grad_cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Chain a gradient on cost-matrix entries back to the two embedding matrices."""
    frames = as_matrix(frames, "frames")
    texts = as_matrix(texts, "texts")
    p = softmax_rows(frames @ texts.T, beta)
    # dL/ds[i,k] = (p[i,k] * sum_j g[i,j] - g[i,k]) / beta
    grad_sim = (p * grad_cost.sum(axis=1, keepdims=True) - grad_cost) / beta
    return grad_sim @ texts, grad_sim.T @ frames


def dtw_hinge(
    c_forward: CostMatrix,
    c_reversed: CostMatrix,
    phi: float = 0.1,
    form: str = "standard",
    algorithm: str = "greedy",
) -> LossValue:
    """Margin loss between forward and reversed alignment costs.

    standard: max(0, DTW(C) - DTW(C_rev) + phi); the printed one-sided
    reading max(DTW(C) - DTW(C_rev), phi) is available as ``literal``.
    Gradients flow through both alignments via the fixed-path subgradient
    and vanish when the hinge is inactive.
    """
    if form not in HINGE_FORMS:
        raise ValueError(f"form must be one of {HINGE_FORMS}, got {form!r}")
    if c_forward.shape != c_reversed.shape:
        raise ShapeMismatchError(f"cost matrices differ in shape: {c_forward.shape} vs {c_reversed.shape}")
    fwd = align(c_forward, algorithm)
    rev = align(c_reversed, algorithm)
    delta = fwd.cost - rev.cost
    if form == "standard":
        value = max(0.0, delta + phi)
        active = delta + phi > 0.0
    else:
        value = max(delta, phi)
        active = delta > phi
    if active:
        grad_fwd = dtw_subgradient(c_forward, fwd)
        grad_rev = -dtw_subgradient(c_reversed, rev)
    else:
        grad_fwd = np.zeros(c_forward.shape)
        grad_rev = np.zeros(c_reversed.shape)
    return LossValue(
        value=float(value),
        grads={"c_forward": grad_fwd, "c_reversed": grad_rev},
        components={"dtw_forward": fwd.cost, "dtw_reversed": rev.cost},
    )


def clip_lecnce(clip_frames, narrations, view_a, view_b, cfg: LossConfig) -> LossValue:
    """Clip-level objective: narration contrast plus two-view self-supervision.

    Row i of every input refers to clip i.  The value is the sum of an
    InfoNCE between clip and narration embeddings and an InfoNCE between
    the two augmented-view embeddings, both with diagonal positives.
    """
    clip_frames = as_matrix(clip_frames, "clip_frames")
    narrations = as_matrix(narrations, "narrations")
    view_a = as_matrix(view_a, "view_a")
    view_b = as_matrix(view_b, "view_b")
    b = clip_frames.shape[0]
    for name, m in (("narrations", narrations), ("view_a", view_a), ("view_b", view_b)):
        if m.shape[0] != b:
            raise DimMismatchError(f"{name} has {m.shape[0]} rows, expected {b}")

    tau = cfg.temperature_infonce
    diag = diagonal_positives(b)
    vl = info_nce(clip_frames @ narrations.T, diag, tau, cfg.symmetric)
    vv = info_nce(view_a @ view_b.T, diag, tau, cfg.symmetric)
    g_vl = vl.grads["sim"]
    g_vv = vv.grads["sim"]
    return LossValue(
        value=vl.value + vv.value,
        grads={
            "clip_frames": g_vl @ narrations,
            "narrations": g_vl.T @ clip_frames,
            "view_a": g_vv @ view_b,
            "view_b": g_vv.T @ view_a,
        },
        components={"vl": vl.value, "vv": vv.value},
    )


def mean_pool_rows(rows: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Arithmetic mean of the rows, re-normalized to the unit sphere."""
    rows = as_matrix(rows, "rows")
    z = rows.mean(axis=0)
    norm = float(np.linalg.norm(z))
    if norm < 1e-12:
        raise ZeroVectorError("pooled row collapsed to zero")
    return z / norm, (z / norm, norm, rows.shape[0])


def mean_pool_rows_backward(grad_pooled: np.ndarray, cache: tuple) -> np.ndarray:
    """Gradient of mean-pool-then-renormalize, broadcast back to each row."""
    u, norm, t = cache
    g_z = (grad_pooled - u * float(u @ grad_pooled)) / norm
    return np.tile(g_z / t, (t, 1))


def hier_lecnce(
    segment_frames: Sequence[np.ndarray],
    parent_texts,
    child_texts: Sequence[np.ndarray],
    cfg: LossConfig,
    dtw_algorithm: str = "greedy",
) -> LossValue:
    """Phase/video-level objective: pooled-segment contrast plus DTW hinge.

    Sample k pairs a frame-embedding matrix ``segment_frames[k]`` with one
    parent text (row k of ``parent_texts``) and an ordered child text
    matrix ``child_texts[k]``.  Pooled segment embeddings are contrasted
    against parent texts with diagonal positives; each sample additionally
    pays a reversal hinge on the alignment cost between its frames and its
    child texts, averaged over the batch and scaled by ``lambda_dtw``.
    """
    parent_texts = as_matrix(parent_texts, "parent_texts")
    b = len(segment_frames)
    if b == 0 or parent_texts.shape[0] != b or len(child_texts) != b:
        raise DimMismatchError(
            f"batch sizes disagree: {b} segments, {parent_texts.shape[0]} parents, {len(child_texts)} child sets"
        )

    pooled = np.empty((b, parent_texts.shape[1]))
    pool_caches = []
    frames_list = []
    children_list = []
    for k in range(b):
        frames = as_matrix(segment_frames[k], f"segment_frames[{k}]")
        children = as_matrix(child_texts[k], f"child_texts[{k}]")
        if children.shape[0] < 1:
            raise EmptyChildSequenceError(f"sample {k} has no child texts")
        if frames.shape[1] != parent_texts.shape[1]:
            raise DimMismatchError(f"sample {k} frame dim {frames.shape[1]} != joint dim {parent_texts.shape[1]}")
        pooled[k], cache = mean_pool_rows(frames)
        pool_caches.append(cache)
        frames_list.append(frames)
        children_list.append(children)

    tau = cfg.temperature_infonce
    contrast = info_nce(pooled @ parent_texts.T, diagonal_positives(b), tau, cfg.symmetric)
    g_sim = contrast.grads["sim"]
    grad_parent = g_sim.T @ pooled
    grad_pooled = g_sim @ parent_texts

    grad_frames = [mean_pool_rows_backward(grad_pooled[k], pool_caches[k]) for k in range(b)]
    grad_children = [np.zeros_like(c) for c in children_list]

    dtw_total = 0.0
    lam = cfg.lambda_dtw
    for k in range(b):
        c_fwd = build_cost_matrix(frames_list[k], children_list[k], cfg.beta, validate=False)
        c_rev = reverse_columns(c_fwd)
        hinge = dtw_hinge(c_fwd, c_rev, cfg.phi, cfg.hinge_form, dtw_algorithm)
        dtw_total += hinge.value
        if lam > 0:
            # the reversed matrix shares entries with the forward one, so its
            # gradient folds back after un-flipping the column axis
            grad_cost = hinge.grads["c_forward"] + hinge.grads["c_reversed"][:, ::-1]
            g_f, g_c = cost_matrix_backward(frames_list[k], children_list[k], cfg.beta, grad_cost * (lam / b))
            grad_frames[k] = grad_frames[k] + g_f
            grad_children[k] = grad_children[k] + g_c

    dtw_mean = dtw_total / b
    return LossValue(
        value=contrast.value + lam * dtw_mean,
        grads={
            "segment_frames": grad_frames,
            "parent_texts": grad_parent,
            "child_texts": grad_children,
        },
        components={"infonce": contrast.value, "dtw": dtw_mean},
    )
