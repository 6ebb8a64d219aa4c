"""Alternating hierarchical training loop over one shared pair of encoders.

A schedule cycle runs a configured number of clip-level batches, then
phase-level, then video-level batches; every level updates the same two
encoders.  Clip-level batches add two feature-space distortions per sample
for the two-view objective; text features pass through the stochastic
original-vs-augmented selection before encoding.  The loop is
bit-deterministic in the seed: batches, distortions and augmentation draws
all come from one generator consumed in a fixed order.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import encoders as enc
from .datagen import Dataset, HierarchicalSample
from .errors import AllZeroScheduleError, MissingLevelDataError, NonFiniteLossError
from .losses import LossConfig, clip_lecnce, hier_lecnce, mean_pool_rows, mean_pool_rows_backward
from .numerics import make_rng
from .textaug import sample_text

LEVELS = ("clip", "phase", "video")
VIEW_NOISE_SIGMA = 0.05
VIEW_DROPOUT_RATE = 0.10
TEXT_AUG_SIGMA = 0.02  # augmented-text rewrites perturb meaning only slightly

CSV_COLUMNS = ["step", "level", "total", "component_vl", "component_vv", "component_infonce", "component_dtw", "wall_ms"]


@dataclass
class TrainConfig:
    """Everything a run needs; desk-scale defaults, reference-scale values selectable."""

    loss: LossConfig = field(default_factory=LossConfig)
    schedule: tuple[int, int, int] = (5, 3, 3)
    batch_sizes: tuple[int, int, int] = (16, 8, 4)
    frames: tuple[int, int, int] = (4, 16, 64)
    epochs: int = 30
    learning_rate: float = 1e-3
    weight_decay: float = 0.01
    seed: int = 0
    p_augmented: float = 0.5
    dtw_algorithm: str = "greedy"
    visual_layers: tuple[int, ...] = (32, 32)
    text_layers: tuple[int, ...] = (24, 32)
    activation: str = "identity"

    def __post_init__(self):
        if len(self.schedule) != 3 or any(c < 0 for c in self.schedule):
            raise ValueError("schedule must be three non-negative counts")
        if sum(self.schedule) == 0:
            raise AllZeroScheduleError("schedule has zero batches at every level")
        for level, (count, batch) in enumerate(zip(self.schedule, self.batch_sizes)):
            if count > 0 and batch < 2:
                raise ValueError(f"contrastive level {LEVELS[level]} needs batch size >= 2, got {batch}")
        if self.dtw_algorithm not in ("greedy", "dp"):
            raise ValueError(f"dtw_algorithm must be greedy or dp, got {self.dtw_algorithm!r}")
        if not 0.0 <= self.p_augmented <= 1.0:
            raise ValueError("p_augmented must be in [0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


REFERENCE_SCHEDULE = (25, 15, 115)
REFERENCE_BATCH_SIZES = (120, 80, 25)
REFERENCE_LEARNING_RATE = 5e-5


@dataclass
class StepRecord:
    global_step: int
    level: str
    total: float
    components: dict[str, float]
    wall_ms: float


@dataclass
class TrainLog:
    records: list[StepRecord] = field(default_factory=list)

    def append(self, rec: StepRecord) -> None:
        if self.records and rec.global_step <= self.records[-1].global_step:
            raise ValueError("global_step must be strictly increasing")
        if not np.isfinite(rec.total):
            raise NonFiniteLossError(f"non-finite loss at step {rec.global_step} level {rec.level}")
        self.records.append(rec)

    def level_totals(self, level: str) -> list[float]:
        return [r.total for r in self.records if r.level == level]

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in self.records:
                c = r.components
                writer.writerow(
                    [
                        r.global_step,
                        r.level,
                        repr(r.total),
                        repr(c["vl"]) if "vl" in c else "",
                        repr(c["vv"]) if "vv" in c else "",
                        repr(c["infonce"]) if "infonce" in c else "",
                        repr(c["dtw"]) if "dtw" in c else "",
                        repr(r.wall_ms),
                    ]
                )


def make_schedule(cfg: TrainConfig):
    """Infinite cyclic level sequence: clip x c, phase x p, video x v, repeat."""
    period = schedule_period(cfg)
    while True:
        yield from period


def schedule_period(cfg: TrainConfig) -> list[str]:
    """One cycle of the alternating pattern as a list of level names."""
    if sum(cfg.schedule) == 0:
        raise AllZeroScheduleError("schedule has zero batches at every level")
    period = []
    for level, count in zip(LEVELS, cfg.schedule):
        period.extend([level] * count)
    return period


class _Batcher:
    """Seeded shuffling with wrap-around over one level's sample list."""

    def __init__(self, samples: list[HierarchicalSample], rng: np.random.Generator):
        self.samples = samples
        self.rng = rng
        self.order = list(rng.permutation(len(samples)))
        self.pos = 0

    def next_batch(self, n: int) -> list[HierarchicalSample]:
        out = []
        while len(out) < n:
            if self.pos >= len(self.order):
                self.order = list(self.rng.permutation(len(self.samples)))
                self.pos = 0
            out.append(self.samples[self.order[self.pos]])
            self.pos += 1
        return out


def subsample_frames(frames: np.ndarray, n: int) -> np.ndarray:
    """Uniformly-spaced rows, all of them when the sample is short."""
    t = frames.shape[0]
    if t <= n:
        return frames
    if n == 1:
        return frames[:1]
    idx = (np.arange(n) * (t - 1)) // (n - 1)
    return frames[idx]


def _distort(features: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian noise plus coordinate dropout, in feature space."""
    noise = rng.normal(0.0, VIEW_NOISE_SIGMA, size=features.shape)
    keep = rng.random(features.shape) >= VIEW_DROPOUT_RATE
    return (features + noise) * keep


def _select_text(feature: np.ndarray, rng: np.random.Generator, p_augmented: float) -> np.ndarray:
    """Original-vs-augmented choice; the augmented variant is an independent re-noising."""
    augmented = feature + rng.normal(0.0, TEXT_AUG_SIGMA, size=feature.shape)
    return sample_text(feature, augmented, p_augmented, rng)


def _pool_batch(visual: enc.EncoderParams, feature_blocks: list[np.ndarray]):
    """Encode each block of frame features and pool to one row per block."""
    pooled, caches = [], []
    for block in feature_blocks:
        emb, cache = enc.forward(visual, block, return_cache=True)
        row, pool_cache = mean_pool_rows(emb)
        pooled.append(row)
        caches.append((cache, pool_cache))
    return np.stack(pooled), caches


def _pool_batch_backward(visual: enc.EncoderParams, caches, grad_rows: np.ndarray):
    """Accumulate encoder parameter grads through pooling for each block."""
    total = None
    for k, (cache, pool_cache) in enumerate(caches):
        grad_emb = mean_pool_rows_backward(grad_rows[k], pool_cache)
        grads, _ = enc.backward(visual, cache, grad_emb)
        total = grads if total is None else _add_grads(total, grads)
    return total


def _add_grads(a, b):
    return [(dw1 + dw2, db1 + db2) for (dw1, db1), (dw2, db2) in zip(a, b)]


def _zero_grads(params: enc.EncoderParams):
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]


@dataclass
class TrainerState:
    """Shared encoders plus their optimizer states."""

    visual: enc.EncoderParams
    text: enc.EncoderParams
    visual_opt: enc.OptimizerState
    text_opt: enc.OptimizerState


def init_trainer(cfg: TrainConfig, rng: np.random.Generator) -> TrainerState:
    visual = enc.init_params(list(cfg.visual_layers), cfg.activation, rng)
    text = enc.init_params(list(cfg.text_layers), cfg.activation, rng)
    return TrainerState(
        visual=visual,
        text=text,
        visual_opt=enc.init_optimizer(visual, cfg.learning_rate, cfg.weight_decay),
        text_opt=enc.init_optimizer(text, cfg.learning_rate, cfg.weight_decay),
    )


def train_step(
    level: str,
    batch: list[HierarchicalSample],
    state: TrainerState,
    cfg: TrainConfig,
    rng: np.random.Generator,
    global_step: int = 0,
) -> StepRecord:
    """One forward/backward/update on a batch of one level."""
    t0 = time.perf_counter()
    for s in batch:
        if s.level != level:
            raise ValueError(f"batch sample of level {s.level!r} in a {level!r} step")
    n_frames = dict(zip(LEVELS, cfg.frames))[level]

    frame_blocks = [subsample_frames(s.frame_features, n_frames) for s in batch]
    texts = np.stack([_select_text(s.parent_text_feature, rng, cfg.p_augmented) for s in batch])

    if level == "clip":
        views_a = [_distort(block, rng) for block in frame_blocks]
        views_b = [_distort(block, rng) for block in frame_blocks]
        clip_rows, clip_caches = _pool_batch(state.visual, frame_blocks)
        rows_a, caches_a = _pool_batch(state.visual, views_a)
        rows_b, caches_b = _pool_batch(state.visual, views_b)
        narr_emb, narr_cache = enc.forward(state.text, texts, return_cache=True)

        loss = clip_lecnce(clip_rows, narr_emb, rows_a, rows_b, cfg.loss)
        v_grads = _pool_batch_backward(state.visual, clip_caches, loss.grads["clip_frames"])
        v_grads = _add_grads(v_grads, _pool_batch_backward(state.visual, caches_a, loss.grads["view_a"]))
        v_grads = _add_grads(v_grads, _pool_batch_backward(state.visual, caches_b, loss.grads["view_b"]))
        t_grads, _ = enc.backward(state.text, narr_cache, loss.grads["narrations"])
    else:
        child_sel = [
            np.stack([_select_text(c, rng, cfg.p_augmented) for c in s.child_text_features])
            for s in batch
        ]
        frame_embs, frame_caches = [], []
        for block in frame_blocks:
            emb, cache = enc.forward(state.visual, block, return_cache=True)
            frame_embs.append(emb)
            frame_caches.append(cache)
        parent_emb, parent_cache = enc.forward(state.text, texts, return_cache=True)
        child_embs, child_caches = [], []
        for children in child_sel:
            emb, cache = enc.forward(state.text, children, return_cache=True)
            child_embs.append(emb)
            child_caches.append(cache)

        loss = hier_lecnce(frame_embs, parent_emb, child_embs, cfg.loss, cfg.dtw_algorithm)
        v_grads = None
        for cache, g in zip(frame_caches, loss.grads["segment_frames"]):
            grads, _ = enc.backward(state.visual, cache, g)
            v_grads = grads if v_grads is None else _add_grads(v_grads, grads)
        t_grads, _ = enc.backward(state.text, parent_cache, loss.grads["parent_texts"])
        for cache, g in zip(child_caches, loss.grads["child_texts"]):
            grads, _ = enc.backward(state.text, cache, g)
            t_grads = _add_grads(t_grads, grads)

    if not np.isfinite(loss.value):
        raise NonFiniteLossError(f"non-finite loss at step {global_step} level {level}")
    state.visual, state.visual_opt = enc.adamw_step(state.visual, v_grads, state.visual_opt)
    state.text, state.text_opt = enc.adamw_step(state.text, t_grads, state.text_opt)

    wall_ms = (time.perf_counter() - t0) * 1000.0
    return StepRecord(
        global_step=global_step,
        level=level,
        total=loss.value,
        components=dict(loss.components),
        wall_ms=wall_ms,
    )


def train_run(cfg: TrainConfig, datasets: Dataset | dict, out_dir=None) -> tuple[TrainerState, TrainLog]:
    """Run ``cfg.epochs`` schedule cycles; optionally write log and checkpoints.

    ``datasets`` is a :class:`Dataset` or a level -> sample-list mapping and
    must cover every level with a non-zero schedule count.
    """
    samples = datasets.samples if isinstance(datasets, Dataset) else datasets
    for level, count in zip(LEVELS, cfg.schedule):
        if count > 0 and not samples.get(level):
            raise MissingLevelDataError(f"schedule needs {level!r} samples but none were provided")

    rng = make_rng(cfg.seed)
    state = init_trainer(cfg, rng)
    batchers = {
        level: _Batcher(samples[level], rng)
        for level, count in zip(LEVELS, cfg.schedule)
        if count > 0
    }
    batch_size = dict(zip(LEVELS, cfg.batch_sizes))
    period = schedule_period(cfg)

    log = TrainLog()
    global_step = 0
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    for epoch in range(cfg.epochs):
        for level in period:
            global_step += 1
            batch = batchers[level].next_batch(batch_size[level])
            log.append(train_step(level, batch, state, cfg, rng, global_step))
        if out_dir is not None:
            enc.save_checkpoint(
                os.path.join(out_dir, f"checkpoint_{epoch + 1:04d}.json"),
                state.visual,
                state.text,
                state.visual_opt,
                state.text_opt,
                seed=cfg.seed,
                schedule_position=global_step,
            )
    if out_dir is not None:
        enc.save_checkpoint(
            os.path.join(out_dir, "checkpoint_final.json"),
            state.visual,
            state.text,
            state.visual_opt,
            state.text_opt,
            seed=cfg.seed,
            schedule_position=global_step,
        )
        log.write_csv(os.path.join(out_dir, "trainlog.csv"))
    return state, log


def train_config_to_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["loss"] = asdict(cfg.loss)
    return d


def train_config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    loss = LossConfig(**d.pop("loss", {}))
    for key in ("schedule", "batch_sizes", "frames", "visual_layers", "text_layers"):
        if key in d:
            d[key] = tuple(d[key])
    return TrainConfig(loss=loss, **d)
