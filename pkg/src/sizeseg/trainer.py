"""SGD training loop with pluggable supervision modes.

Each mode composes per-image loss terms from the losses module.  The
pairwise term is reported per pixel (scaled by 1/|Omega|) so its default
weight of 1.0 is on the same footing as the image-level size losses;
terms with zero weight (or an empty seed set) are skipped outright, so
degenerate configurations reduce bitwise to the simpler mode they imply.

Determinism contract: identical (dataset, model config, train config)
yields bitwise-identical parameters and reports.  All randomness flows
from the two seeds (model init, batch shuffling); batch gradients are
reduced sequentially in sample order.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import losses, net
from .affinity import AffinityConfig, build_affinity
from .fields import SeedSet
from .losses import BarrierConfig
from .metrics import ConfusionMatrix, dice, miou
from .simplex import CategoricalDist

LOSS_CLAMP = 1e6


class SupervisionMode(Enum):
    FULL_MASK = "full-mask"
    SIZE = "size"
    SIZE_CRF = "size-crf"
    SIZE_CRF_SEEDS = "size-crf-seeds"
    EXPAND_CRF = "expand-crf"
    FLAT_BARRIER_CRF = "flat-barrier-crf"
    QUAD_BARRIER_SEEDS = "quad-barrier-seeds"
    SEEDS_ONLY = "seeds-only"
    FIXED_MEAN_SIZE = "fixed-mean-size"

    @property
    def uses_size_target(self) -> bool:
        return self in (SupervisionMode.SIZE, SupervisionMode.SIZE_CRF,
                        SupervisionMode.SIZE_CRF_SEEDS,
                        SupervisionMode.FIXED_MEAN_SIZE)

    @property
    def uses_crf(self) -> bool:
        return self in (SupervisionMode.SIZE_CRF, SupervisionMode.SIZE_CRF_SEEDS,
                        SupervisionMode.EXPAND_CRF, SupervisionMode.FLAT_BARRIER_CRF,
                        SupervisionMode.FIXED_MEAN_SIZE)

    @property
    def requires_seeds(self) -> bool:
        return self in (SupervisionMode.SIZE_CRF_SEEDS,
                        SupervisionMode.QUAD_BARRIER_SEEDS,
                        SupervisionMode.SEEDS_ONLY)

    @property
    def uses_seeds(self) -> bool:
        return self.requires_seeds or self is SupervisionMode.FIXED_MEAN_SIZE


@dataclass(frozen=True)
class TrainConfig:
    mode: SupervisionMode = SupervisionMode.SIZE_CRF
    epochs: int = 20
    batch_size: int = 8
    lr: float = 0.05
    poly_power: float = 0.9
    momentum: float = 0.9
    weight_decay: float = 0.0
    crf_weight: float = 1.0
    seed_weight: float = 1.0
    affinity: AffinityConfig = AffinityConfig()
    barrier_epsilon: float = 0.1
    barrier_a: tuple[float, ...] = ()
    rng_seed: int = 0
    eval_every: int = 1
    shuffle: bool = True
    flip_augment: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be >= 1")
        if not self.lr > 0 or not self.poly_power > 0:
            raise ValueError("lr and poly power must be positive")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")


def lr_at(step: int, total: int, cfg: TrainConfig) -> float:
    """Polynomial decay lr * (1 - step/total)^power."""
    if not (0 <= step <= total):
        raise ValueError("step outside [0, total]")
    return cfg.lr * (1.0 - step / total) ** cfg.poly_power


@dataclass(eq=False)
class TrainReport:
    """Everything an experiment needs to archive about one training run.

    canonical_dict() excludes wall time so that byte-level comparison of
    reports is meaningful under the determinism contract.
    """

    mode: str
    epochs: list[dict]
    initial_loss: float
    final_loss: float
    best_epoch: int
    best_metric_name: str
    best_metric_value: float | None
    checkpoint_id: str
    wall_time_s: float = 0.0
    final_params: "net.ModelParams | None" = field(default=None, repr=False)
    best_params: "net.ModelParams | None" = field(default=None, repr=False)

    def canonical_dict(self) -> dict:
        return {
            "mode": self.mode,
            "epochs": self.epochs,
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "best_epoch": self.best_epoch,
            "best_metric_name": self.best_metric_name,
            "best_metric_value": self.best_metric_value,
            "checkpoint_id": self.checkpoint_id,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_dict(), sort_keys=True)

    def to_dict(self) -> dict:
        out = self.canonical_dict()
        out["wall_time_s"] = self.wall_time_s
        return out

    def summary_table(self) -> str:
        lines = [f"mode: {self.mode}",
                 f"checkpoint: {self.checkpoint_id[:12]}",
                 "epoch    loss        val"]
        for e in self.epochs:
            val = e.get("val") or {}
            shown = val.get("miou")
            val_txt = f"{shown:.4f}" if shown is not None else "-"
            lines.append(f"{e['epoch']:>5}    {e['mean_loss']:<10.5f}  {val_txt}")
        return "\n".join(lines)


def _validate_inputs(mode: SupervisionMode, records, num_classes: int) -> None:
    if not records:
        raise ValueError("empty dataset")
    for rec in records:
        if mode.requires_seeds and rec.seeds is None:
            raise ValueError(f"mode {mode.value} needs seeds; {rec.image_id} has none")


def compute_barrier_bounds(records, num_classes: int, percentile: float = 5.0,
                           scale: float = 0.9) -> tuple[float, ...]:
    """Per-class lower size bounds from the working sizes of a dataset.

    For each object class, a conservative fraction slightly below what
    nearly every image containing the class exhibits: scale times the
    given percentile of present-image fractions.  Background gets 0.
    """
    bounds = [0.0] * num_classes
    for k in range(1, num_classes):
        present = [float(r.effective_sizes().probs[k]) for r in records
                   if k in r.tags]
        if present:
            bounds[k] = float(np.clip(scale * np.percentile(present, percentile),
                                      0.0, 1.0))
    return tuple(bounds)


def _barrier_for(record, cfg: TrainConfig, num_classes: int) -> BarrierConfig:
    # lower bounds apply only to classes present in this image
    a = [0.0] * num_classes
    for k in record.tags:
        if k == 0:
            continue
        if k < len(cfg.barrier_a):
            a[k] = cfg.barrier_a[k]
    return BarrierConfig(epsilon=cfg.barrier_epsilon, a=tuple(a))


def _image_loss(mode: SupervisionMode, record, fld, graph, cfg: TrainConfig,
                fixed_target: CategoricalDist | None):
    """Compose the per-image objective; returns (value, logit gradient)."""
    value = 0.0
    grad = np.zeros_like(fld.logits)

    if mode is SupervisionMode.FULL_MASK:
        v, g = losses.full_ce_loss(fld, record.mask)
        value += v
        grad += g

    if mode.uses_size_target:
        target = fixed_target if mode is SupervisionMode.FIXED_MEAN_SIZE \
            else record.effective_sizes()
        v, g = losses.size_target_loss(fld, target)
        value += v
        grad += g

    if mode is SupervisionMode.EXPAND_CRF:
        v, g = losses.expansion_loss(fld, record.tags)
        value += v
        grad += g

    if mode is SupervisionMode.FLAT_BARRIER_CRF:
        v, g = losses.flat_log_barrier(
            fld, record.tags, BarrierConfig(epsilon=cfg.barrier_epsilon))
        value += v
        grad += g

    if mode is SupervisionMode.QUAD_BARRIER_SEEDS:
        v, g = losses.quadratic_barrier(fld, _barrier_for(record, cfg, fld.k))
        value += v
        grad += g
        for k in range(1, fld.k):
            if k not in record.tags:
                v, g = losses.absent_class_suppressor(fld, k)
                value += v
                grad += g

    if mode.uses_crf and cfg.crf_weight != 0.0:
        v, g = losses.crf_loss(fld, graph)
        scale = cfg.crf_weight / fld.num_pixels
        value += scale * v
        grad += scale * g

    if mode.uses_seeds and cfg.seed_weight != 0.0:
        seeds = record.seeds
        if seeds is not None and len(seeds) > 0:
            v, g = losses.partial_ce_loss(fld, seeds)
            value += cfg.seed_weight * v
            grad += cfg.seed_weight * g

    return value, grad


def evaluate(model_cfg: net.ModelConfig, params: net.ModelParams, records) -> dict:
    """Aggregate mIoU and Dice of argmax predictions over a dataset."""
    records = list(records)
    if not records:
        raise ValueError("empty dataset")
    cm = ConfusionMatrix.empty(model_cfg.num_classes)
    for rec in records:
        fld = net.forward(model_cfg, params, rec.image)
        pred = np.argmax(fld.probs, axis=2)
        cm = cm + ConfusionMatrix.from_masks(rec.mask, pred, model_cfg.num_classes)
    out = {"miou": miou(cm)}
    try:
        out["dice"] = dice(cm)
    except ValueError:
        out["dice"] = None
    return out


def evaluate_checkpoint(path, records) -> dict:
    model_cfg, params = net.load_checkpoint(path)
    return evaluate(model_cfg, params, records)


def _flip_record(record):
    seeds = record.seeds
    if seeds is not None:
        w = record.mask.shape[1]
        seeds = SeedSet(tuple((r, w - 1 - c, y) for r, c, y in seeds))
    return replace(record, image=record.image[:, ::-1].copy(),
                   mask=record.mask[:, ::-1].copy(), seeds=seeds)


def train(records, model_cfg: net.ModelConfig, cfg: TrainConfig,
          val_records=None, checkpoint_dir=None) -> TrainReport:
    """Full SGD run; returns the report with final/best params attached."""
    records = list(records)
    _validate_inputs(cfg.mode, records, model_cfg.num_classes)
    t_start = time.perf_counter()

    fixed_target = None
    if cfg.mode is SupervisionMode.FIXED_MEAN_SIZE:
        mean = np.mean([r.effective_sizes().probs for r in records], axis=0)
        fixed_target = CategoricalDist(mean / mean.sum())

    graphs = [None] * len(records)
    flipped_cache: dict[int, object] = {}
    if cfg.mode.uses_crf and cfg.crf_weight != 0.0:
        graphs = [build_affinity(r.image, cfg.affinity) for r in records]

    params = net.init_params(model_cfg)
    velocity = np.zeros_like(params.vector)
    rng = np.random.default_rng(cfg.rng_seed)

    n = len(records)
    batches_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * batches_per_epoch
    step = 0
    epoch_rows: list[dict] = []
    best_metric = -np.inf
    best_epoch = 0
    best_params = params
    metric_name = "dice" if model_cfg.num_classes == 2 else "miou"

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        flips = rng.random(n) < 0.5 if cfg.flip_augment else np.zeros(n, dtype=bool)
        loss_sum = 0.0
        for b in range(batches_per_epoch):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            grad_sum = np.zeros_like(params.vector)
            current_lr = lr_at(step, total_steps, cfg)
            for i in idx:
                rec = records[i]
                graph = graphs[i]
                if flips[i]:
                    rec = _flip_record(rec)
                    if cfg.mode.uses_crf and cfg.crf_weight != 0.0:
                        if i not in flipped_cache:
                            flipped_cache[i] = build_affinity(rec.image, cfg.affinity)
                        graph = flipped_cache[i]
                fld = net.forward(model_cfg, params, rec.image)
                value, logit_grad = _image_loss(cfg.mode, rec, fld, graph, cfg,
                                                fixed_target)
                if math.isnan(value):
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch}, step {step}, "
                        f"image {rec.image_id}")
                loss_sum += min(value, LOSS_CLAMP)
                g = net.backward(model_cfg, params, rec.image, logit_grad)
                grad_sum += g.vector
            grad = grad_sum / idx.size
            if cfg.weight_decay:
                grad = grad + cfg.weight_decay * params.vector
            velocity = cfg.momentum * velocity - current_lr * grad
            params = net.ModelParams(params.vector + velocity, params.shapes)
            step += 1

        row = {"epoch": epoch, "mean_loss": loss_sum / n,
               "lr": lr_at(min(step, total_steps), total_steps, cfg), "val": None}
        if val_records and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
            row["val"] = evaluate(model_cfg, params, val_records)
            score = row["val"][metric_name]
            if score is not None and score > best_metric:
                best_metric = score
                best_epoch = epoch
                best_params = params
        epoch_rows.append(row)

    if not val_records:
        best_epoch = cfg.epochs
        best_params = params
        best_value = None
    else:
        best_value = None if best_metric == -np.inf else float(best_metric)

    ckpt = net.checkpoint_bytes(model_cfg, params)
    report = TrainReport(
        mode=cfg.mode.value,
        epochs=epoch_rows,
        initial_loss=epoch_rows[0]["mean_loss"],
        final_loss=epoch_rows[-1]["mean_loss"],
        best_epoch=best_epoch,
        best_metric_name=metric_name,
        best_metric_value=best_value,
        checkpoint_id=hashlib.sha256(ckpt).hexdigest(),
        wall_time_s=time.perf_counter() - t_start,
        final_params=params,
        best_params=best_params,
    )
    if checkpoint_dir is not None:
        out = Path(checkpoint_dir)
        out.mkdir(parents=True, exist_ok=True)
        net.save_checkpoint(out / "final.ckpt", model_cfg, params)
        net.save_checkpoint(out / "best.ckpt", model_cfg, best_params)
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1))
    return report
