"""All supervision losses, each returning (value, gradient).

Field losses return the gradient w.r.t. the field's logits, chained
through the softmax and (where applicable) the per-image prediction
average.  Batch-level losses (fairness/balance/weighted CE) return a
scalar per their contracts; their analytic gradients live in the
``*_grad`` helpers used by the gradient-check suite and the loss probe.

Logarithms in training paths are floored at LOG_FLOOR to keep the
zero-avoiding limits from poisoning gradient arithmetic; the floor is
far below anything a softmax produces in these desk-scale settings, so
analytic-value tests see the exact forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import PredictionField, SeedSet, TagSet, softmax_vjp
from .simplex import UNDEFINED, CategoricalDist, kl_reverse

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class BarrierConfig:
    """Flat-bottom threshold (epsilon) and per-class lower size bounds (a)."""

    epsilon: float = 0.1
    a: tuple[float, ...] = ()

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")
        if any(not (0.0 <= ak <= 1.0) for ak in self.a):
            raise ValueError("size bounds must lie in [0, 1]")


@dataclass(frozen=True)
class WeightedCEConfig:
    """Effective-number class reweighting: w_k proportional to 1/(1-beta^{v_k})."""

    beta: float
    class_counts: tuple[float, ...]

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        if any(c < 0 for c in self.class_counts):
            raise ValueError("class counts must be nonnegative")

    def weights(self) -> np.ndarray:
        """Normalized so the weights sum to K."""
        raw = self.raw_weights()
        return raw * (raw.size / raw.sum())

    def raw_weights(self) -> np.ndarray:
        counts = np.asarray(self.class_counts, dtype=np.float64)
        return 1.0 / (1.0 - self.beta ** counts)


def _flog(x):
    return np.log(np.maximum(x, LOG_FLOOR))


def _avg(field: PredictionField) -> np.ndarray:
    return field.flat_probs().mean(axis=0)


def _avg_grad_to_logits(field: PredictionField, grad_avg: np.ndarray) -> np.ndarray:
    # every pixel sees grad_avg / |Omega| on its probs
    g = np.broadcast_to(grad_avg / field.num_pixels, field.probs.shape)
    return softmax_vjp(field.probs, g)


def size_target_loss(field: PredictionField, v: CategoricalDist):
    """KL(v || avg prediction): the size-target supervision loss."""
    if v.k != field.k:
        raise ValueError("target dimension mismatch")
    sbar = _avg(field)
    vp = v.probs
    pos = vp > 0
    value = float(np.sum(vp[pos] * (np.log(vp[pos]) - _flog(sbar[pos]))))
    grad_avg = np.zeros_like(sbar)
    grad_avg[pos] = -vp[pos] / np.maximum(sbar[pos], LOG_FLOOR)
    return value, _avg_grad_to_logits(field, grad_avg)


def crf_loss(field: PredictionField, graph):
    """Bilinear Potts relaxation: sum_k (1 - S^k)^T W S^k."""
    s = field.flat_probs()
    if graph.num_pixels != s.shape[0]:
        raise ValueError("graph / field size mismatch")
    ws = graph.apply(s)                       # (N, K)
    value = float(np.sum((1.0 - s) * ws))
    # d/dS^k = W 1 - 2 W S^k   (W symmetric)
    grad_s = (graph.degrees[:, None] - 2.0 * ws).reshape(field.probs.shape)
    return value, softmax_vjp(field.probs, grad_s)


def partial_ce_loss(field: PredictionField, seeds: SeedSet):
    """Cross-entropy restricted to seed pixels; empty seeds contribute 0."""
    seeds.validate_against(field.height, field.width, field.k)
    value = 0.0
    grad_s = np.zeros_like(field.probs)
    for r, c, y in seeds:
        value -= float(_flog(field.probs[r, c, y]))
        grad_s[r, c, y] -= 1.0 / max(field.probs[r, c, y], LOG_FLOOR)
    return value, softmax_vjp(field.probs, grad_s)


def expansion_loss(field: PredictionField, tags: TagSet):
    """Log-barrier pushing tag classes towards positive average size.

    Equals KL(u_T || avg) up to a constant, hence biased to equal-size
    tag segments.
    """
    tags.validate_against(field.k)
    sbar = _avg(field)
    idx = list(tags)
    value = float(-np.sum(_flog(sbar[idx])))
    grad_avg = np.zeros_like(sbar)
    grad_avg[idx] = -1.0 / np.maximum(sbar[idx], LOG_FLOOR)
    return value, _avg_grad_to_logits(field, grad_avg)


def suppression_loss(field: PredictionField, tags: TagSet):
    """Log-barrier pushing non-tag classes towards zero average size."""
    tags.validate_against(field.k)
    sbar = _avg(field)
    idx = [k for k in range(field.k) if k not in tags]
    value = float(-np.sum(_flog(1.0 - sbar[idx])))
    grad_avg = np.zeros_like(sbar)
    grad_avg[idx] = 1.0 / np.maximum(1.0 - sbar[idx], LOG_FLOOR)
    return value, _avg_grad_to_logits(field, grad_avg)


def flat_log_barrier(field: PredictionField, tags: TagSet, cfg: BarrierConfig,
                     literal_printed_form: bool = False):
    """Thresholded log-barrier on tag sizes.

    Default semantics: -sum ln(min{avg, eps}/eps), flat (zero, no
    gradient) once a tag's average size clears eps.  The literal printed
    variant -sum ln max{avg, eps} is flat *below* eps instead.
    """
    tags.validate_against(field.k)
    sbar = _avg(field)
    idx = list(tags)
    eps = cfg.epsilon
    grad_avg = np.zeros_like(sbar)
    if literal_printed_form:
        value = float(-np.sum(np.log(np.maximum(sbar[idx], eps))))
        above = sbar[idx] > eps
        grad_avg[np.asarray(idx)[above]] = -1.0 / sbar[np.asarray(idx)[above]]
    else:
        value = float(-np.sum(_flog(np.minimum(sbar[idx], eps) / eps)))
        below = sbar[idx] < eps
        sel = np.asarray(idx)[below]
        grad_avg[sel] = -1.0 / np.maximum(sbar[sel], LOG_FLOOR)
    return value, _avg_grad_to_logits(field, grad_avg)


def quadratic_barrier(field: PredictionField, cfg: BarrierConfig):
    """Thresholded quadratic size barrier: sum_k max{a_k - avg_k, 0}^2."""
    if len(cfg.a) != field.k:
        raise ValueError(f"need {field.k} lower bounds, got {len(cfg.a)}")
    sbar = _avg(field)
    deficit = np.maximum(np.asarray(cfg.a) - sbar, 0.0)
    value = float(np.sum(deficit ** 2))
    return value, _avg_grad_to_logits(field, -2.0 * deficit)


def absent_class_suppressor(field: PredictionField, obj_class: int):
    """Quadratic suppression of one class's average size: (avg_obj)^2."""
    if not (0 <= obj_class < field.k):
        raise ValueError("object class out of range")
    sbar = _avg(field)
    value = float(sbar[obj_class] ** 2)
    grad_avg = np.zeros_like(sbar)
    grad_avg[obj_class] = 2.0 * sbar[obj_class]
    return value, _avg_grad_to_logits(field, grad_avg)


def full_ce_loss(field: PredictionField, mask: np.ndarray):
    """Per-pixel cross-entropy against a full mask, mean over pixels."""
    if mask.shape != (field.height, field.width):
        raise ValueError("mask shape mismatch")
    probs = field.flat_probs()
    y = mask.reshape(-1).astype(np.int64)
    picked = probs[np.arange(y.size), y]
    value = float(-np.mean(_flog(picked)))
    grad_s = np.zeros_like(probs)
    grad_s[np.arange(y.size), y] = -1.0 / (np.maximum(picked, LOG_FLOOR) * y.size)
    return value, softmax_vjp(field.probs, grad_s.reshape(field.probs.shape))


def _batch_mean(batch) -> np.ndarray:
    if not batch:
        raise ValueError("empty batch")
    return np.mean([d.probs for d in batch], axis=0)


def fairness_loss(batch) -> float:
    """Negative entropy of the batch-mean prediction; minimal when uniform."""
    shat = _batch_mean(batch)
    pos = shat > 0
    return float(np.sum(shat[pos] * np.log(shat[pos])))


def fairness_loss_grad(batch) -> np.ndarray:
    """d fairness / d item-probs (identical for every batch item)."""
    shat = _batch_mean(batch)
    return (_flog(shat) + 1.0) / len(batch)


def balance_loss(batch, v: CategoricalDist):
    """KL(batch mean || v); UNDEFINED whenever the target support is too small."""
    return kl_reverse(CategoricalDist(_batch_mean(batch)), v)


def balance_loss_grad(batch, v: CategoricalDist):
    shat = _batch_mean(batch)
    if np.any(v.probs[shat > 0] == 0):
        return UNDEFINED
    return (_flog(shat) - _flog(v.probs) + 1.0) / len(batch)


def weighted_ce_loss(predictions, labels, cfg: WeightedCEConfig) -> float:
    """Class-rebalanced cross-entropy over image-level predictions."""
    w = cfg.weights()
    value = 0.0
    for pred, y in zip(predictions, labels, strict=True):
        value -= float(w[y] * _flog(pred.probs[y]))
    return value


def weighted_ce_grad(predictions, labels, cfg: WeightedCEConfig) -> np.ndarray:
    """d loss / d prediction-probs, one row per item."""
    w = cfg.weights()
    grads = np.zeros((len(predictions), predictions[0].k))
    for i, (pred, y) in enumerate(zip(predictions, labels, strict=True)):
        grads[i, y] = -w[y] / max(pred.probs[y], LOG_FLOOR)
    return grads


def total_loss_image_level(field: PredictionField, v: CategoricalDist, graph,
                           size_weight: float = 1.0, crf_weight: float = 1.0):
    """Size-target loss + CRF loss (the proposed image-level objective)."""
    sv, sg = size_target_loss(field, v)
    cv, cg = crf_loss(field, graph)
    return size_weight * sv + crf_weight * cv, size_weight * sg + crf_weight * cg


def total_loss_seeded(field: PredictionField, v: CategoricalDist, graph,
                      seeds: SeedSet, size_weight: float = 1.0,
                      crf_weight: float = 1.0, seed_weight: float = 1.0):
    """Image-level objective plus partial cross-entropy on seeds."""
    tv, tg = total_loss_image_level(field, v, graph,
                                    size_weight=size_weight, crf_weight=crf_weight)
    pv, pg = partial_ce_loss(field, seeds)
    return tv + seed_weight * pv, tg + seed_weight * pg
