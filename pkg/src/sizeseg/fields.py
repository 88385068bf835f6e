"""Per-pixel prediction fields and the softmax plumbing the losses chain through."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_vjp(probs: np.ndarray, grad_probs: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. softmax outputs back to the logits.

    d/dlogit = S * (g - <g, S>), applied along the last axis.
    """
    inner = (grad_probs * probs).sum(axis=-1, keepdims=True)
    return probs * (grad_probs - inner)


@dataclass(frozen=True, eq=False)
class PredictionField:
    """Soft per-pixel K-class predictions over an H x W pixel grid.

    probs is always softmax(logits); both are kept because losses are
    defined on probabilities while gradients are reported w.r.t. logits.
    """

    logits: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_logits(cls, logits) -> "PredictionField":
        logits = np.asarray(logits, dtype=np.float64)
        if logits.ndim != 3:
            raise ValueError(f"logits must be (H, W, K), got shape {logits.shape}")
        if logits.shape[0] == 0 or logits.shape[1] == 0:
            raise ValueError("empty pixel domain")
        if logits.shape[2] < 2:
            raise ValueError("need at least 2 classes")
        return cls(logits=logits, probs=softmax(logits))

    @property
    def height(self) -> int:
        return self.logits.shape[0]

    @property
    def width(self) -> int:
        return self.logits.shape[1]

    @property
    def k(self) -> int:
        return self.logits.shape[2]

    @property
    def num_pixels(self) -> int:
        return self.height * self.width

    def flat_probs(self) -> np.ndarray:
        """(num_pixels, K) view of the probabilities, row-major pixel order."""
        return self.probs.reshape(self.num_pixels, self.k)


@dataclass(frozen=True)
class TagSet:
    """Class ids present in an image."""

    tags: frozenset[int]

    def __init__(self, tags):
        object.__setattr__(self, "tags", frozenset(int(t) for t in tags))
        if not self.tags:
            raise ValueError("tag set must be nonempty")
        if any(t < 0 for t in self.tags):
            raise ValueError("negative class id")

    def validate_against(self, k: int):
        if any(t >= k for t in self.tags):
            raise ValueError(f"tag out of range for K={k}: {sorted(self.tags)}")

    def __contains__(self, k: int) -> bool:
        return k in self.tags

    def __iter__(self):
        return iter(sorted(self.tags))

    def __len__(self):
        return len(self.tags)


@dataclass(frozen=True)
class SeedSet:
    """Sparse pixel-level labels: (row, col, class) triples, pixels unique."""

    seeds: tuple[tuple[int, int, int], ...]

    def __init__(self, seeds=()):
        seeds = tuple((int(r), int(c), int(y)) for r, c, y in seeds)
        pixels = [(r, c) for r, c, _ in seeds]
        if len(set(pixels)) != len(pixels):
            raise ValueError("duplicate seed pixel")
        object.__setattr__(self, "seeds", seeds)

    def validate_against(self, h: int, w: int, k: int):
        for r, c, y in self.seeds:
            if not (0 <= r < h and 0 <= c < w):
                raise ValueError(f"seed pixel ({r}, {c}) outside {h}x{w} grid")
            if not (0 <= y < k):
                raise ValueError(f"seed label {y} out of range for K={k}")

    def __len__(self):
        return len(self.seeds)

    def __iter__(self):
        return iter(self.seeds)
