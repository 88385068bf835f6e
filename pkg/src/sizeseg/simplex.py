"""Categorical distributions on the K-simplex and size-target primitives.

Covers the image-level quantities the size losses operate on: size
targets, average predictions, tag-uniform priors, multiplicative
Gaussian corruption of exact sizes, and the closed-form link between
the corruption bandwidth sigma and the mean relative size error
(mre = sqrt(2/pi) * sigma, the mean absolute deviation of N(0, sigma)).

All randomness flows through named, seedable generators: corruption of
a dataset uses one substream per image, spawned from the root seed and
the image index, so results are reproducible across platforms and
independent of iteration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUM_TOL = 1e-9

MRE_PER_SIGMA = math.sqrt(2.0 / math.pi)


class Undefined:
    """Marker for an ill-defined reverse KL (positive mass over a zero target)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __bool__(self):
        return False


UNDEFINED = Undefined()


@dataclass(frozen=True, eq=False)
class CategoricalDist:
    """A point on the K-simplex: nonnegative entries summing to 1.

    Used for size targets v, exact sizes v-hat, average predictions,
    and uniform priors alike.
    """

    probs: np.ndarray

    def __init__(self, probs):
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a nonempty 1-D vector")
        if np.any(p < 0):
            raise ValueError(f"negative probability entry: {p.min()}")
        s = float(p.sum())
        if abs(s - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {s!r}, not 1 within {SUM_TOL}")
        object.__setattr__(self, "probs", p)
        self.probs.setflags(write=False)

    @property
    def k(self) -> int:
        return self.probs.size

    def __getitem__(self, i) -> float:
        return float(self.probs[i])

    def support(self) -> set[int]:
        return {int(i) for i in np.nonzero(self.probs)[0]}

    def allclose(self, other: "CategoricalDist", tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.probs, other.probs, atol=tol, rtol=0))


@dataclass(frozen=True)
class CorruptionConfig:
    """Multiplicative white-noise corruption of exact sizes."""

    sigma: float
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def average_prediction(field) -> CategoricalDist:
    """Mean of the per-pixel predictions: the image-level size estimate."""
    probs = field.probs
    n = probs.shape[0] * probs.shape[1]
    if n == 0:
        raise ValueError("empty pixel domain")
    return CategoricalDist(probs.reshape(n, -1).mean(axis=0))


def kl_forward(v: CategoricalDist, q: CategoricalDist) -> float:
    """KL(v || q) with the target first.

    Zero-avoiding: returns math.inf when some v_k > 0 meets q_k = 0.
    0 * ln(0/q) terms contribute 0.
    """
    vp, qp = v.probs, q.probs
    if vp.size != qp.size:
        raise ValueError("dimension mismatch")
    pos = vp > 0
    if np.any(qp[pos] == 0):
        return math.inf
    return float(np.sum(vp[pos] * np.log(vp[pos] / qp[pos])))


def kl_reverse(q: CategoricalDist, v: CategoricalDist):
    """KL(q || v) with the estimate first.

    Returns UNDEFINED when some q_k > 0 sits over v_k = 0 (zeros at the
    denominator inside the logarithm make the loss unusable).
    """
    qp, vp = q.probs, v.probs
    if qp.size != vp.size:
        raise ValueError("dimension mismatch")
    pos = qp > 0
    if np.any(vp[pos] == 0):
        return UNDEFINED
    return float(np.sum(qp[pos] * np.log(qp[pos] / vp[pos])))


def uniform_over(tags, k: int) -> CategoricalDist:
    """Uniform distribution over a tag set: mass 1/|T| on each tag class."""
    tags = set(tags)
    if not tags:
        raise ValueError("empty tag set")
    if any(t < 0 or t >= k for t in tags):
        raise ValueError(f"tag out of range for K={k}: {sorted(tags)}")
    p = np.zeros(k)
    p[sorted(tags)] = 1.0 / len(tags)
    return CategoricalDist(p)


def _corrupt_with_noise(exact: CategoricalDist, eps: np.ndarray) -> CategoricalDist:
    """Apply v_k <- (1+eps_k) * vhat_k to positive entries, clamp, renormalize.

    Exact zeros stay zero; one eps is consumed per positive entry.
    Raises if everything clamps to zero (caller resamples).
    """
    vhat = exact.probs
    out = np.zeros_like(vhat)
    pos = vhat > 0
    out[pos] = np.maximum(vhat[pos] * (1.0 + eps), 0.0)
    total = out.sum()
    if total <= 0:
        raise FloatingPointError("all corrupted entries clamped to zero")
    return CategoricalDist(out / total)


def corruption_rng(cfg: CorruptionConfig, image_index: int = 0) -> np.random.Generator:
    """Per-image substream: one independent Philox stream per (seed, image)."""
    return np.random.Generator(np.random.Philox(key=np.uint64(cfg.rng_seed),
                                                counter=[0, 0, 0, image_index]))


def corrupt_sizes(exact: CategoricalDist, cfg: CorruptionConfig,
                  image_index: int = 0) -> CategoricalDist:
    """Corrupt exact sizes with multiplicative N(0, sigma) noise.

    Deterministic given (cfg.rng_seed, image_index).  Negative corrupted
    entries are clamped to 0 before renormalization; in the astronomically
    unlikely event every entry clamps, the noise is redrawn.
    """
    if cfg.sigma == 0:
        return exact
    rng = corruption_rng(cfg, image_index)
    n_pos = int(np.count_nonzero(exact.probs > 0))
    while True:
        eps = rng.normal(0.0, cfg.sigma, size=n_pos)
        try:
            return _corrupt_with_noise(exact, eps)
        except FloatingPointError:
            continue


def sigma_for_mre(mre: float) -> float:
    """Noise std giving a prescribed mean relative error (inverse of Eq. mre law)."""
    if mre < 0:
        raise ValueError("mre must be nonnegative")
    return mre / MRE_PER_SIGMA


def mre_for_sigma(sigma: float) -> float:
    """Expected relative size error of the corruption: sqrt(2/pi) * sigma."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    return MRE_PER_SIGMA * sigma


def project_to_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    y = np.asarray(y, dtype=np.float64)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, y.size + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


def minimize_over_simplex(grad_fn, k: int, steps: int = 5000, lr: float = 0.05,
                          start: np.ndarray | None = None) -> np.ndarray:
    """Projected gradient descent over the K-simplex.

    grad_fn maps a simplex point (ndarray) to a gradient (ndarray).  Used
    by the equal-size-bias checks; deliberately independent of the loss
    implementations it is used to probe.
    """
    x = np.full(k, 1.0 / k) if start is None else np.asarray(start, dtype=np.float64)
    for _ in range(steps):
        x = project_to_simplex(x - lr * grad_fn(x))
    return x
