"""Shared fixtures and small builders used across the test suite."""

import numpy as np
import pytest

from sizeseg.affinity import AffinityGraph
from sizeseg.fields import PredictionField
from sizeseg.gradcheck import central_difference, max_relative_error


ONE_HOT_GAP = 40.0  # logit gap large enough that softmax rounds to exact 1.0


def field_from_probs(probs) -> PredictionField:
    """Build a field whose per-pixel probabilities match `probs` (H, W, K).

    Entries must be strictly positive; rows must sum to 1.
    """
    p = np.asarray(probs, dtype=np.float64)
    return PredictionField.from_logits(np.log(p))


def one_hot_field(labels, k: int) -> PredictionField:
    """Field whose argmax (and, to within ~4e-18, probabilities) is one-hot."""
    labels = np.asarray(labels, dtype=np.int64)
    logits = np.zeros(labels.shape + (k,), dtype=np.float64)
    rows, cols = np.indices(labels.shape)
    logits[rows, cols, labels] = ONE_HOT_GAP
    return PredictionField.from_logits(logits)


def random_field(rng: np.random.Generator, h: int, w: int, k: int,
                 scale: float = 1.5) -> PredictionField:
    return PredictionField.from_logits(rng.normal(scale=scale, size=(h, w, k)))


def random_graph(rng: np.random.Generator, h: int, w: int,
                 density: float = 0.4) -> AffinityGraph:
    """Random sparse symmetric nonnegative graph over an h*w pixel grid."""
    n = h * w
    pairs = [(p, q) for p in range(n) for q in range(p + 1, n)
             if rng.random() < density]
    if not pairs:
        pairs = [(0, n - 1)]
    p = np.array([a for a, _ in pairs], dtype=np.int64)
    q = np.array([b for _, b in pairs], dtype=np.int64)
    w_e = rng.uniform(0.1, 1.0, size=len(pairs))
    return AffinityGraph(height=h, width=w, p=p, q=q, weights=w_e,
                         sigma_i=1.0, connectivity="4", radius=1)


def assert_logit_fd(loss_fn, logits, tol: float = 1e-4, h: float = 1e-5):
    """Check the analytic logit gradient of `loss_fn` against central differences.

    `loss_fn` maps a PredictionField to (value, grad_wrt_logits).
    """
    logits = np.asarray(logits, dtype=np.float64)

    def value_at(flat):
        field = PredictionField.from_logits(flat.reshape(logits.shape))
        return loss_fn(field)[0]

    _, grad = loss_fn(PredictionField.from_logits(logits))
    numeric = central_difference(value_at, logits.ravel().copy(), h=h)
    err = max_relative_error(np.asarray(grad).ravel(), numeric)
    assert err < tol, f"finite-difference mismatch: rel err {err:.3e}"


@pytest.fixture(scope="session")
def shapes_dataset():
    """Small deterministic shapes dataset shared by trainer/service/cli tests."""
    from sizeseg.synthdata import GenConfig, generate

    cfg = GenConfig(mode="shapes", num_classes=3, height=24, width=24,
                    rng_seed=7)
    return generate(cfg, 8)


@pytest.fixture(scope="session")
def medical_dataset():
    from sizeseg.synthdata import GenConfig, generate

    cfg = GenConfig(mode="medical-like", num_classes=2, height=24, width=24,
                    rng_seed=11)
    return generate(cfg, 6)
