"""Small segmentation models with closed-form forward and backward passes.

Two reference architectures:

* ``pixel-linear``: a softmax regression over handcrafted per-pixel
  features (raw channels, normalized position, 3x3 local mean and
  variance).  Convex given the features, useful as a sanity model.
* ``small-conv``: three 3x3 same-padding conv layers with ReLU followed
  by a 1x1 classifier head.

Parameters live in one flat float64 vector with a named shape table, so
optimizers can treat the model as a single array.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .fields import PredictionField

_ARCHITECTURES = ("pixel-linear", "small-conv")
_MAGIC = b"SSCK"
_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    architecture: str = "small-conv"
    in_channels: int = 3
    hidden_channels: int = 16
    kernel_size: int = 3
    num_classes: int = 2
    init_seed: int = 0

    def __post_init__(self):
        if self.architecture not in _ARCHITECTURES:
            raise ValueError(f"architecture must be one of {_ARCHITECTURES}")
        if self.in_channels < 1 or self.hidden_channels < 1:
            raise ValueError("channel counts must be positive")
        if self.kernel_size != 3:
            raise ValueError("only 3x3 conv kernels are supported")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")

    def num_features(self) -> int:
        """Per-pixel feature count for the pixel-linear architecture."""
        return 3 * self.in_channels + 2


def _layer_shapes(cfg: ModelConfig) -> tuple[tuple[str, tuple[int, ...]], ...]:
    if cfg.architecture == "pixel-linear":
        return (("w", (cfg.num_features(), cfg.num_classes)),
                ("b", (cfg.num_classes,)))
    ch, cin, k = cfg.hidden_channels, cfg.in_channels, cfg.num_classes
    return (("conv1_w", (ch, cin, 3, 3)), ("conv1_b", (ch,)),
            ("conv2_w", (ch, ch, 3, 3)), ("conv2_b", (ch,)),
            ("conv3_w", (ch, ch, 3, 3)), ("conv3_b", (ch,)),
            ("head_w", (k, ch)), ("head_b", (k,)))


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Flat parameter vector plus the shape table that indexes it."""

    vector: np.ndarray
    shapes: tuple[tuple[str, tuple[int, ...]], ...]

    def __post_init__(self):
        expected = sum(int(np.prod(s)) for _, s in self.shapes)
        if self.vector.ndim != 1 or self.vector.size != expected:
            raise ValueError(f"parameter vector must be flat with {expected} entries")
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("parameters must be finite")

    def view(self, name: str) -> np.ndarray:
        """Writable view of one named layer inside the flat vector."""
        offset = 0
        for key, shape in self.shapes:
            size = int(np.prod(shape))
            if key == name:
                return self.vector[offset:offset + size].reshape(shape)
            offset += size
        raise KeyError(name)

    def zeros_like(self) -> "ModelParams":
        return ModelParams(np.zeros_like(self.vector), self.shapes)


def init_params(cfg: ModelConfig) -> ModelParams:
    """Kaiming-style fan-in init from the config's seed; biases start at 0."""
    rng = np.random.default_rng(cfg.init_seed)
    chunks = []
    shapes = _layer_shapes(cfg)
    for name, shape in shapes:
        if name.endswith("_b") or name == "b":
            chunks.append(np.zeros(int(np.prod(shape))))
            continue
        if len(shape) == 4:                       # conv, ReLU follows
            fan_in = shape[1] * shape[2] * shape[3]
            std = np.sqrt(2.0 / fan_in)
        else:                                     # linear classifier
            fan_in = shape[0] if name == "w" else shape[1]
            std = np.sqrt(1.0 / fan_in)
        chunks.append(rng.normal(0.0, std, size=int(np.prod(shape))))
    return ModelParams(np.concatenate(chunks), shapes)


def _check_image(cfg: ModelConfig, image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] != cfg.in_channels:
        raise ValueError(f"expected H x W x {cfg.in_channels} input")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("empty image")
    return img


def pixel_features(cfg: ModelConfig, image: np.ndarray) -> np.ndarray:
    """(H, W, F) handcrafted features: channels, position, local stats."""
    img = _check_image(cfg, image)
    h, w, c = img.shape
    padded = np.pad(img, ((1, 1), (1, 1), (0, 0)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(0, 1))
    local_mean = win.mean(axis=(3, 4))
    local_var = np.maximum(win.var(axis=(3, 4)), 0.0)
    rows = np.broadcast_to(((np.arange(h) + 0.5) / h)[:, None], (h, w))
    cols = np.broadcast_to(((np.arange(w) + 0.5) / w)[None, :], (h, w))
    return np.concatenate(
        [img, rows[:, :, None], cols[:, :, None], local_mean, local_var], axis=2)


def _conv_forward_cached(params: ModelParams, img: np.ndarray):
    acts = [img]
    x = img
    for i in (1, 2, 3):
        pre = _kernels.conv3x3_forward(
            np.ascontiguousarray(x), params.view(f"conv{i}_w"),
            params.view(f"conv{i}_b"))
        acts.append(pre)
        x = np.maximum(pre, 0.0)
        acts.append(x)
    logits = x @ params.view("head_w").T + params.view("head_b")
    return logits, acts


def forward(cfg: ModelConfig, params: ModelParams, image: np.ndarray) -> PredictionField:
    img = _check_image(cfg, image)
    if cfg.architecture == "pixel-linear":
        logits = pixel_features(cfg, img) @ params.view("w") + params.view("b")
    else:
        logits, _ = _conv_forward_cached(params, img)
    return PredictionField.from_logits(logits)


def backward(cfg: ModelConfig, params: ModelParams, image: np.ndarray,
             logit_grad: np.ndarray) -> ModelParams:
    """Chain-rule gradient of a scalar loss w.r.t. every parameter.

    logit_grad is d loss / d logits at the forward output, shape (H, W, K).
    """
    img = _check_image(cfg, image)
    g = np.asarray(logit_grad, dtype=np.float64)
    if g.shape != (img.shape[0], img.shape[1], cfg.num_classes):
        raise ValueError("logit gradient shape mismatch")
    grads = params.zeros_like()
    if cfg.architecture == "pixel-linear":
        feats = pixel_features(cfg, img).reshape(-1, cfg.num_features())
        gf = g.reshape(-1, cfg.num_classes)
        grads.view("w")[:] = feats.T @ gf
        grads.view("b")[:] = gf.sum(axis=0)
        return grads

    logits, acts = _conv_forward_cached(params, img)
    relu3 = acts[6]
    h, w = img.shape[:2]
    gf = g.reshape(-1, cfg.num_classes)
    grads.view("head_w")[:] = gf.T @ relu3.reshape(-1, cfg.hidden_channels)
    grads.view("head_b")[:] = gf.sum(axis=0)
    gx = (gf @ params.view("head_w")).reshape(h, w, cfg.hidden_channels)
    for i in (3, 2, 1):
        pre, inp = acts[2 * i - 1], acts[2 * i - 2]
        gx = gx * (pre > 0.0)
        gx, gw, gb = _kernels.conv3x3_backward(
            np.ascontiguousarray(inp), params.view(f"conv{i}_w"),
            np.ascontiguousarray(gx))
        grads.view(f"conv{i}_w")[:] = gw
        grads.view(f"conv{i}_b")[:] = gb
    return grads


def checkpoint_bytes(cfg: ModelConfig, params: ModelParams) -> bytes:
    """Versioned header, JSON config, then the LE float64 parameter vector."""
    blob = json.dumps(asdict(cfg), sort_keys=True).encode("utf-8")
    return b"".join([
        _MAGIC,
        struct.pack("<HI", _VERSION, len(blob)),
        blob,
        struct.pack("<Q", params.vector.size),
        params.vector.astype("<f8").tobytes(),
    ])


def save_checkpoint(path, cfg: ModelConfig, params: ModelParams) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(cfg, params))


def load_checkpoint(path) -> tuple[ModelConfig, ModelParams]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a checkpoint file")
        version, blob_len = struct.unpack("<HI", fh.read(6))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        cfg = ModelConfig(**json.loads(fh.read(blob_len).decode("utf-8")))
        (count,) = struct.unpack("<Q", fh.read(8))
        vector = np.frombuffer(fh.read(count * 8), dtype="<f8").astype(np.float64)
        if vector.size != count:
            raise ValueError("truncated checkpoint")
    return cfg, ModelParams(vector, _layer_shapes(cfg))
