"""Sparse symmetric pixel-affinity graphs with Gaussian intensity kernels.

Edges connect grid neighbors (4-, 8-, or disc-connectivity) and carry
w_pq = exp(-||I_p - I_q||^2 / (2 sigma^2)), so weights are near 1 inside
smooth regions and drop across high-contrast edges.  Each unordered pair
is stored once with p < q; apply() expands the symmetry.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

_MAGIC = b"SSAG"
_VERSION = 1
_EDGE_DTYPE = np.dtype([("p", "<i4"), ("q", "<i4"), ("w", "<f8")])

_CONNECTIVITIES = ("4", "8", "disc")


@dataclass(frozen=True)
class AffinityConfig:
    """Kernel bandwidth and neighborhood structure.

    sigma_i = None calibrates the bandwidth per image to the mean
    neighbor intensity distance; a float fixes it.
    """

    sigma_i: float | None = None
    connectivity: str = "4"
    radius: int = 1

    def __post_init__(self):
        if self.sigma_i is not None and not self.sigma_i > 0:
            raise ValueError("sigma_i must be positive")
        if self.connectivity not in _CONNECTIVITIES:
            raise ValueError(f"connectivity must be one of {_CONNECTIVITIES}")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")


@dataclass(frozen=True, eq=False)
class AffinityGraph:
    """Half-stored symmetric nonnegative edge weights over H*W pixels."""

    height: int
    width: int
    p: np.ndarray          # int32, p < q
    q: np.ndarray          # int32
    weights: np.ndarray    # float64, >= 0
    sigma_i: float | None = None
    connectivity: str | None = None
    radius: int | None = None
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.num_pixels
        object.__setattr__(self, "p", np.ascontiguousarray(self.p, dtype=np.int32))
        object.__setattr__(self, "q", np.ascontiguousarray(self.q, dtype=np.int32))
        object.__setattr__(self, "weights",
                           np.ascontiguousarray(self.weights, dtype=np.float64))
        if self.p.shape != self.q.shape or self.p.shape != self.weights.shape:
            raise ValueError("edge arrays must share one shape")
        if self.p.size:
            if not np.all(self.p < self.q):
                raise ValueError("edges must be stored once with p < q")
            if self.p.min() < 0 or self.q.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.min(self.weights) < 0:
                raise ValueError("edge weights must be nonnegative")
        deg = np.zeros(n, dtype=np.float64)
        np.add.at(deg, self.p, self.weights)
        np.add.at(deg, self.q, self.weights)
        object.__setattr__(self, "degrees", deg)

    @property
    def num_pixels(self) -> int:
        return self.height * self.width

    @property
    def num_edges(self) -> int:
        return int(self.p.size)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """W @ x for x of shape (num_pixels,) or (num_pixels, K)."""
        x = np.asarray(x, dtype=np.float64)
        flat = x.ndim == 1
        if flat:
            x = x[:, None]
        if x.shape[0] != self.num_pixels:
            raise ValueError(f"expected {self.num_pixels} rows, got {x.shape[0]}")
        out = np.zeros_like(x)
        _kernels.edge_matvec(self.p, self.q, self.weights,
                             np.ascontiguousarray(x), out)
        return out[:, 0] if flat else out

    def dense(self) -> np.ndarray:
        """Full (N, N) matrix; intended for small-image oracle checks."""
        w = np.zeros((self.num_pixels, self.num_pixels))
        w[self.p, self.q] = self.weights
        w[self.q, self.p] = self.weights
        return w

    def save(self, path) -> None:
        """Binary cache: magic, version, H, W, edge count, then LE triples."""
        records = np.empty(self.num_edges, dtype=_EDGE_DTYPE)
        records["p"] = self.p
        records["q"] = self.q
        records["w"] = self.weights
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<HIIQ", _VERSION, self.height, self.width,
                                 self.num_edges))
            fh.write(records.tobytes())

    @classmethod
    def load(cls, path) -> "AffinityGraph":
        with open(path, "rb") as fh:
            if fh.read(4) != _MAGIC:
                raise ValueError("not an affinity cache file")
            version, h, w, count = struct.unpack("<HIIQ", fh.read(18))
            if version != _VERSION:
                raise ValueError(f"unsupported cache version {version}")
            records = np.frombuffer(fh.read(count * _EDGE_DTYPE.itemsize),
                                    dtype=_EDGE_DTYPE)
            if records.size != count:
                raise ValueError("truncated affinity cache")
        return cls(height=h, width=w,
                   p=records["p"].astype(np.int32),
                   q=records["q"].astype(np.int32),
                   weights=records["w"].astype(np.float64))


def _half_offsets(connectivity: str, radius: int) -> list[tuple[int, int]]:
    """Neighbor offsets covering each unordered pair exactly once."""
    if connectivity == "4":
        return [(0, 1), (1, 0)]
    if connectivity == "8":
        return [(0, 1), (1, 0), (1, 1), (1, -1)]
    offsets = []
    for dy in range(0, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy == 0 and dx <= 0:
                continue
            if dy * dy + dx * dx <= radius * radius:
                offsets.append((dy, dx))
    return offsets


def build_affinity(image: np.ndarray,
                   cfg: AffinityConfig | None = None) -> AffinityGraph:
    """Gaussian-kernel graph over the image grid.

    Accepts (H, W) or (H, W, C) rasters with C in {1, 3}; uint8 input is
    rescaled to [0, 1] so the bandwidth lives in one intensity space.
    """
    if cfg is None:
        cfg = AffinityConfig()
    img = np.asarray(image)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError("image must be H x W or H x W x C with C in {1, 3}")
    h, w = img.shape[:2]
    if h == 0 or w == 0:
        raise ValueError("zero-size image")
    if img.dtype == np.uint8:
        img = img.astype(np.float64) / 255.0
    else:
        img = img.astype(np.float64)

    idx = np.arange(h * w, dtype=np.int32).reshape(h, w)
    p_parts, q_parts, d2_parts = [], [], []
    for dy, dx in _half_offsets(cfg.connectivity, cfg.radius):
        ys = slice(0, h - dy)
        xs = slice(max(0, -dx), w - max(0, dx))
        ys2 = slice(dy, h)
        xs2 = slice(max(0, dx), w + min(0, dx))
        a = idx[ys, xs].reshape(-1)
        b = idx[ys2, xs2].reshape(-1)
        if a.size == 0:
            continue
        diff = img[ys, xs] - img[ys2, xs2]
        d2_parts.append(np.sum(diff * diff, axis=2).reshape(-1))
        # disc offsets with dx < 0 produce b < a; normalize to p < q
        p_parts.append(np.minimum(a, b))
        q_parts.append(np.maximum(a, b))

    if p_parts:
        p = np.concatenate(p_parts)
        q = np.concatenate(q_parts)
        d2 = np.concatenate(d2_parts)
    else:
        p = np.empty(0, dtype=np.int32)
        q = np.empty(0, dtype=np.int32)
        d2 = np.empty(0, dtype=np.float64)

    sigma = cfg.sigma_i
    if sigma is None:
        sigma = float(np.mean(np.sqrt(d2))) if d2.size else 0.0
    if sigma <= 0:
        # constant image: every distance is zero, every weight is one
        weights = np.ones_like(d2)
        sigma = 1.0
    else:
        weights = np.exp(-d2 / (2.0 * sigma * sigma))

    return AffinityGraph(height=h, width=w, p=p.astype(np.int32),
                         q=q.astype(np.int32), weights=weights,
                         sigma_i=sigma, connectivity=cfg.connectivity,
                         radius=cfg.radius)
