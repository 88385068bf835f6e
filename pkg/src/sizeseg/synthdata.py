"""Synthetic segmentation datasets with exact size targets and seeds.

Two generators:

* ``shapes``: multi-class scenes of colored ellipses, rectangles and
  triangles over a textured background.  Each object class has its own
  color distribution so the classes are learnable from appearance, while
  overlaps and noise keep the task non-trivial.
* ``medical-like``: binary images with a single bright blob whose area
  is drawn from a narrow distribution, mimicking the low size
  variability of organ segmentation data.

On-disk layout: ``manifest.json``, ``images/*.png``, ``masks/*.png``
(indexed), ``seeds/*.json``, ``sizes/*.json``.  A sizes file maps image
id to {class id: fraction} with fractions summing to 1 within 1e-6; it
is the interchange format shared by the trainer and the annotation
service.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from skimage.measure import label as _cc_label
from skimage.morphology import dilation, disk, skeletonize

from .fields import SeedSet, TagSet
from .simplex import CategoricalDist

SIZES_SUM_TOL = 1e-6

# object-class colors; index 0 is the background base color
_PALETTE = (
    (0.62, 0.60, 0.58),
    (0.85, 0.25, 0.25),
    (0.25, 0.70, 0.30),
    (0.25, 0.35, 0.85),
    (0.90, 0.80, 0.25),
    (0.80, 0.30, 0.80),
    (0.30, 0.80, 0.80),
    (0.90, 0.55, 0.20),
    (0.50, 0.30, 0.70),
    (0.55, 0.75, 0.40),
)

_MODES = ("shapes", "medical-like")


@dataclass(frozen=True)
class GenConfig:
    mode: str = "shapes"
    num_classes: int = 5
    height: int = 64
    width: int = 64
    min_shapes: int = 2
    max_shapes: int = 4
    color_noise: float = 0.05
    texture_noise: float = 0.03
    object_fraction: float = 0.12
    size_variability: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.num_classes < 2:
            raise ValueError("need background plus at least one object class")
        if self.mode == "shapes" and self.num_classes > len(_PALETTE):
            raise ValueError(
                f"at most {len(_PALETTE) - 1} object classes are available")
        if self.mode == "medical-like" and self.num_classes != 2:
            raise ValueError("medical-like data is binary")
        if self.height < 8 or self.width < 8:
            raise ValueError("images must be at least 8x8")
        if not (1 <= self.min_shapes <= self.max_shapes):
            raise ValueError("invalid shapes-per-image range")
        if self.size_variability < 0 or not (0 < self.object_fraction < 0.5):
            raise ValueError("invalid size parameters")


@dataclass(frozen=True)
class ScribbleConfig:
    length_ratio: float = 0.0
    stroke_width: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.length_ratio <= 1.0):
            raise ValueError("length_ratio must lie in [0, 1]")
        if self.stroke_width < 1:
            raise ValueError("stroke_width must be >= 1")


@dataclass(frozen=True, eq=False)
class SampleRecord:
    """One image with ground truth, tags, and optional working supervision."""

    image_id: str
    image: np.ndarray           # (H, W, 3) float64 in [0, 1]
    mask: np.ndarray            # (H, W) int class ids
    tags: TagSet
    exact_sizes: CategoricalDist
    sizes: CategoricalDist | None = None
    seeds: SeedSet | None = None

    def __post_init__(self):
        if self.mask.shape != self.image.shape[:2]:
            raise ValueError("mask and image disagree on spatial shape")
        support = self.exact_sizes.support()
        if set(self.tags) != set(support):
            raise ValueError("tags must be exactly the classes present in the mask")

    def effective_sizes(self) -> CategoricalDist:
        """Working size targets when set, otherwise the exact ones."""
        return self.sizes if self.sizes is not None else self.exact_sizes


def sizes_from_mask(mask: np.ndarray, num_classes: int) -> CategoricalDist:
    """Normalized class pixel counts of a label mask."""
    m = np.asarray(mask)
    if m.size == 0:
        raise ValueError("empty mask")
    if m.min() < 0 or m.max() >= num_classes:
        raise ValueError("mask contains out-of-range class ids")
    counts = np.bincount(m.reshape(-1).astype(np.int64), minlength=num_classes)
    return CategoricalDist(counts / m.size)


def dataset_mean_sizes(records) -> CategoricalDist:
    """Mean exact size vector over the dataset, renormalized."""
    records = list(records)
    if not records:
        raise ValueError("empty dataset")
    mean = np.mean([r.exact_sizes.probs for r in records], axis=0)
    return CategoricalDist(mean / mean.sum())


def _record_from_arrays(image_id, image, mask, num_classes,
                        sizes=None, seeds=None) -> SampleRecord:
    exact = sizes_from_mask(mask, num_classes)
    tags = TagSet(frozenset(exact.support()))
    return SampleRecord(image_id=image_id, image=image, mask=mask, tags=tags,
                        exact_sizes=exact, sizes=sizes, seeds=seeds)


def _base_canvas(rng, cfg) -> np.ndarray:
    h, w = cfg.height, cfg.width
    base = np.array(_PALETTE[0]) + rng.normal(0.0, cfg.color_noise, size=3)
    img = np.broadcast_to(base, (h, w, 3)).copy()
    # gentle illumination ramp in a random direction
    gy, gx = rng.uniform(-0.05, 0.05, size=2)
    ramp = (gy * np.arange(h)[:, None] / h + gx * np.arange(w)[None, :] / w)
    return img + ramp[:, :, None]


def _shape_mask(rng, h, w) -> np.ndarray:
    """One random ellipse, rectangle or triangle as a boolean mask."""
    kind = rng.integers(3)
    r = rng.uniform(0.10, 0.22) * min(h, w)
    cy = rng.uniform(r, h - r)
    cx = rng.uniform(r, w - r)
    theta = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    u = np.cos(theta) * dx + np.sin(theta) * dy
    v = -np.sin(theta) * dx + np.cos(theta) * dy
    if kind == 0:                         # ellipse
        ar = rng.uniform(0.5, 1.0)
        return (u / r) ** 2 + (v / (r * ar)) ** 2 <= 1.0
    if kind == 1:                         # rectangle
        ar = rng.uniform(0.4, 1.0)
        return (np.abs(u) <= r) & (np.abs(v) <= r * ar)
    # triangle: half-plane intersection over rotated vertices
    verts = np.array([(0.0, -1.1 * r), (0.95 * r, 0.8 * r), (-0.95 * r, 0.8 * r)])
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    verts = verts @ rot.T
    inside = np.ones((h, w), dtype=bool)
    for i in range(3):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % 3]
        cross = (bx - ax) * (v - ay) - (by - ay) * (u - ax)
        inside &= cross <= 0
    return inside


def _generate_shapes(rng, cfg) -> tuple[np.ndarray, np.ndarray]:
    h, w = cfg.height, cfg.width
    img = _base_canvas(rng, cfg)
    mask = np.zeros((h, w), dtype=np.int64)
    n_shapes = int(rng.integers(cfg.min_shapes, cfg.max_shapes + 1))
    for _ in range(n_shapes):
        class_id = int(rng.integers(1, cfg.num_classes))
        blob = _shape_mask(rng, h, w)
        color = np.array(_PALETTE[class_id]) + rng.normal(0.0, cfg.color_noise, 3)
        img[blob] = color
        mask[blob] = class_id
    img += rng.normal(0.0, cfg.texture_noise, size=img.shape)
    return np.clip(img, 0.0, 1.0), mask


def _generate_medical(rng, cfg) -> tuple[np.ndarray, np.ndarray]:
    h, w = cfg.height, cfg.width
    img = np.full((h, w, 3), 0.35) + rng.normal(0.0, cfg.color_noise, size=3)
    gy, gx = rng.uniform(-0.08, 0.08, size=2)
    ramp = (gy * np.arange(h)[:, None] / h + gx * np.arange(w)[None, :] / w)
    img += ramp[:, :, None]

    frac = cfg.object_fraction * (1.0 + cfg.size_variability * rng.standard_normal())
    frac = float(np.clip(frac, 0.2 * cfg.object_fraction, 0.45))
    amp = rng.uniform(0.0, 0.15)
    lobes = int(rng.integers(2, 5))
    phase = rng.uniform(0.0, 2 * np.pi)
    ar = rng.uniform(0.6, 1.0)
    # pi*rx*ry*(1 + amp^2/2) approximates the wobbled-blob area
    area_px = frac * h * w
    rx = np.sqrt(area_px / (np.pi * ar * (1.0 + amp * amp / 2.0)))
    ry = ar * rx
    margin = max(rx, ry) * (1.0 + amp) + 1.0
    cy = rng.uniform(margin, h - margin) if 2 * margin < h else h / 2
    cx = rng.uniform(margin, w - margin) if 2 * margin < w else w / 2

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    theta = np.arctan2(dy, dx)
    radial = (dx / rx) ** 2 + (dy / ry) ** 2
    blob = radial <= (1.0 + amp * np.sin(lobes * theta + phase)) ** 2

    img[blob] = np.array([0.68, 0.66, 0.64]) + rng.normal(0.0, cfg.color_noise, 3)
    img += rng.normal(0.0, cfg.texture_noise, size=img.shape)
    mask = blob.astype(np.int64)
    return np.clip(img, 0.0, 1.0), mask


def generate(cfg: GenConfig, n: int) -> list[SampleRecord]:
    """n samples, deterministic given the config seed; one RNG substream each."""
    if n < 1:
        raise ValueError("need at least one sample")
    records = []
    for i in range(n):
        rng = np.random.default_rng([cfg.rng_seed, i])
        if cfg.mode == "shapes":
            img, mask = _generate_shapes(rng, cfg)
        else:
            img, mask = _generate_medical(rng, cfg)
        records.append(_record_from_arrays(f"img_{i:04d}", img, mask,
                                           cfg.num_classes))
    return records


def _ordered_skeleton(region: np.ndarray) -> list[tuple[int, int]]:
    """Skeleton pixels in a connected walking order (BFS from an endpoint)."""
    skel = skeletonize(region)
    pts = list(zip(*np.nonzero(skel)))
    if not pts:
        return []
    remaining = set(pts)
    order: list[tuple[int, int]] = []

    def neighbors(p, pool):
        r, c = p
        return [(r + dr, c + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
                if (dr or dc) and (r + dr, c + dc) in pool]

    while remaining:
        component_seed = min(remaining)
        # walk this component once to find an endpoint to start from
        comp = []
        queue = deque([component_seed])
        seen = {component_seed}
        while queue:
            p = queue.popleft()
            comp.append(p)
            for nb in neighbors(p, remaining):
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        endpoints = [p for p in comp if len(neighbors(p, seen)) <= 1]
        start = min(endpoints) if endpoints else min(comp)
        queue = deque([start])
        visited = {start}
        while queue:
            p = queue.popleft()
            order.append(p)
            for nb in neighbors(p, seen):
                if nb not in visited:
                    visited.add(nb)
                    queue.append(nb)
        remaining -= seen
    return order


def _interior_pixel(region: np.ndarray) -> tuple[int, int]:
    """Region pixel closest to the region centroid."""
    rr, cc = np.nonzero(region)
    cy, cx = rr.mean(), cc.mean()
    i = int(np.argmin((rr - cy) ** 2 + (cc - cx) ** 2))
    return int(rr[i]), int(cc[i])


def _region_stroke(region, cfg, rng) -> list[tuple[int, int]]:
    order = _ordered_skeleton(region)
    if not order:
        return [_interior_pixel(region)]
    length = max(1, round(cfg.length_ratio * len(order)))
    if cfg.length_ratio == 0.0 or length == 1:
        return [order[len(order) // 2]]
    if rng.integers(2):
        order = order[::-1]
    pts = order[:length]
    if cfg.stroke_width > 1:
        canvas = np.zeros(region.shape, dtype=bool)
        canvas[tuple(np.array(pts).T)] = True
        canvas = dilation(canvas, disk(cfg.stroke_width // 2)) & region
        pts = list(zip(*np.nonzero(canvas)))
    return pts


def generate_scribbles(mask: np.ndarray, cfg: ScribbleConfig) -> SeedSet:
    """Seed pixels per object region (plus background), labels from the mask.

    length_ratio 0 gives one interior click per connected object region
    and one background click; larger ratios grow connected strokes along
    each region's skeleton.  Regions too small to skeletonize degrade to
    a single click.
    """
    m = np.asarray(mask)
    rng = np.random.default_rng(cfg.rng_seed)
    seeds: list[tuple[int, int, int]] = []
    for class_id in sorted(np.unique(m)):
        if class_id == 0:
            continue
        components = _cc_label(m == class_id, connectivity=1)
        for comp_id in range(1, components.max() + 1):
            for r, c in _region_stroke(components == comp_id, cfg, rng):
                seeds.append((int(r), int(c), int(class_id)))
    if (m == 0).any():
        components = _cc_label(m == 0, connectivity=1)
        areas = np.bincount(components.reshape(-1))
        largest = int(np.argmax(areas[1:])) + 1
        for r, c in _region_stroke(components == largest, cfg, rng):
            seeds.append((int(r), int(c), 0))
    return SeedSet(tuple(seeds))


# ---------------------------------------------------------------------------
# dataset directory IO

def _mask_palette() -> list[int]:
    flat = []
    for color in _PALETTE:
        flat.extend(int(round(255 * v)) for v in color)
    flat.extend([0] * (768 - len(flat)))
    return flat


def save_sizes(path, sizes: dict[str, CategoricalDist]) -> None:
    payload = {
        image_id: {str(k): float(dist.probs[k]) for k in range(dist.k)}
        for image_id, dist in sizes.items()
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def load_sizes(path, num_classes: int) -> dict[str, CategoricalDist]:
    raw = json.loads(Path(path).read_text())
    out = {}
    for image_id, entry in raw.items():
        vec = np.zeros(num_classes)
        for key, frac in entry.items():
            k = int(key)
            if not (0 <= k < num_classes):
                raise ValueError(f"class id {k} out of range in {path}")
            vec[k] = float(frac)
        if abs(vec.sum() - 1.0) > SIZES_SUM_TOL or vec.min() < 0:
            raise ValueError(f"invalid size vector for {image_id} in {path}")
        out[image_id] = CategoricalDist(vec / vec.sum())
    return out


def save_seeds(path, seeds: dict[str, SeedSet]) -> None:
    payload = {image_id: [list(s) for s in seed_set]
               for image_id, seed_set in seeds.items()}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def load_seeds(path) -> dict[str, SeedSet]:
    raw = json.loads(Path(path).read_text())
    return {image_id: SeedSet(tuple((int(r), int(c), int(y)) for r, c, y in pts))
            for image_id, pts in raw.items()}


def default_class_names(cfg: GenConfig) -> list[str]:
    if cfg.mode == "medical-like":
        return ["background", "lesion"]
    return ["background"] + [f"object-{k}" for k in range(1, cfg.num_classes)]


def save_dataset(root, records, num_classes: int,
                 class_names: list[str] | None = None) -> None:
    """Write manifest, PNGs, and the exact sizes file under root."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    if class_names is None:
        class_names = ["background"] + [f"object-{k}" for k in range(1, num_classes)]
    if len(class_names) != num_classes:
        raise ValueError("one class name per class required")
    entries = []
    palette = _mask_palette()
    for rec in records:
        image_path = f"images/{rec.image_id}.png"
        mask_path = f"masks/{rec.image_id}.png"
        rgb = np.clip(np.round(rec.image * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(rgb, mode="RGB").save(root / image_path)
        m = Image.fromarray(rec.mask.astype(np.uint8), mode="P")
        m.putpalette(palette)
        m.save(root / mask_path)
        entries.append({
            "id": rec.image_id,
            "image": image_path,
            "mask": mask_path,
            "height": int(rec.mask.shape[0]),
            "width": int(rec.mask.shape[1]),
            "tags": sorted(int(t) for t in rec.tags),
        })
    manifest = {"num_classes": num_classes, "class_names": class_names,
                "images": entries}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    save_sizes(root / "sizes" / "exact.json",
               {rec.image_id: rec.exact_sizes for rec in records})


def load_manifest(root) -> dict:
    manifest_path = Path(root) / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {root}")
    return json.loads(manifest_path.read_text())


def load_dataset(root, sizes_path=None, seeds_path=None) -> list[SampleRecord]:
    """Read a dataset directory back into SampleRecords.

    sizes_path / seeds_path attach working supervision from the given
    files; exact sizes always come from the masks themselves.
    """
    root = Path(root)
    manifest = load_manifest(root)
    k = int(manifest["num_classes"])
    working = load_sizes(sizes_path, k) if sizes_path else {}
    seed_map = load_seeds(seeds_path) if seeds_path else {}
    records = []
    for entry in manifest["images"]:
        image = np.asarray(Image.open(root / entry["image"]).convert("RGB"),
                           dtype=np.float64) / 255.0
        mask = np.asarray(Image.open(root / entry["mask"]), dtype=np.int64)
        rec = _record_from_arrays(entry["id"], image, mask, k,
                                  sizes=working.get(entry["id"]),
                                  seeds=seed_map.get(entry["id"]))
        if sorted(int(t) for t in rec.tags) != sorted(entry["tags"]):
            raise ValueError(f"manifest tags disagree with mask for {entry['id']}")
        records.append(rec)
    return records
