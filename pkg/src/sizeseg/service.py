"""HTTP backend for the human size-annotation workflow.

Serves images and tag lists to a browser client that never sees ground
truth (blind protocol), persists size estimates to an append-only
newline-delimited JSON log, reports accuracy statistics against the
server-side ground truth, and exports trainer-compatible size files.

Client-facing endpoints (/api/manifest, /api/image/{id}) carry no size
or mask information; /api/stats and /api/export are experimenter-facing
and compare estimates with ground truth after the fact.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .metrics import REHistogram, relative_error
from .simplex import CategoricalDist
from .synthdata import load_manifest, load_sizes, save_sizes

GRID_MODES = ("5x4", "3x3", "none")


class AnnotationIn(BaseModel):
    request_id: str = Field(min_length=1, max_length=128)
    image_id: str = Field(min_length=1)
    class_id: int = Field(ge=0)
    fraction: float = Field(ge=0.0, le=1.0)
    elapsed_ms: float = Field(ge=0.0)
    grid_mode: Literal["5x4", "3x3", "none"] = "none"
    annotator: str = Field(default="anon", min_length=1)


class ExportRequest(BaseModel):
    filename: str = Field(default="annotated.json", pattern=r"^[\w.-]+\.json$")
    annotator: str | None = None


class RecordStore:
    """Append-only NDJSON log with idempotent writes keyed by request id."""

    def __init__(self, path):
        self.path = Path(path)
        self.lock = threading.Lock()
        self.records: list[dict] = []
        self.by_request: dict[str, str] = {}
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    rec = json.loads(line)
                    self.records.append(rec)
                    self.by_request[rec["request_id"]] = rec["record_id"]
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, payload: dict) -> tuple[str, bool]:
        """Returns (record id, created); replays return the original id."""
        with self.lock:
            existing = self.by_request.get(payload["request_id"])
            if existing is not None:
                return existing, False
            record_id = f"r{len(self.records):06d}"
            rec = {"record_id": record_id, "timestamp": time.time(), **payload}
            with open(self.path, "a") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
            self.records.append(rec)
            self.by_request[payload["request_id"]] = record_id
            return record_id, True

    def snapshot(self) -> list[dict]:
        with self.lock:
            return list(self.records)


def latest_per_key(records) -> dict[tuple[str, str, int], dict]:
    """Last write wins per (annotator, image, class)."""
    latest = {}
    for rec in records:
        latest[(rec["annotator"], rec["image_id"], rec["class_id"])] = rec
    return latest


class DatasetContext:
    def __init__(self, root):
        self.root = Path(root)
        manifest = load_manifest(self.root)
        self.num_classes = int(manifest["num_classes"])
        self.class_names = manifest["class_names"]
        self.images = {e["id"]: e for e in manifest["images"]}
        self.order = [e["id"] for e in manifest["images"]]
        self.truth: dict[str, CategoricalDist] = load_sizes(
            self.root / "sizes" / "exact.json", self.num_classes)

    def client_manifest(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "class_names": self.class_names,
            "images": [{
                "id": image_id,
                "tags": self.images[image_id]["tags"],
                "height": self.images[image_id]["height"],
                "width": self.images[image_id]["width"],
            } for image_id in self.order],
        }


def create_app(dataset_dir=None, store_path=None, ui_dir=None) -> FastAPI:
    app = FastAPI(title="size annotation service")
    ctx: DatasetContext | None = None
    if dataset_dir is not None:
        ctx = DatasetContext(dataset_dir)
        if store_path is None:
            store_path = Path(dataset_dir) / "annotations.ndjson"
    store = RecordStore(store_path) if store_path is not None else None

    def need_dataset() -> DatasetContext:
        if ctx is None:
            raise HTTPException(status_code=503, detail="no dataset loaded")
        return ctx

    @app.get("/api/manifest")
    def get_manifest():
        return need_dataset().client_manifest()

    @app.get("/api/image/{image_id}")
    def get_image(image_id: str):
        d = need_dataset()
        entry = d.images.get(image_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id}")
        data = (d.root / entry["image"]).read_bytes()
        return Response(content=data, media_type="image/png")

    @app.post("/api/annotation", status_code=201)
    def post_annotation(body: AnnotationIn, response: Response):
        d = need_dataset()
        entry = d.images.get(body.image_id)
        if entry is None:
            raise HTTPException(status_code=422,
                                detail=f"unknown image {body.image_id}")
        if body.class_id == 0:
            raise HTTPException(status_code=422,
                                detail="background is derived at export, not annotated")
        if body.class_id not in entry["tags"]:
            raise HTTPException(
                status_code=422,
                detail=f"class {body.class_id} is not tagged in {body.image_id}")
        record_id, created = store.append(body.model_dump())
        if not created:
            response.status_code = 200
        return {"record_id": record_id}

    @app.get("/api/stats")
    def get_stats():
        d = need_dataset()
        latest = latest_per_key(store.snapshot())
        hist = REHistogram(d.num_classes)
        re_sums = [0.0] * d.num_classes
        ms_sums = [0.0] * d.num_classes
        counts = [0] * d.num_classes
        complete = 0
        annotated_images = set()
        for (_, image_id, class_id), rec in latest.items():
            annotated_images.add(image_id)
            truth = float(d.truth[image_id].probs[class_id])
            re = relative_error(rec["fraction"], truth)
            hist.add(class_id, re)
            re_sums[class_id] += re
            ms_sums[class_id] += rec["elapsed_ms"]
            counts[class_id] += 1
        per_image_classes: dict[str, set] = {}
        for (_, image_id, class_id) in latest:
            per_image_classes.setdefault(image_id, set()).add(class_id)
        for image_id, done in per_image_classes.items():
            tags = {t for t in d.images[image_id]["tags"] if t != 0}
            if tags and tags <= done:
                complete += 1
        per_class = {}
        for k in range(1, d.num_classes):
            if counts[k]:
                per_class[str(k)] = {
                    "mean_re": re_sums[k] / counts[k],
                    "mean_elapsed_ms": ms_sums[k] / counts[k],
                    "count": counts[k],
                }
        return {
            "records": len(store.snapshot()),
            "annotated_images": len(annotated_images),
            "complete_images": complete,
            "per_class": per_class,
            "histogram": hist.to_dict(),
        }

    @app.post("/api/export")
    def post_export(body: ExportRequest):
        d = need_dataset()
        latest = latest_per_key(store.snapshot())
        by_image: dict[str, dict[int, float]] = {}
        for (annotator, image_id, class_id), rec in latest.items():
            if body.annotator is not None and annotator != body.annotator:
                continue
            by_image.setdefault(image_id, {})[class_id] = rec["fraction"]
        exported: dict[str, CategoricalDist] = {}
        skipped, rescaled = [], []
        for image_id in d.order:
            tags = {t for t in d.images[image_id]["tags"] if t != 0}
            got = by_image.get(image_id, {})
            if not tags or set(got) < tags:
                skipped.append(image_id)
                continue
            vec = [0.0] * d.num_classes
            for k in tags:
                vec[k] = got[k]
            total = sum(vec)
            if total > 1.0:
                vec = [f / total for f in vec]
                rescaled.append(image_id)
                total = 1.0
            vec[0] = 1.0 - total
            exported[image_id] = CategoricalDist(vec)
        out_path = d.root / "sizes" / body.filename
        if exported:
            save_sizes(out_path, exported)
        return {
            "path": str(out_path) if exported else None,
            "exported": len(exported),
            "skipped": skipped,
            "rescaled": rescaled,
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app
