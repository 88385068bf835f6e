"""Command-line entry point wiring every experiment stage.

Subcommands: gen-data, extract-sizes, corrupt-sizes, gen-scribbles,
train, eval, loss-probe, sweep, annotate-serve, report.

Conventions: exit code 0 on success, 2 on validation errors, 3 on
runtime failures; stdout carries data, stderr carries diagnostics.  A
--config JSON file overrides same-named flags.  SIZESEG_DATA_DIR
provides the default --dataset.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from . import losses, net, synthdata, trainer
from . import report as report_mod
from .affinity import AffinityConfig, build_affinity
from .fields import PredictionField, SeedSet, TagSet, softmax, softmax_vjp
from .gradcheck import central_difference, max_relative_error
from .losses import BarrierConfig, WeightedCEConfig
from .simplex import CategoricalDist, CorruptionConfig, corrupt_sizes, sigma_for_mre
from .trainer import SupervisionMode, TrainConfig

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class CliError(Exception):
    """Input or configuration problem; maps to exit code 2."""


def _require_dataset(args) -> Path:
    if not args.dataset:
        raise CliError("no dataset given: pass --dataset or set SIZESEG_DATA_DIR")
    root = Path(args.dataset)
    if not (root / "manifest.json").exists():
        raise CliError(f"{root} does not contain manifest.json")
    return root


def _resolve(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


# ---------------------------------------------------------------------------
# commands

def cmd_gen_data(args) -> int:
    cfg = synthdata.GenConfig(
        mode=args.mode, num_classes=args.num_classes, height=args.height,
        width=args.width, min_shapes=args.min_shapes, max_shapes=args.max_shapes,
        color_noise=args.color_noise, texture_noise=args.texture_noise,
        object_fraction=args.object_fraction,
        size_variability=args.size_variability, rng_seed=args.seed)
    records = synthdata.generate(cfg, args.count)
    synthdata.save_dataset(args.out, records, cfg.num_classes,
                           synthdata.default_class_names(cfg))
    print(json.dumps({"out": str(args.out), "count": len(records),
                      "mode": cfg.mode, "num_classes": cfg.num_classes}))
    return EXIT_OK


def cmd_extract_sizes(args) -> int:
    root = _require_dataset(args)
    records = synthdata.load_dataset(root)
    out = _resolve(root, args.out) or root / "sizes" / "exact.json"
    synthdata.save_sizes(out, {r.image_id: r.exact_sizes for r in records})
    print(json.dumps({"out": str(out), "images": len(records)}))
    return EXIT_OK


def cmd_corrupt_sizes(args) -> int:
    root = _require_dataset(args)
    if (args.mre is None) == (args.sigma is None):
        raise CliError("pass exactly one of --mre or --sigma")
    sigma = args.sigma if args.sigma is not None else sigma_for_mre(args.mre / 100.0)
    manifest = synthdata.load_manifest(root)
    exact = synthdata.load_sizes(root / "sizes" / "exact.json",
                                 manifest["num_classes"])
    cfg = CorruptionConfig(sigma=sigma, rng_seed=args.seed)
    corrupted = {}
    for index, entry in enumerate(manifest["images"]):
        corrupted[entry["id"]] = corrupt_sizes(exact[entry["id"]], cfg,
                                               image_index=index)
    default_name = (f"mre{args.mre:g}_seed{args.seed}.json" if args.mre is not None
                    else f"sigma{sigma:g}_seed{args.seed}.json")
    out = _resolve(root, args.out) or root / "sizes" / default_name
    synthdata.save_sizes(out, corrupted)
    print(json.dumps({"out": str(out), "sigma": sigma, "images": len(corrupted)}))
    return EXIT_OK


def cmd_gen_scribbles(args) -> int:
    root = _require_dataset(args)
    records = synthdata.load_dataset(root)
    seeds = {}
    for index, rec in enumerate(records):
        cfg = synthdata.ScribbleConfig(length_ratio=args.length_ratio,
                                       stroke_width=args.stroke_width,
                                       rng_seed=args.seed + index)
        seeds[rec.image_id] = synthdata.generate_scribbles(rec.mask, cfg)
    out = _resolve(root, args.out) or root / "seeds" / (
        f"ratio{args.length_ratio:g}.json" if args.length_ratio > 0
        else "clicks.json")
    synthdata.save_seeds(out, seeds)
    total = sum(len(s) for s in seeds.values())
    print(json.dumps({"out": str(out), "images": len(seeds), "seeds": total}))
    return EXIT_OK


def _train_once(train_root: Path, args, out_dir: Path | None,
                val_root: Path | None = None):
    mode = SupervisionMode(args.mode)
    sizes_path = _resolve(train_root, args.sizes)
    seeds_path = _resolve(train_root, args.seeds)
    records = synthdata.load_dataset(train_root, sizes_path=sizes_path,
                                     seeds_path=seeds_path)
    val_records = synthdata.load_dataset(val_root) if val_root else None
    manifest = synthdata.load_manifest(train_root)
    k = int(manifest["num_classes"])
    model_cfg = net.ModelConfig(architecture=args.arch, in_channels=3,
                                hidden_channels=args.hidden_channels,
                                num_classes=k, init_seed=args.seed)
    barrier_a: tuple[float, ...] = ()
    if mode is SupervisionMode.QUAD_BARRIER_SEEDS:
        barrier_a = trainer.compute_barrier_bounds(records, k)
    train_cfg = TrainConfig(
        mode=mode, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        poly_power=args.poly_power, momentum=args.momentum,
        weight_decay=args.weight_decay, crf_weight=args.crf_weight,
        seed_weight=args.seed_weight,
        affinity=AffinityConfig(sigma_i=args.sigma_i,
                                connectivity=args.connectivity),
        barrier_epsilon=args.barrier_epsilon, barrier_a=barrier_a,
        rng_seed=args.seed, eval_every=args.eval_every,
        shuffle=not args.no_shuffle, flip_augment=args.flip)
    report = trainer.train(records, model_cfg, train_cfg,
                           val_records=val_records, checkpoint_dir=out_dir)
    return report, model_cfg


def cmd_train(args) -> int:
    root = _require_dataset(args)
    val_root = Path(args.val_dataset) if args.val_dataset else None
    out_dir = Path(args.out) if args.out else None
    report, _ = _train_once(root, args, out_dir, val_root)
    print(report.summary_table())
    if out_dir is None:
        print(json.dumps(report.to_dict()))
    return EXIT_OK


def cmd_eval(args) -> int:
    root = _require_dataset(args)
    records = synthdata.load_dataset(root)
    metrics = trainer.evaluate_checkpoint(args.checkpoint, records)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# loss probe

def _probe_instance(args):
    if args.field:
        data = np.load(args.field)
        if "logits" not in data:
            raise CliError(f"{args.field} has no 'logits' array")
        logits = np.asarray(data["logits"], dtype=np.float64)
        image = np.asarray(data["image"], dtype=np.float64) if "image" in data \
            else np.full(logits.shape[:2] + (3,), 0.5)
        target = CategoricalDist(data["target"]) if "target" in data else None
    else:
        try:
            h, w, k = (int(x) for x in args.random.split(","))
        except ValueError as exc:
            raise CliError("--random expects H,W,K") from exc
        rng = np.random.default_rng(args.seed)
        logits = rng.normal(0.0, 1.0, size=(h, w, k))
        image = rng.random((h, w, 3))
        target = None
    if logits.ndim != 3 or logits.shape[0] < 2 or logits.shape[1] < 2:
        raise CliError("logits must be (H, W, K) with H, W >= 2")
    k = logits.shape[2]
    if target is None:
        target = CategoricalDist(np.full(k, 1.0 / k))
    return logits, image, target


def probe_rows(logits: np.ndarray, image: np.ndarray, target: CategoricalDist,
               seed: int = 0) -> list[tuple[str, float, float]]:
    """(name, value, fd residual) for every loss operation.

    Field losses are checked against central differences w.r.t. the
    logits; batch-level losses are parameterized through a softmax so
    the finite differences respect the simplex.
    """
    h, w, k = logits.shape
    rng = np.random.default_rng(seed)
    graph = build_affinity(image, AffinityConfig())
    tags = TagSet(frozenset(target.support()))
    seeds = SeedSet(((0, 0, 0), (h - 1, w - 1, min(1, k - 1)),
                     (h // 2, w // 2, k - 1)))
    mask = rng.integers(0, k, size=(h, w))
    flat_cfg = BarrierConfig(epsilon=0.25)
    quad_cfg = BarrierConfig(epsilon=0.25, a=(0.3,) * k)

    def field_ops():
        yield "size_target", lambda f: losses.size_target_loss(f, target)
        yield "crf", lambda f: losses.crf_loss(f, graph)
        yield "partial_ce", lambda f: losses.partial_ce_loss(f, seeds)
        yield "expansion", lambda f: losses.expansion_loss(f, tags)
        yield "suppression", lambda f: losses.suppression_loss(f, tags)
        yield "flat_barrier", lambda f: losses.flat_log_barrier(f, tags, flat_cfg)
        yield "flat_barrier_literal", lambda f: losses.flat_log_barrier(
            f, tags, flat_cfg, literal_printed_form=True)
        yield "quadratic_barrier", lambda f: losses.quadratic_barrier(f, quad_cfg)
        yield "absent_suppressor", lambda f: losses.absent_class_suppressor(f, k - 1)
        yield "full_ce", lambda f: losses.full_ce_loss(f, mask)
        yield "total_image_level", lambda f: losses.total_loss_image_level(
            f, target, graph, crf_weight=1.0 / (h * w))
        yield "total_seeded", lambda f: losses.total_loss_seeded(
            f, target, graph, seeds, crf_weight=1.0 / (h * w))

    rows = []
    for name, op in field_ops():
        def by_logits(z, op=op):
            return op(PredictionField.from_logits(z))
        value, analytic = by_logits(logits)
        numeric = central_difference(lambda z: by_logits(z)[0], logits.copy())
        rows.append((name, value, max_relative_error(analytic, numeric)))

    # batch-level ops: a batch of distributions parameterized by logits
    m = 6
    z0 = rng.normal(0.0, 1.0, size=(m, k))
    labels = [i % k for i in range(m)]
    wce_cfg = WeightedCEConfig(beta=0.9, class_counts=tuple(
        float(c) for c in rng.integers(1, 30, size=k)))

    def batch_of(z):
        return [CategoricalDist(softmax(z[i])) for i in range(m)]

    def check_batch(name, value_fn, grad_fn):
        batch = batch_of(z0)
        value = value_fn(batch)
        grad_items = grad_fn(batch)
        probs = np.array([d.probs for d in batch])
        analytic = softmax_vjp(probs, np.broadcast_to(grad_items, probs.shape)
                               if np.ndim(grad_items) == 1 else grad_items)
        numeric = central_difference(lambda z: value_fn(batch_of(z)), z0.copy())
        rows.append((name, value, max_relative_error(analytic, numeric)))

    # balance needs a full-support target to stay on its differentiable branch
    balance_target = target if len(target.support()) == k else \
        CategoricalDist(0.5 * target.probs + 0.5 / k)
    check_batch("fairness", losses.fairness_loss, losses.fairness_loss_grad)
    check_batch("balance",
                lambda b: float(losses.balance_loss(b, balance_target)),
                lambda b: losses.balance_loss_grad(b, balance_target))
    check_batch("weighted_ce",
                lambda b: losses.weighted_ce_loss(b, labels, wce_cfg),
                lambda b: losses.weighted_ce_grad(b, labels, wce_cfg))
    return rows


def cmd_loss_probe(args) -> int:
    logits, image, target = _probe_instance(args)
    rows = probe_rows(logits, image, target, seed=args.seed)
    print(f"{'op':<22} {'value':>16} {'fd rel err':>12}")
    for name, value, residual in rows:
        print(f"{name:<22} {value:>16.8f} {residual:>12.3e}")
    worst = max(r for _, _, r in rows)
    print(f"{'worst':<22} {'':>16} {worst:>12.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def _sweep_worker(payload: dict) -> dict:
    ns = argparse.Namespace(**payload["train_args"])
    train_root = Path(payload["train_dir"])
    val_root = Path(payload["val_dir"])
    point_dir = Path(payload["point_dir"])
    point_dir.mkdir(parents=True, exist_ok=True)
    report, model_cfg = _train_once(train_root, ns, point_dir, val_root)
    metric_name = report.best_metric_name
    final_val = report.epochs[-1]["val"]
    point = {
        "mode": payload["mode"], "mre_pct": payload["mre_pct"],
        "seed": payload["seed"], "metric_name": metric_name,
        "metric_value": final_val[metric_name],
        "best_value": report.best_metric_value,
    }
    (point_dir / "point.json").write_text(json.dumps(point, sort_keys=True))
    return point


def cmd_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    modes = [m for m in args.modes.split(",") if m]
    if not modes:
        raise CliError("empty mode grid")
    for m in modes:
        try:
            SupervisionMode(m)
        except ValueError as exc:
            raise CliError(f"unknown supervision mode {m!r}") from exc
    try:
        levels = [float(x) for x in args.mre_levels.split(",")] if args.mre_levels \
            else [0.0]
        seeds = [int(x) for x in args.seeds.split(",")]
    except ValueError as exc:
        raise CliError("--mre-levels and --seeds must be comma-separated numbers") \
            from exc
    if not seeds:
        raise CliError("empty seed grid")

    gen = synthdata.GenConfig(
        mode=args.data_mode, num_classes=args.num_classes, height=args.image_size,
        width=args.image_size, object_fraction=args.object_fraction,
        size_variability=args.size_variability, rng_seed=args.data_seed)
    train_dir, val_dir = out / "data" / "train", out / "data" / "val"
    if not (train_dir / "manifest.json").exists():
        records = synthdata.generate(gen, args.train_count + args.val_count)
        synthdata.save_dataset(train_dir, records[:args.train_count],
                               gen.num_classes, synthdata.default_class_names(gen))
        synthdata.save_dataset(val_dir, records[args.train_count:],
                               gen.num_classes, synthdata.default_class_names(gen))

    needs_seeds = any(SupervisionMode(m).uses_seeds for m in modes)
    seeds_file = None
    if needs_seeds:
        seeds_file = "seeds/clicks.json"
        if not (train_dir / seeds_file).exists():
            ns = argparse.Namespace(dataset=str(train_dir), length_ratio=0.0,
                                    stroke_width=1, seed=args.data_seed, out=None)
            cmd_gen_scribbles(ns)

    manifest = synthdata.load_manifest(train_dir)
    exact = synthdata.load_sizes(train_dir / "sizes" / "exact.json",
                                 manifest["num_classes"])
    size_files = {}
    for level in levels:
        for seed in seeds:
            if level == 0:
                size_files[(level, seed)] = "sizes/exact.json"
                continue
            name = f"sizes/mre{level:g}_seed{seed}.json"
            if not (train_dir / name).exists():
                cfg = CorruptionConfig(sigma=sigma_for_mre(level / 100.0),
                                       rng_seed=seed)
                corrupted = {
                    entry["id"]: corrupt_sizes(exact[entry["id"]], cfg,
                                               image_index=index)
                    for index, entry in enumerate(manifest["images"])
                }
                synthdata.save_sizes(train_dir / name, corrupted)
            size_files[(level, seed)] = name

    jobs = []
    for mode in modes:
        uses_sizes = SupervisionMode(mode).uses_size_target
        for level in levels:
            for seed in seeds:
                train_args = {
                    "mode": mode,
                    "sizes": size_files[(level, seed)] if uses_sizes else None,
                    "seeds": seeds_file if SupervisionMode(mode).uses_seeds else None,
                    "arch": args.arch, "hidden_channels": args.hidden_channels,
                    "epochs": args.epochs, "batch_size": args.batch_size,
                    "lr": args.lr, "poly_power": args.poly_power,
                    "momentum": args.momentum, "weight_decay": args.weight_decay,
                    "crf_weight": args.crf_weight, "seed_weight": args.seed_weight,
                    "sigma_i": args.sigma_i, "connectivity": args.connectivity,
                    "barrier_epsilon": args.barrier_epsilon, "seed": seed,
                    "eval_every": args.eval_every, "no_shuffle": False,
                    "flip": False,
                }
                point_dir = out / f"{mode}_mre{level:g}_seed{seed}"
                jobs.append({"train_args": train_args, "mode": mode,
                             "mre_pct": level, "seed": seed,
                             "train_dir": str(train_dir), "val_dir": str(val_dir),
                             "point_dir": str(point_dir)})

    rows = []
    if args.workers == 1:
        for job in jobs:
            rows.append(_sweep_worker(job))
            print(json.dumps(rows[-1], sort_keys=True), file=sys.stderr)
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = {pool.submit(_sweep_worker, job): job for job in jobs}
            for fut in as_completed(futures):
                rows.append(fut.result())
                print(json.dumps(rows[-1], sort_keys=True), file=sys.stderr)

    summary = report_mod.emit_sweep_report(out)
    print(json.dumps({"points": len(rows), **summary}))
    return EXIT_OK


def cmd_annotate_serve(args) -> int:
    import uvicorn

    from .service import create_app
    root = _require_dataset(args)
    ui_dir = args.ui
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = str(bundled) if bundled.is_dir() else None
    app = create_app(dataset_dir=root, store_path=args.store, ui_dir=ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def cmd_report(args) -> int:
    summary = report_mod.emit_sweep_report(args.run_dir, args.out)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arch", default="small-conv",
                   choices=["small-conv", "pixel-linear"])
    p.add_argument("--hidden-channels", type=int, default=16)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--poly-power", type=float, default=0.9)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--crf-weight", type=float, default=1.0)
    p.add_argument("--seed-weight", type=float, default=1.0)
    p.add_argument("--sigma-i", type=float, default=None,
                   help="fixed affinity bandwidth (default: per-image)")
    p.add_argument("--connectivity", default="4", choices=["4", "8", "disc"])
    p.add_argument("--barrier-epsilon", type=float, default=0.1)
    p.add_argument("--eval-every", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sizeseg",
        description="weakly-supervised segmentation from size targets")
    parser.add_argument("--config", default=None,
                        help="JSON file whose entries override flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="shapes", choices=["shapes", "medical-like"])
    p.add_argument("--num-classes", type=int, default=5)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--min-shapes", type=int, default=2)
    p.add_argument("--max-shapes", type=int, default=4)
    p.add_argument("--color-noise", type=float, default=0.05)
    p.add_argument("--texture-noise", type=float, default=0.03)
    p.add_argument("--object-fraction", type=float, default=0.12)
    p.add_argument("--size-variability", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("extract-sizes", help="recompute exact sizes from masks")
    p.add_argument("--dataset", default=os.environ.get("SIZESEG_DATA_DIR"))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_extract_sizes)

    p = sub.add_parser("corrupt-sizes", help="noise the exact size targets")
    p.add_argument("--dataset", default=os.environ.get("SIZESEG_DATA_DIR"))
    p.add_argument("--mre", type=float, default=None,
                   help="target mean relative error in percent")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_corrupt_sizes)

    p = sub.add_parser("gen-scribbles", help="derive click/scribble seeds")
    p.add_argument("--dataset", default=os.environ.get("SIZESEG_DATA_DIR"))
    p.add_argument("--length-ratio", type=float, default=0.0)
    p.add_argument("--stroke-width", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen_scribbles)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--dataset", default=os.environ.get("SIZESEG_DATA_DIR"))
    p.add_argument("--val-dataset", default=None)
    p.add_argument("--mode", default="size-crf",
                   choices=[m.value for m in SupervisionMode])
    p.add_argument("--sizes", default=None,
                   help="sizes file (relative to dataset dir unless absolute)")
    p.add_argument("--seeds", default=None, help="seeds file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="checkpoint/report directory")
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--flip", action="store_true")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", default=os.environ.get("SIZESEG_DATA_DIR"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loss-probe",
                       help="print every loss value and its gradient residual")
    p.add_argument("--field", default=None,
                   help=".npz with 'logits' (H,W,K), optional 'image', 'target'")
    p.add_argument("--random", default="8,8,4", help="H,W,K for a random instance")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_loss_probe)

    p = sub.add_parser("sweep", help="train/eval over a (mode, mRE, seed) grid")
    p.add_argument("--out", required=True)
    p.add_argument("--modes", default="size-crf")
    p.add_argument("--mre-levels", default="0,4,8,16,32")
    p.add_argument("--seeds", default="0")
    p.add_argument("--data-mode", default="shapes",
                   choices=["shapes", "medical-like"])
    p.add_argument("--num-classes", type=int, default=5)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--train-count", type=int, default=200)
    p.add_argument("--val-count", type=int, default=50)
    p.add_argument("--object-fraction", type=float, default=0.12)
    p.add_argument("--size-variability", type=float, default=0.05)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("annotate-serve", help="serve the annotation API and UI")
    p.add_argument("--dataset", default=os.environ.get("SIZESEG_DATA_DIR"))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--store", default=None)
    p.add_argument("--ui", default=None)
    p.set_defaults(func=cmd_annotate_serve)

    p = sub.add_parser("report", help="summarize a sweep run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        for key, value in overrides.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                print(f"error: config key {key!r} is not a flag of "
                      f"{args.command}", file=sys.stderr)
                return EXIT_VALIDATION
            setattr(args, attr, value)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
