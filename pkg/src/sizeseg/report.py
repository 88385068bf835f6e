"""Experiment reporting: deterministic CSV tables and dependency-free SVG plots."""

from __future__ import annotations

import json
from pathlib import Path

from .simplex import sigma_for_mre

_COLORS = ("#1f6fb2", "#d1495b", "#3a8f5d", "#b07a1e", "#7a4fa0",
           "#2aa198", "#8a5a44", "#586e75")


def format_cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_csv(path, header, rows) -> None:
    """Plain CSV with stable float formatting; byte-identical for equal input."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def svg_line_chart(series: dict, path, title: str = "", xlabel: str = "",
                   ylabel: str = "", width: int = 640, height: int = 420) -> None:
    """Multi-series line chart; series maps name -> list of (x, y) points."""
    margin_l, margin_r, margin_t, margin_b = 62, 16, 34, 46
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b
    pts = [p for s in series.values() for p in s]
    if not pts:
        raise ValueError("nothing to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.06 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(x):
        return margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return margin_t + (y_hi - y) / (y_hi - y_lo) * plot_h

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
           f'font-size="14">{title}</text>']
    # axes
    out.append(f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" '
               f'y2="{margin_t + plot_h}" stroke="#333"/>')
    out.append(f'<line x1="{margin_l}" y1="{margin_t + plot_h}" '
               f'x2="{margin_l + plot_w}" y2="{margin_t + plot_h}" stroke="#333"/>')
    for i in range(5):
        fx = x_lo + (x_hi - x_lo) * i / 4
        fy = y_lo + (y_hi - y_lo) * i / 4
        px, py = sx(fx), sy(fy)
        out.append(f'<line x1="{px:.1f}" y1="{margin_t + plot_h}" x2="{px:.1f}" '
                   f'y2="{margin_t + plot_h + 4}" stroke="#333"/>')
        out.append(f'<text x="{px:.1f}" y="{margin_t + plot_h + 18}" '
                   f'text-anchor="middle">{format(fx, ".4g")}</text>')
        out.append(f'<line x1="{margin_l - 4}" y1="{py:.1f}" x2="{margin_l}" '
                   f'y2="{py:.1f}" stroke="#333"/>')
        out.append(f'<text x="{margin_l - 8}" y="{py + 4:.1f}" '
                   f'text-anchor="end">{format(fy, ".4g")}</text>')
    out.append(f'<text x="{margin_l + plot_w / 2:.1f}" y="{height - 8}" '
               f'text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{margin_t + plot_h / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {margin_t + plot_h / 2:.1f})">{ylabel}</text>')

    for i, (name, points) in enumerate(sorted(series.items())):
        color = _COLORS[i % len(_COLORS)]
        ordered = sorted(points)
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in ordered)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="2"/>')
        for x, y in ordered:
            out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" '
                       f'fill="{color}"/>')
        ly = margin_t + 14 + 16 * i
        lx = margin_l + plot_w - 150
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{ly}">{name}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out))


def collect_sweep_rows(run_dir) -> list[dict]:
    """Read every sweep point directory (point.json + report.json) under run_dir."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory {run_dir} does not exist")
    rows = []
    for point_file in sorted(run_dir.glob("*/point.json")):
        point = json.loads(point_file.read_text())
        report = json.loads((point_file.parent / "report.json").read_text())
        rows.append({**point, "report": report})
    if not rows:
        raise FileNotFoundError(f"no sweep points under {run_dir}")
    return rows


def emit_sweep_report(run_dir, out_dir=None) -> dict:
    """Summary CSV, text table, and robustness-curve SVG for a sweep run."""
    rows = collect_sweep_rows(run_dir)
    out_dir = Path(out_dir) if out_dir else Path(run_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    header = ["mode", "mre_pct", "sigma", "seed", "metric", "value",
              "final_loss", "initial_loss"]
    csv_rows = []
    series: dict[str, dict[float, list[float]]] = {}
    for row in rows:
        mre_frac = row["mre_pct"] / 100.0
        sigma = sigma_for_mre(mre_frac) if mre_frac > 0 else 0.0
        rep = row["report"]
        value = row["metric_value"]
        csv_rows.append([row["mode"], row["mre_pct"], sigma, row["seed"],
                         row["metric_name"], value,
                         rep["final_loss"], rep["initial_loss"]])
        series.setdefault(row["mode"], {}).setdefault(row["mre_pct"], []).append(value)
    csv_rows.sort(key=lambda r: (r[0], r[1], r[3]))
    write_csv(out_dir / "summary.csv", header, csv_rows)

    curve = {mode: [(x, sum(vals) / len(vals)) for x, vals in sorted(pts.items())]
             for mode, pts in series.items()}
    svg_line_chart(curve, out_dir / "robustness.svg",
                   title="validation metric vs size-target corruption",
                   xlabel="mRE (%)", ylabel="metric")

    agg_header = ["mode", "mre_pct", "mean", "spread", "n"]
    agg_rows = []
    lines = ["mode                 mre%     mean   spread   n"]
    for mode, pts in sorted(curve.items()):
        for x, mean_v in pts:
            vals = series[mode][x]
            spread = max(vals) - min(vals)
            agg_rows.append([mode, x, mean_v, spread, len(vals)])
            lines.append(f"{mode:<20} {x:>5}   {mean_v:.4f}   {spread:.4f}   "
                         f"{len(vals)}")
    write_csv(out_dir / "summary_mean.csv", agg_header, agg_rows)
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    return {"rows": len(csv_rows), "csv": str(out_dir / "summary.csv"),
            "svg": str(out_dir / "robustness.svg")}
