"""Deterministic CSV/SVG reporting for sweep runs."""

import json

import pytest

from sizeseg.report import (
    collect_sweep_rows,
    emit_sweep_report,
    format_cell,
    svg_line_chart,
    write_csv,
)


def seed_point(run_dir, mode, mre, seed, value):
    point_dir = run_dir / f"{mode}_mre{mre:g}_seed{seed}"
    point_dir.mkdir(parents=True)
    (point_dir / "point.json").write_text(json.dumps({
        "mode": mode, "mre_pct": mre, "seed": seed,
        "metric_name": "miou", "metric_value": value, "best_value": value,
    }))
    (point_dir / "report.json").write_text(json.dumps({
        "mode": mode, "final_loss": 0.5, "initial_loss": 1.5,
    }))


class TestFormatting:
    def test_floats_use_shortest_round_trip_style(self):
        assert format_cell(0.25) == "0.25"
        assert format_cell(1 / 3) == "0.3333333333"
        assert format_cell(7) == "7"
        assert format_cell("size-crf") == "size-crf"

    def test_write_csv_layout(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ["a", "b"], [[1, 0.5], ["x", 2]])
        assert path.read_text() == "a,b\n1,0.5\nx,2\n"


class TestSvgChart:
    def test_chart_contains_series_and_labels(self, tmp_path):
        path = tmp_path / "c.svg"
        svg_line_chart({"size-crf": [(0, 0.8), (16, 0.7)],
                        "full-mask": [(0, 0.9), (16, 0.9)]},
                       path, title="robustness", xlabel="mre", ylabel="miou")
        text = path.read_text()
        assert text.startswith("<svg")
        assert text.rstrip().endswith("</svg>")
        assert text.count("<polyline") == 2
        assert "robustness" in text and "size-crf" in text

    def test_empty_series_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            svg_line_chart({}, tmp_path / "c.svg")

    def test_single_point_does_not_divide_by_zero(self, tmp_path):
        svg_line_chart({"solo": [(0.0, 0.5)]}, tmp_path / "one.svg")
        assert (tmp_path / "one.svg").exists()


class TestCollectRows:
    def test_missing_directory_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            collect_sweep_rows(tmp_path / "nope")

    def test_directory_without_points_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            collect_sweep_rows(tmp_path)

    def test_rows_carry_point_and_report(self, tmp_path):
        seed_point(tmp_path, "size-crf", 0, 0, 0.8)
        rows = collect_sweep_rows(tmp_path)
        assert rows[0]["metric_value"] == 0.8
        assert rows[0]["report"]["final_loss"] == 0.5


class TestEmitSweepReport:
    def fill(self, run_dir):
        seed_point(run_dir, "size-crf", 0, 0, 0.80)
        seed_point(run_dir, "size-crf", 0, 1, 0.78)
        seed_point(run_dir, "size-crf", 16, 0, 0.75)
        seed_point(run_dir, "size-crf", 16, 1, 0.73)
        seed_point(run_dir, "expand-crf", 0, 0, 0.60)
        seed_point(run_dir, "expand-crf", 16, 0, 0.60)

    def test_summary_files_and_aggregates(self, tmp_path):
        self.fill(tmp_path)
        summary = emit_sweep_report(tmp_path)
        assert summary["rows"] == 6
        csv = (tmp_path / "summary.csv").read_text().splitlines()
        assert csv[0].startswith("mode,mre_pct,sigma,seed")
        assert len(csv) == 7

        mean_rows = (tmp_path / "summary_mean.csv").read_text().splitlines()
        grid = {tuple(r.split(",")[:2]): r.split(",") for r in mean_rows[1:]}
        assert float(grid[("size-crf", "0")][2]) == pytest.approx(0.79)
        assert float(grid[("size-crf", "16")][3]) == pytest.approx(0.02)
        assert (tmp_path / "summary.txt").exists()

    def test_byte_identical_on_repeat(self, tmp_path):
        self.fill(tmp_path)
        emit_sweep_report(tmp_path)
        first = {name: (tmp_path / name).read_bytes()
                 for name in ("summary.csv", "summary_mean.csv",
                              "robustness.svg", "summary.txt")}
        emit_sweep_report(tmp_path)
        for name, blob in first.items():
            assert (tmp_path / name).read_bytes() == blob

    def test_separate_output_directory(self, tmp_path):
        self.fill(tmp_path / "run")
        emit_sweep_report(tmp_path / "run", tmp_path / "out")
        assert (tmp_path / "out" / "summary.csv").exists()
        assert (tmp_path / "out" / "robustness.svg").exists()
