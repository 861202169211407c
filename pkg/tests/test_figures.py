"""Tests for trade-off figure rendering."""

import numpy as np
import pytest

from fairproj.figures import X_CHOICES, render_tradeoff


def make_rows():
    return [
        {"alpha": 0.2, "accuracy": 0.91, "meo": 0.12, "statistical_parity": 0.30},
        {"alpha": 0.05, "accuracy": 0.88, "meo": 0.03, "statistical_parity": 0.11},
        {"alpha": 0.1, "accuracy": 0.90, "meo": 0.07, "statistical_parity": 0.20},
    ]


class TestRenderTradeoff:
    def test_writes_png_and_returns_figure(self, tmp_path):
        out = tmp_path / "fig.png"
        fig = render_tradeoff(make_rows(), str(out))
        assert out.stat().st_size > 1000
        assert out.read_bytes()[:4] == b"\x89PNG"
        assert fig.axes, "figure should hold one populated axes"

    def test_points_sorted_by_x(self, tmp_path):
        fig = render_tradeoff(make_rows(), str(tmp_path / "f.png"), x_metric="meo")
        line = fig.axes[0].lines[0]
        xs = np.asarray(line.get_xdata(), dtype=float)
        assert np.all(np.diff(xs) > 0)
        assert xs == pytest.approx([0.03, 0.07, 0.12])
        assert np.asarray(line.get_ydata(), dtype=float) == pytest.approx([0.88, 0.90, 0.91])

    def test_failed_rows_skipped(self, tmp_path):
        rows = make_rows()
        rows.append({"alpha": 0.02, "accuracy": None, "meo": None,
                     "statistical_parity": None})
        fig = render_tradeoff(rows, str(tmp_path / "f.png"))
        assert len(fig.axes[0].lines[0].get_xdata()) == 3

    def test_all_rows_failed(self, tmp_path):
        rows = [{"alpha": 0.1, "accuracy": None, "meo": None,
                 "statistical_parity": None}]
        with pytest.raises(ValueError, match="no successful"):
            render_tradeoff(rows, str(tmp_path / "f.png"))

    def test_rejects_unknown_axis(self, tmp_path):
        with pytest.raises(ValueError, match="x_metric"):
            render_tradeoff(make_rows(), str(tmp_path / "f.png"), x_metric="tpr")

    @pytest.mark.parametrize("x_metric", X_CHOICES)
    def test_axis_choices(self, tmp_path, x_metric):
        fig = render_tradeoff(make_rows(), str(tmp_path / "f.png"), x_metric=x_metric)
        assert fig.axes[0].get_xlabel() == x_metric

    def test_label_in_legend(self, tmp_path):
        fig = render_tradeoff(make_rows(), str(tmp_path / "f.png"), label="run A")
        texts = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
        assert texts == ["run A"]

    def test_svg_output(self, tmp_path):
        out = tmp_path / "fig.svg"
        render_tradeoff(make_rows(), str(out))
        assert b"<svg" in out.read_bytes()[:600]
