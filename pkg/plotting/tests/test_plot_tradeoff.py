"""Tests for the trade-off plot package: parsing, rendering, and the CLI."""

import subprocess

import pytest

from fairproj_plots import CurveFormatError, load_curve, render
from fairproj_plots.cli import main

HEADER = "alpha,accuracy,meo,statistical_parity,runtime_s"

CURVE_A = [
    "0.02,0.881,0.031,0.114,1.25",
    "0.05,0.893,0.052,0.161,0.98",
    "0.2,0.91,0.12,0.30,0.61",
]
CURVE_B = [
    "0.05,0.871,0.041,0.12,1.02",
    "0.2,0.902,0.10,0.27,0.55",
]


def write_curve(path, rows, header=HEADER):
    path.write_text("\n".join([header, *rows]) + "\n")
    return path


@pytest.fixture
def curve_a(tmp_path):
    return write_curve(tmp_path / "run_a.csv", CURVE_A)


@pytest.fixture
def curve_b(tmp_path):
    return write_curve(tmp_path / "run_b.csv", CURVE_B)


class TestLoadCurve:
    def test_parses_rows_and_defaults_label(self, curve_a):
        curve = load_curve(str(curve_a))
        assert curve.label == "run_a"
        assert len(curve.points) == 3
        assert curve.points[0].alpha == 0.02
        assert curve.points[0].accuracy == 0.881
        assert curve.points[2].meo == 0.12
        assert curve.points[1].runtime_s == 0.98

    def test_explicit_label(self, curve_a):
        assert load_curve(str(curve_a), label="ours").label == "ours"

    def test_skips_blank_metric_rows(self, tmp_path):
        path = write_curve(tmp_path / "c.csv", [CURVE_A[0], "0.05,,,,", CURVE_A[2]])
        curve = load_curve(str(path))
        assert [pt.alpha for pt in curve.points] == [0.02, 0.2]

    def test_rejects_wrong_header(self, tmp_path):
        path = write_curve(tmp_path / "c.csv", CURVE_A,
                           header="alpha,acc,meo,statistical_parity,runtime_s")
        with pytest.raises(CurveFormatError, match="header"):
            load_curve(str(path))

    def test_rejects_reordered_header(self, tmp_path):
        path = write_curve(tmp_path / "c.csv", [],
                           header="accuracy,alpha,meo,statistical_parity,runtime_s")
        with pytest.raises(CurveFormatError, match="header"):
            load_curve(str(path))

    def test_rejects_empty_file(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("")
        with pytest.raises(CurveFormatError, match="header"):
            load_curve(str(path))

    def test_rejects_short_row(self, tmp_path):
        path = write_curve(tmp_path / "c.csv", ["0.05,0.9,0.1"])
        with pytest.raises(CurveFormatError, match="row 2"):
            load_curve(str(path))

    def test_rejects_non_numeric_cell(self, tmp_path):
        path = write_curve(tmp_path / "c.csv", ["0.05,fast,0.1,0.2,1.0"])
        with pytest.raises(CurveFormatError, match="row 2"):
            load_curve(str(path))


class TestRender:
    def test_one_series_per_file_with_legend(self, curve_a, curve_b):
        curves = [load_curve(str(curve_a)), load_curve(str(curve_b))]
        fig = render(curves, x_metric="meo")
        ax = fig.axes[0]
        assert len(ax.lines) == 2
        labels = [t.get_text() for t in ax.get_legend().get_texts()]
        assert labels == ["run_a", "run_b"]

    def test_series_sorted_by_x(self, tmp_path):
        rows = [CURVE_A[2], CURVE_A[0], CURVE_A[1]]  # shuffled on purpose
        curve = load_curve(str(write_curve(tmp_path / "c.csv", rows)))
        fig = render([curve], x_metric="statistical_parity")
        xs = list(fig.axes[0].lines[0].get_xdata())
        assert xs == sorted(xs)
        assert xs == [0.114, 0.161, 0.30]

    def test_rejects_unknown_axis(self, curve_a):
        with pytest.raises(ValueError, match="x_metric"):
            render([load_curve(str(curve_a))], x_metric="alpha")

    def test_writes_file_when_path_given(self, curve_a, tmp_path):
        out = tmp_path / "fig.png"
        render([load_curve(str(curve_a))], out_path=str(out))
        assert out.stat().st_size > 0


class TestCli:
    def test_two_curve_fixture_renders_png(self, curve_a, curve_b, tmp_path):
        out = tmp_path / "fig.png"
        rc = main(["--curves", str(curve_a), str(curve_b),
                   "--x", "meo", "--out", str(out)])
        assert rc == 0
        assert out.stat().st_size > 0
        assert out.read_bytes()[:4] == b"\x89PNG"

    def test_inputs_not_mutated(self, curve_a, curve_b, tmp_path):
        before = (curve_a.read_bytes(), curve_b.read_bytes())
        main(["--curves", str(curve_a), str(curve_b), "--out", str(tmp_path / "f.png")])
        assert (curve_a.read_bytes(), curve_b.read_bytes()) == before

    def test_blank_row_fixture_still_renders(self, tmp_path):
        path = write_curve(tmp_path / "c.csv", [CURVE_A[0], "0.05,,,,", CURVE_A[2]])
        out = tmp_path / "fig.png"
        assert main(["--curves", str(path), "--out", str(out)]) == 0
        assert out.stat().st_size > 0

    def test_malformed_header_exits_nonzero(self, tmp_path, capsys):
        path = write_curve(tmp_path / "c.csv", CURVE_A, header="alpha;accuracy")
        rc = main(["--curves", str(path), "--out", str(tmp_path / "f.png")])
        assert rc == 2
        assert "header" in capsys.readouterr().err

    def test_missing_file_exits_nonzero(self, tmp_path):
        rc = main(["--curves", str(tmp_path / "nope.csv"),
                   "--out", str(tmp_path / "f.png")])
        assert rc == 2

    def test_refuses_overwrite_without_force(self, curve_a, tmp_path):
        out = tmp_path / "fig.png"
        args = ["--curves", str(curve_a), "--out", str(out)]
        assert main(args) == 0
        assert main(args) == 1
        assert main(args + ["--force"]) == 0

    def test_svg_flag(self, curve_a, tmp_path):
        out = tmp_path / "fig.svg"
        assert main(["--curves", str(curve_a), "--out", str(out), "--svg"]) == 0
        assert b"<svg" in out.read_bytes()[:600]

    def test_console_script_installed(self, curve_a, tmp_path):
        out = tmp_path / "fig.png"
        proc = subprocess.run(["plot_tradeoff", "--curves", str(curve_a),
                               "--out", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0
        assert out.is_file()
