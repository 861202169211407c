"""Trade-off figure assembly."""

from __future__ import annotations

from .curves import CurveFile

X_CHOICES = ("meo", "statistical_parity")


def render(curves: list[CurveFile], x_metric: str = "meo",
           out_path: str | None = None, svg: bool = False):
    """Plot accuracy against ``x_metric``, one sorted series per curve.

    Saves to ``out_path`` when given (PNG unless ``svg``) and returns the
    figure so callers can inspect axes and legend.
    """
    if x_metric not in X_CHOICES:
        raise ValueError(f"x_metric must be one of {X_CHOICES}")
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    fig = Figure(figsize=(5.0, 3.5))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    for curve in curves:
        pairs = sorted((getattr(pt, x_metric), pt.accuracy) for pt in curve.points)
        ax.plot([x for x, _ in pairs], [y for _, y in pairs],
                marker="o", label=curve.label)
    ax.set_xlabel(x_metric)
    ax.set_ylabel("accuracy")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    if out_path is not None:
        fig.savefig(out_path, dpi=150, format="svg" if svg else "png")
    return fig
