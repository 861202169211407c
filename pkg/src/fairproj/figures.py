"""Trade-off figure rendering for the sweep report path."""

from __future__ import annotations

X_CHOICES = ("meo", "statistical_parity", "alpha")


def render_tradeoff(rows: list, out_path: str, x_metric: str = "meo", label: str | None = None):
    """Render accuracy against a fairness column and save to ``out_path``.

    ``rows`` are dicts with keys alpha, accuracy, meo, statistical_parity;
    rows holding None (failed grid points) are skipped.  Returns the figure.
    """
    if x_metric not in X_CHOICES:
        raise ValueError(f"x_metric must be one of {X_CHOICES}")
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    kept = [r for r in rows if r.get("accuracy") is not None]
    if not kept:
        raise ValueError("no successful grid points to plot")
    xs = [r[x_metric] for r in kept]
    ys = [r["accuracy"] for r in kept]
    order = sorted(range(len(xs)), key=lambda i: xs[i])

    fig = Figure(figsize=(5.0, 3.5))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    ax.plot([xs[i] for i in order], [ys[i] for i in order], marker="o",
            label=label or "projected")
    for r in kept:
        ax.annotate(f"{r['alpha']:g}", (r[x_metric], r["accuracy"]),
                    textcoords="offset points", xytext=(4, 4), fontsize=7)
    ax.set_xlabel(x_metric)
    ax.set_ylabel("accuracy")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    return fig
