"""Matplotlib rendering of the plot-data series to image files.

Each report path writes the delimited text series and a PNG next to it;
the text stays the tool-agnostic source of truth.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

AXIS_LABELS = {
    "qbar_vs_tau": (r"$\tau$", r"$\bar Q(\tau)$"),
    "phi_loglog": (r"$\log|t|$", r"$\log \varphi$"),
    "order_vs_bound": ("potential bound", "observed order"),
}


def parse_plot_text(text):
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    header = lines[0].split()
    xs, ys = [], []
    for ln in lines[1:]:
        a, b = ln.split()
        xs.append(float(a))
        ys.append(float(b))
    return header, xs, ys


def render_figure(text, kind, path):
    """Render a two-column series produced by emit_plot_data to a PNG."""
    header, xs, ys = parse_plot_text(text)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    marker = "o" if len(xs) <= 64 else None
    ax.plot(xs, ys, marker=marker, markersize=3, lw=1.2)
    xl, yl = AXIS_LABELS.get(kind, (header[0], header[1]))
    ax.set_xlabel(xl)
    ax.set_ylabel(yl)
    if kind == "order_vs_bound":
        ax.set_xscale("log")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
