"""Static SVG figures for CLI reports.

Rendering is made byte-reproducible by fixing the SVG id salt and dropping
the date stamp, so figure digests can go into the run manifest.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["line_figure"]

_RC = {
    "svg.hashsalt": "dnspde",
    "svg.fonttype": "path",
    "path.simplify": False,
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def line_figure(path, x, series: dict, xlabel: str, ylabel: str, title: str = "",
                logx: bool = False, logy: bool = False, markers: bool = False) -> None:
    """Write one axes of labelled line series to ``path`` as SVG."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for label, y in series.items():
            y = np.asarray(y, dtype=float)
            ax.plot(x, y, marker="o" if markers else None, label=label)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
