"""Static plot artifacts: gnuplot-style data files and SVG line charts."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence


def write_dat(path, columns: Sequence[str], rows) -> Path:
    """Whitespace-separated table with a ``#`` header line."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        for row in rows:
            fh.write(" ".join("nan" if v is None else repr(v) for v in row) + "\n")
    return path


def write_svg(path, curves: Mapping[str, tuple[Sequence[float], Sequence[float]]],
              title: str, ylabel: str, logy: bool = True) -> Path:
    """One log-log panel with a labelled line per curve."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "dfp", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        for label, (ts, ys) in curves.items():
            pts = [(t, y) for t, y in zip(ts, ys) if y is not None and (not logy or y > 0)]
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts], label=label, lw=1.2)
        ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if curves:
            ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
