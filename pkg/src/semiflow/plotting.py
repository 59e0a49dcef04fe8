"""Optional PNG renderings of the CSV artifacts (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .io import read_csv


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4), dpi=120)
    return plt, fig, ax


def _save(plt, fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def render(csv_path, kind: str) -> Path | None:
    """Render ``csv_path`` next to itself as ``.png``; unknown kinds are skipped."""
    csv_path = Path(csv_path)
    header, data = read_csv(csv_path)
    if data.size == 0:
        return None
    out = csv_path.with_suffix(".png")
    plt, fig, ax = _figure()
    if kind == "trajectory":
        for j, name in enumerate(header[1:], 1):
            if j > 8:
                break
            ax.plot(data[:, 0], data[:, j], lw=0.8, label=name)
        ax.set_xlabel("t")
        ax.legend(fontsize=7, ncol=2)
    elif kind == "minimax":
        ax.plot(data[:, 0], data[:, 1], marker=".", lw=0.8)
        ax.set_xlabel("iteration")
        ax.set_ylabel("sup over path")
    elif kind == "recurrence":
        ax.plot(data[:, 0], data[:, 2], marker="o", label="worst gap")
        ax.plot(data[:, 0], data[:, 0], ls="--", c="gray", label="l")
        ax.set_xlabel("l")
        ax.legend()
    elif kind == "profile":
        ax.plot(data[:, 0], data[:, 1])
        ax.set_xlabel("r")
        ax.set_ylabel("u")
    elif kind == "stability":
        ok = np.isfinite(data[:, 1])
        ax.plot(data[ok, 0], data[ok, 1], marker="o")
        ax.set_xlabel("r")
        ax.set_ylabel("R(r)")
    else:
        plt.close(fig)
        return None
    return _save(plt, fig, out)
