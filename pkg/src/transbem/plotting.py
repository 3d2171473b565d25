"""Static PNG figures for benchmark outputs (non-interactive Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    # no Software tag so PNG bytes depend only on the data
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_spectrum(eigs, path, predictions=(), title=None):
    """Eigenvalues in the complex plane; predicted accumulation points as red crosses."""
    eigs = np.asarray(eigs, dtype=complex)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.scatter(eigs.real, eigs.imag, s=6, color="tab:blue", label="eigenvalues")
        if len(predictions):
            p = np.asarray(predictions, dtype=complex)
            ax.scatter(p.real, p.imag, marker="x", s=60, color="red", label="predicted")
        ax.axhline(0, color="k", lw=0.5)
        ax.axvline(0, color="k", lw=0.5)
        ax.set_xlabel("Re")
        ax.set_ylabel("Im")
        ax.set_aspect("equal", adjustable="datalim")
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        return _save(fig, path)


def plot_curves(x, series, path, xlabel, ylabel, logx=False, logy=False, markers=(), title=None):
    """One line per entry of ``series`` (mapping label -> y values).

    With ``x=None`` each curve is drawn against its own index.
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, y in series.items():
            xs = np.arange(len(y)) if x is None else x
            ax.plot(xs, y, marker="o", ms=3, label=label)
        for m in markers:
            ax.axvline(m, color="0.6", lw=0.8, ls="--")
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        return _save(fig, path)


def plot_field_plane(u, v, values, path, title=None):
    """Magnitude of a scalar field sampled on a square lattice (NaN = excluded)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        im = ax.pcolormesh(u, v, np.abs(values), shading="auto", cmap="viridis")
        fig.colorbar(im, ax=ax, label="|p|")
        ax.set_aspect("equal")
        ax.grid(False)
        if title:
            ax.set_title(title)
        return _save(fig, path)
