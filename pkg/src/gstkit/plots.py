"""SVG figures for the report command.  Output is deterministic for fixed inputs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "gstkit"
plt.rcParams["svg.fonttype"] = "none"

_META = {"Date": None, "Creator": "gstkit"}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def violation_grid_svg(grid, path) -> Path:
    germs = ["".join(g) for g in grid.germs]
    data = np.full((len(grid.germs), len(grid.lengths)), np.nan)
    flags = []
    for i, g in enumerate(grid.germs):
        for j, L in enumerate(grid.lengths):
            c = grid.cells.get((g, L))
            if c is not None:
                data[i, j] = c.total / max(c.count, 1)
                if c.flagged:
                    flags.append((j, i))
    fig, ax = plt.subplots(figsize=(1.2 + 0.45 * len(grid.lengths), 1.0 + 0.35 * len(germs)))
    im = ax.imshow(data, cmap="Greys", aspect="auto", vmin=0, vmax=max(3.0, np.nanmax(data) if np.isfinite(data).any() else 3.0))
    for j, i in flags:
        ax.add_patch(plt.Rectangle((j - 0.5, i - 0.5), 1, 1, fill=False, ec="red", lw=2))
    ax.set_xticks(range(len(grid.lengths)), [str(L) for L in grid.lengths], rotation=90)
    ax.set_yticks(range(len(germs)), germs)
    ax.set_xlabel("L")
    ax.set_ylabel("germ")
    fig.colorbar(im, ax=ax, label="mean 2 delta log L per sequence")
    fig.tight_layout()
    return _save(fig, path)


def diamond_vs_run_svg(values: dict, path, thresholds=(6.7e-4, 1.94e-4), errors: dict | None = None) -> Path:
    """`values` maps gate label to a list of (x, diamond distance) points."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for lbl, pts in values.items():
        x, y = zip(*pts)
        yerr = None if not errors or lbl not in errors else errors[lbl]
        ax.errorbar(x, y, yerr=yerr, marker="o", ms=3, label=lbl, capsize=2)
    for t in thresholds:
        ax.axhline(t, ls="--", lw=0.8, color="grey")
    ax.set_yscale("log")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("L")
    ax.set_ylabel("diamond distance")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def rb_decay_svg(x, y, fit, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(x, y, ".", ms=2, alpha=0.5, color="k")
    xs = np.linspace(0, max(x), 200)
    ax.plot(xs, fit.a + fit.b * fit.f**xs, color="C3", label=f"rate {fit.rate:.3g}")
    ax.set_xlabel("elementary gates" if fit.axis == "gates" else "Cliffords")
    ax.set_ylabel("survival")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)
