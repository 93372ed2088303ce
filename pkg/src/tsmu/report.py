"""Figure rendering for the report path.

All figures are SVG written through matplotlib's Agg pipeline with a fixed
hash salt and no embedded date, so repeated runs of one configuration
produce byte-identical files; the figures are a convenience view of the
delimited outputs, never the data contract.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_RC = {
    "svg.hashsalt": "tsmu",
    "figure.figsize": (7.0, 4.2),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def arrival_figure(
    path: Path,
    y_centers: np.ndarray,
    p_total: np.ndarray,
    p_arrival_conditioned: np.ndarray,
    slit_centers: tuple[float, float],
    theta: float,
) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        width = y_centers[1] - y_centers[0] if len(y_centers) > 1 else 1.0
        ax.bar(y_centers, p_total, width=width * 0.92, color="#b0c4de",
               label="p(Y), whole box")
        ax.plot(y_centers, p_arrival_conditioned, "o-", color="#c23b22", ms=3.5,
                lw=1.2, label="p(Y | arrived)")
        for yc in slit_centers:
            ax.axvline(yc, color="0.4", lw=0.8, ls="--")
        ax.set_xlabel("arrival interval center y")
        ax.set_ylabel("probability")
        ax.set_title(f"arrival distribution, theta = {theta:.4f} rad")
        ax.legend(loc="upper right")
        _save(fig, path)


def dfunc_figure(path: Path, labels: list[str], matrix: np.ndarray) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 5.2))
        mods = np.abs(matrix)
        floor = max(mods.max() * 1e-16, 1e-300)
        img = ax.imshow(np.log10(np.maximum(mods, floor)), cmap="viridis")
        fig.colorbar(img, ax=ax, label="log10 |D|")
        step = max(1, len(labels) // 16)
        ticks = list(range(0, len(labels), step))
        ax.set_xticks(ticks, [labels[i] for i in ticks], rotation=90, fontsize=5)
        ax.set_yticks(ticks, [labels[i] for i in ticks], fontsize=5)
        ax.set_title("decoherence functional")
        ax.grid(False)
        fig.tight_layout()
        _save(fig, path)


def conditional_figure(path: Path, y_centers: np.ndarray, p_cond: np.ndarray, condition: str) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(y_centers, p_cond, "o-", color="#2c6fbb", ms=3.5, lw=1.2)
        ax.set_xlabel("arrival interval center y")
        ax.set_ylabel(f"p(Y | {condition})")
        ax.set_title(f"conditional arrival distribution given {condition}")
        _save(fig, path)


def sweep_figures(
    overlay_path: Path,
    visibility_path: Path,
    y_centers: np.ndarray,
    patterns: list[tuple[float, np.ndarray]],
    visibilities: list[tuple[float, float]],
) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for theta, pattern in patterns:
            ax.plot(y_centers, pattern, lw=1.2, label=f"theta = {theta:.4f}")
        ax.set_xlabel("arrival interval center y")
        ax.set_ylabel("p(Y | arrived)")
        ax.set_title("arrival patterns vs record strength")
        ax.legend(fontsize=7)
        _save(fig, overlay_path)

        fig, ax = plt.subplots()
        thetas = [t for t, _ in visibilities]
        vis = [v for _, v in visibilities]
        ax.plot(thetas, vis, "o-", color="#2c6fbb")
        ax.set_xlabel("record strength theta (rad)")
        ax.set_ylabel("central-window fringe visibility")
        ax.set_ylim(bottom=0)
        ax.set_title("fringe visibility vs record strength")
        _save(fig, visibility_path)
