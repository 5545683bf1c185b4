"""Figure rendering for the CLI report path. The CSV traces remain the
interface; everything here is recomputed from the same rows the CSV holds,
so any external plotting tool can reproduce these figures from the files."""

from __future__ import annotations

import math
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .harness import TraceRow

__all__ = [
    "render_trace_figure",
    "render_sweep_figure",
    "render_lb_figure",
]


def _finite(xs, ys):
    pairs = [(x, y) for x, y in zip(xs, ys)
             if y is not None and math.isfinite(y)]
    if not pairs:
        return [], []
    return zip(*pairs)


def render_trace_figure(rows: List[TraceRow], path: str,
                        title: Optional[str] = None) -> None:
    """Three stacked panels: full/batch loss, tau against alpha, and the
    lower-bound estimate, all versus iteration."""
    ks = [r.k for r in rows]
    fig, axes = plt.subplots(3, 1, figsize=(7, 9), sharex=True)

    ax = axes[0]
    ax.plot(*_finite(ks, [r.full_loss for r in rows]), label="full loss")
    ax.plot(*_finite(ks, [r.batch_loss for r in rows]), label="batch loss",
            alpha=0.5)
    ax.set_yscale("log")
    ax.set_ylabel("loss")
    ax.legend()
    if title:
        ax.set_title(title)

    ax = axes[1]
    ax.plot(*_finite(ks, [r.tau for r in rows]), label="tau")
    ax.plot(*_finite(ks, [r.alpha for r in rows]), label="alpha",
            linestyle="--")
    ax.set_yscale("log")
    ax.set_ylabel("step size")
    ax.legend()

    ax = axes[2]
    ax.plot(*_finite(ks, [r.lb for r in rows]), label="lower bound")
    ax.set_xlabel("iteration")
    ax.set_ylabel("lb")
    ax.legend()

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_figure(summary_rows: Sequence[dict], path: str,
                        title: Optional[str] = None) -> None:
    """Sensitivity plot: mean final loss (with a std band) versus alpha on
    log-log axes; diverged grid points are marked at the top of the axis."""
    ok = [r for r in summary_rows if math.isfinite(r["mean_final_loss"])]
    bad = [r for r in summary_rows if not math.isfinite(r["mean_final_loss"])]
    fig, ax = plt.subplots(figsize=(7, 5))
    if ok:
        alphas = [r["alpha"] for r in ok]
        means = [max(r["mean_final_loss"], 1e-300) for r in ok]
        ax.plot(alphas, means, marker="o", label="mean final loss")
        stds = [r["std_final_loss"] for r in ok]
        lo = [max(m - s, 1e-300) for m, s in zip(means, stds)]
        hi = [m + s for m, s in zip(means, stds)]
        ax.fill_between(alphas, lo, hi, alpha=0.2)
    if bad:
        top = max((r["mean_final_loss"] for r in ok), default=1.0)
        ax.plot([r["alpha"] for r in bad], [top] * len(bad), marker="x",
                linestyle="none", color="red", label="diverged")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("alpha")
    ax.set_ylabel("final full loss")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_lb_figure(rows: List[TraceRow], path: str, f_star: float = 0.0,
                     title: Optional[str] = None) -> None:
    """Convergence of the online lower-bound estimate toward a reference
    optimal value."""
    ks = [r.k for r in rows]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(*_finite(ks, [r.lb for r in rows]), label="lb estimate")
    ax.axhline(f_star, color="black", linestyle="--", linewidth=1,
               label="reference f*")
    ax.set_xlabel("iteration")
    ax.set_ylabel("lower bound")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
