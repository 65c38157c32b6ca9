"""Figure rendering for benchmark records.

Everything draws through the Agg backend and writes PNG files; nothing
here opens a window. Each function takes the records produced by the
benchmark harness and returns the path it wrote.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def plot_depth_sweep(records, path) -> Path:
    """Truncated optimum, realized value and a-priori bound against depth."""
    path = Path(path)
    records = sorted(records, key=lambda r: r.depth)
    depth = [r.depth for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(depth, [r.z_ub for r in records], "o-", label="truncated optimum")
    ax.plot(depth, [r.actual for r in records], "s--", label="value at its argmax")
    ax.plot(depth, [r.z_lb_apriori for r in records], "^:", label="a-priori lower bound")
    ax.set_xlabel("split depth kept")
    ax.set_ylabel("objective")
    ax.set_xticks(depth)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_proximity_frontier(records, path) -> Path:
    path = Path(path)
    records = sorted(records, key=lambda r: r.cap)
    feasible = [r for r in records if not math.isnan(r.z_lb)]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r.cap for r in feasible], [r.z_lb for r in feasible], "o-")
    for r in records:
        if math.isnan(r.z_lb):
            ax.axvline(r.cap, color="tab:red", linestyle=":", alpha=0.6)
    ax.set_xlabel("proximity cap")
    ax.set_ylabel("constrained optimum")
    ax.set_xscale("log")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_method_comparison(records, path) -> Path:
    """Median solve time per method with the individual runs overlaid."""
    path = Path(path)
    by_method: dict[str, list[float]] = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r.time_ms)
    names = list(by_method)
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(names), 4))
    for k, name in enumerate(names):
        times = sorted(by_method[name])
        med = times[len(times) // 2]
        ax.bar(k, med, width=0.6, color="tab:blue", alpha=0.35)
        ax.plot([k] * len(times), times, ".", color="tab:blue", alpha=0.8)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("time (ms)")
    ax.set_yscale("log")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
