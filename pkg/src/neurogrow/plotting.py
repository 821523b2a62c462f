"""Report figures.  Everything renders off-screen with the Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_wave_snapshots(raster, geom, path, steps=None, n: int = 6) -> None:
    """Active nodes at a few steps, drawn on the layer's positions."""
    dense = raster.to_dense() if hasattr(raster, "to_dense") else np.asarray(raster, bool)
    T = dense.shape[0]
    if steps is None:
        busy = np.flatnonzero(dense.sum(1) > 0)
        pick = busy if len(busy) else np.arange(T)
        steps = pick[np.linspace(0, len(pick) - 1, min(n, len(pick))).astype(int)]
    steps = list(steps)
    fig, axes = plt.subplots(1, len(steps), figsize=(2.2 * len(steps), 2.4), squeeze=False)
    pos = geom.positions
    for ax, t in zip(axes[0], steps):
        ax.scatter(pos[:, 0], pos[:, 1], s=3, c="0.85")
        on = dense[t]
        ax.scatter(pos[on, 0], pos[on, 1], s=6, c="crimson")
        ax.set_title(f"t={int(t) + 1}", fontsize=8)
        ax.set_aspect("equal")
        ax.axis("off")
    _save(fig, path)


def plot_activity(raster, path) -> None:
    """Number of spiking nodes per step."""
    dense = raster.to_dense() if hasattr(raster, "to_dense") else np.asarray(raster, bool)
    fig, ax = plt.subplots(figsize=(6, 2.2))
    ax.plot(np.arange(1, dense.shape[0] + 1), dense.sum(1), lw=0.6)
    ax.set_xlabel("step")
    ax.set_ylabel("active nodes")
    _save(fig, path)


def plot_pool_map(pools, geom, path, title: str = "") -> None:
    """Each unflagged pool in its own colour; dead nodes as crosses."""
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    pos = geom.positions
    ax.scatter(pos[:, 0], pos[:, 1], s=4, c="0.85")
    cmap = plt.get_cmap("tab20")
    for k, p in enumerate(q for q in pools if not q.flagged):
        m = p.members
        ax.scatter(pos[m, 0], pos[m, 1], s=9, color=cmap(k % 20))
    dead = ~geom.alive
    if dead.any():
        ax.scatter(pos[dead, 0], pos[dead, 1], s=10, c="k", marker="x")
    ax.set_aspect("equal")
    ax.set_title(title, fontsize=9)
    ax.axis("off")
    _save(fig, path)


def plot_coverage(steps, coverage, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 2.6))
    ax.plot(steps, coverage, marker="o", ms=3)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("step")
    ax.set_ylabel("tiling coverage")
    _save(fig, path)


def plot_growth(history, path) -> None:
    h = np.asarray(history, dtype=float).reshape(-1, 2)
    fig, ax = plt.subplots(figsize=(5, 2.8))
    x = np.arange(1, len(h) + 1)
    ax.plot(x, h[:, 0], label="layer-I cells")
    ax.plot(x, h[:, 1], label="layer-II units")
    ax.set_xlabel("sweep")
    ax.set_ylabel("count")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_accuracy(report, path) -> None:
    """Per-kind test accuracy: individual runs plus the mean."""
    acc = report.accuracies
    fig, ax = plt.subplots(figsize=(4.5, 3))
    for i, (k, v) in enumerate(acc.items()):
        v = np.asarray(v)
        ax.scatter(np.full(len(v), i), v, s=12, alpha=0.7)
        ax.hlines(v.mean(), i - 0.25, i + 0.25, colors="k")
    ax.set_xticks(range(len(acc)), list(acc), fontsize=8)
    ax.set_ylabel("test accuracy")
    _save(fig, path)


def plot_extent_sweep(radii, extents, path) -> None:
    """Pool-extent distribution per inhibition radius."""
    fig, ax = plt.subplots(figsize=(4.5, 3))
    data = [np.asarray(e, float) for e in extents]
    ax.boxplot(data, labels=[f"{r:g}" for r in radii])
    ax.set_xlabel("inhibition radius")
    ax.set_ylabel("pool extent")
    _save(fig, path)


def plot_scaling(rows, path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(7, 2.8))
    n = [r.n_nodes for r in rows]
    axes[0].plot(n, [r.steps_per_node for r in rows], marker="o")
    for r in rows:
        if not r.converged:
            axes[0].annotate("cap", (r.n_nodes, r.steps_per_node), fontsize=7)
    axes[0].set_xlabel("nodes")
    axes[0].set_ylabel("steps to tiling / node")
    axes[1].plot(n, [r.peak_components for r in rows], marker="o", label="peak")
    axes[1].plot(n, [r.median_components for r in rows], marker="s", label="median")
    axes[1].set_xlabel("nodes")
    axes[1].set_ylabel("simultaneous wave components")
    axes[1].legend(fontsize=8)
    _save(fig, path)


def plot_rate_trace(trace, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 2.4))
    c = trace.centroids[:, 0]
    ax.plot(np.arange(1, len(c) + 1), c, lw=0.6)
    ax.set_xlabel("step")
    ax.set_ylabel("bump centroid (x)")
    ax.set_title(f"{trace.transitions} transitions", fontsize=9)
    _save(fig, path)
