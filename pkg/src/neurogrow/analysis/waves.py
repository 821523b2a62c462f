"""Spatiotemporal wave detection on spike rasters.

Every step's active nodes are split into connected components under the
``radius``-neighbourhood graph.  Components of at least ``min_size`` nodes
that touch (some pair within ``radius``) in consecutive steps are chained
into space-time events.  An event is a travelling wave when it spans at
least ``K`` consecutive steps and its centroid moves, at some point, at
least as far from where it started as the event's largest spatial extent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..topology import LayerGeometry
from ._geom import components, max_pairwise


@dataclass
class WaveStats:
    step: int
    active: int
    components: list          # arrays of node ids
    centroids: np.ndarray     # (k, 2)
    extents: np.ndarray       # (k,)

    @property
    def n_components(self) -> int:
        return len(self.components)


@dataclass
class Wave:
    start: int
    end: int
    n_frames: int
    displacement: float
    extent: float
    path: np.ndarray          # (n_frames, 2) centroid per frame
    peak_size: int

    @property
    def lifetime(self) -> int:
        return self.end - self.start


def frame_stats(t: int, active: np.ndarray, geom: LayerGeometry, adj) -> WaveStats:
    idx = np.flatnonzero(active)
    comps = components(adj, idx)
    pos = geom.positions
    cents = np.array([pos[c].mean(0) for c in comps]).reshape(-1, 2)
    ext = np.array([max_pairwise(pos[c]) for c in comps])
    return WaveStats(t, len(idx), comps, cents, ext)


def wave_stats(raster, geom: LayerGeometry, radius: float = 2.0) -> list[WaveStats]:
    """Per-step component decomposition of a raster (``SpikeTrace`` or bool array)."""
    adj = geom.neighbor_graph(radius, alive_only=False)
    return [frame_stats(t, fr, geom, adj) for t, fr in enumerate(_frames(raster))]


def _frames(raster):
    if hasattr(raster, "frame"):
        return iter(raster)
    return iter(np.asarray(raster, dtype=bool))


class _DSU:
    def __init__(self):
        self.parent = []

    def add(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def detect_waves(raster, geom: LayerGeometry, radius: float = 2.0, K: int = 5,
                 min_size: int = 3, stats: list[WaveStats] | None = None) -> tuple[list[WaveStats], list[Wave]]:
    """Return ``(per-step stats, travelling waves)`` for a raster."""
    adj = geom.neighbor_graph(radius, alive_only=False)
    if stats is None:
        stats = [frame_stats(t, fr, geom, adj) for t, fr in enumerate(_frames(raster))]
    n = geom.n_nodes
    dsu = _DSU()
    blobs = []                              # (step, node ids)
    prev_label = np.full(n, -1)
    prev_t = None
    for st in stats:
        label = np.full(n, -1)
        for comp in st.components:
            if len(comp) < min_size:
                continue
            b = dsu.add()
            blobs.append((st.step, comp))
            label[comp] = b
            if prev_t is not None and prev_t == st.step - 1:
                reach = np.union1d(comp, adj[comp].indices)
                for a in np.unique(prev_label[reach]):
                    if a >= 0:
                        dsu.union(a, b)
        prev_label, prev_t = label, st.step
    events = {}
    for b, (t, comp) in enumerate(blobs):
        events.setdefault(dsu.find(b), []).append((t, comp))
    waves = []
    pos = geom.positions
    for root in sorted(events):
        frames = {}
        for t, comp in events[root]:
            frames.setdefault(t, []).append(comp)
        steps = sorted(frames)
        if len(steps) < K:
            continue
        members = [np.concatenate(frames[t]) for t in steps]
        path = np.array([pos[m].mean(0) for m in members])
        extent = max(max_pairwise(pos[m]) for m in members)
        disp = float(np.sqrt(((path - path[0]) ** 2).sum(1)).max())
        if disp >= extent:
            waves.append(Wave(steps[0], steps[-1], len(steps), disp, extent, path,
                              max(len(m) for m in members)))
    return stats, waves


def waves_to_csv(waves: list[Wave], path) -> None:
    with open(path, "w") as fh:
        fh.write("wave_id,start_step,end_step,n_frames,displacement,extent,peak_size\n")
        for k, w in enumerate(waves):
            fh.write(f"{k},{w.start},{w.end},{w.n_frames},{w.displacement:.6f},"
                     f"{w.extent:.6f},{w.peak_size}\n")


def stats_to_csv(stats: list[WaveStats], path) -> None:
    with open(path, "w") as fh:
        fh.write("step,active,components,max_extent\n")
        for s in stats:
            mx = float(s.extents.max()) if len(s.extents) else 0.0
            fh.write(f"{s.step},{s.active},{s.n_components},{mx:.6f}\n")
