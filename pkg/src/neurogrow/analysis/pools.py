"""Receptive-field pools of layer-II units and how well they tile layer-I."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..topology import LayerGeometry
from ._geom import components, max_pairwise


@dataclass
class Pool:
    unit: int
    members: np.ndarray
    centroid: np.ndarray
    extent: float
    flagged: bool
    reason: str = ""


def extract_pools(units_or_w, geom: LayerGeometry, frac: float = 0.2,
                  radius: float = 2.0, max_pool_fraction: float = 0.25) -> list[Pool]:
    """One pool per unit: alive nodes with weight >= ``frac`` of the unit's max.

    A pool is flagged (kept, but not counted as a pool) when its members
    are not connected under the ``radius`` graph or when it spans more than
    ``max_pool_fraction`` of the alive layer, i.e. shows no spatial
    selectivity.

    ``units_or_w`` is a :class:`ProcessingUnits` or a node-major (N, M) array.
    """
    if not 0 < frac < 1:
        raise ValueError("frac must lie in (0, 1)")
    w = units_or_w.w if hasattr(units_or_w, "w") else np.asarray(units_or_w, dtype=float)
    if w.shape[0] != geom.n_nodes:
        raise ValueError("weight rows must match the geometry's node count")
    alive_idx = np.flatnonzero(geom.alive)
    adj = geom.neighbor_graph(radius)
    cap = max(1.0, max_pool_fraction * len(alive_idx))
    pools = []
    for j in range(w.shape[1]):
        col = w[alive_idx, j]
        top = col.max() if len(col) else 0.0
        if top <= 0:
            members = alive_idx.copy()
            reason = "no weight on alive nodes"
        else:
            members = alive_idx[col >= frac * top]
            reason = ""
        if not reason:
            if len(members) > cap:
                reason = "too broad"
            elif len(components(adj, members)) != 1:
                reason = "not contiguous"
        pts = geom.positions[members]
        pools.append(Pool(j, members, pts.mean(0), max_pairwise(pts), bool(reason), reason))
    return pools


def tiling_coverage(pools: list[Pool], geom: LayerGeometry) -> float:
    """Fraction of alive nodes that belong to at least one unflagged pool."""
    n_alive = geom.n_alive
    if n_alive == 0:
        return 0.0
    covered = np.zeros(geom.n_nodes, dtype=bool)
    for p in pools:
        if not p.flagged:
            covered[p.members] = True
    return float((covered & geom.alive).sum() / n_alive)


def pool_extents(pools: list[Pool]) -> np.ndarray:
    return np.array([p.extent for p in pools if not p.flagged])


def pool_maps_to_csv(pools: list[Pool], path) -> None:
    with open(path, "w") as fh:
        fh.write("unit_id,node_id\n")
        for p in pools:
            for i in p.members:
                fh.write(f"{p.unit},{int(i)}\n")


def pool_summary_to_csv(pools: list[Pool], path) -> None:
    with open(path, "w") as fh:
        fh.write("unit_id,centroid_x,centroid_y,extent,flagged\n")
        for p in pools:
            fh.write(f"{p.unit},{p.centroid[0]:.6f},{p.centroid[1]:.6f},{p.extent:.6f},"
                     f"{int(p.flagged)}\n")
