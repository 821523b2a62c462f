"""Small geometric helpers shared by the analysis modules."""

from __future__ import annotations

import numba
import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist


def max_pairwise(points: np.ndarray) -> float:
    """Largest distance between any two points (0 for fewer than two)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 400:
        # the diameter is attained on the convex hull
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:  # degenerate (collinear) input
            pass
    return float(pdist(pts).max())


@numba.njit(cache=True)
def _label(indptr, indices, active):
    n = active.shape[0]
    lab = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    k = 0
    for s in range(n):
        if not active[s] or lab[s] >= 0:
            continue
        lab[s] = k
        top = 0
        stack[top] = s
        top += 1
        while top > 0:
            top -= 1
            i = stack[top]
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if active[j] and lab[j] < 0:
                    lab[j] = k
                    stack[top] = j
                    top += 1
        k += 1
    return lab, k


def label_components(adj, active: np.ndarray) -> tuple[np.ndarray, int]:
    """Component label per node (-1 where inactive) and the component count.

    Labels are numbered in order of each component's smallest node id.
    """
    active = np.asarray(active, dtype=np.bool_)
    return _label(adj.indptr.astype(np.int64), adj.indices.astype(np.int64), active)


def components(adj, nodes: np.ndarray) -> list[np.ndarray]:
    """Connected components of the sub-graph induced by ``nodes``, each sorted."""
    nodes = np.asarray(nodes, dtype=int)
    if len(nodes) == 0:
        return []
    active = np.zeros(adj.shape[0], dtype=bool)
    active[nodes] = True
    lab, k = label_components(adj, active)
    sorted_nodes = np.sort(nodes)
    order = np.argsort(lab[sorted_nodes], kind="stable")
    sorted_nodes = sorted_nodes[order]
    cuts = np.searchsorted(lab[sorted_nodes], np.arange(1, k))
    return list(np.split(sorted_nodes, cuts))
