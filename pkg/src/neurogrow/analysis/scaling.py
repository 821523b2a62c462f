"""How self-organisation scales with layer size."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..dynamics import NoiseParams, init_layer_state
from ..plasticity import init_units, self_organize
from ..topology import TopologyParams, build_grid_layer, build_synaptic_matrix
from ._geom import label_components
from .pools import extract_pools, tiling_coverage


@dataclass
class ScalingRow:
    n_nodes: int
    n_units: int
    shape: tuple
    steps_to_tiling: int
    converged: bool
    coverage: float
    peak_components: int
    median_components: float
    wall_clock: float

    @property
    def steps_per_node(self) -> float:
        return self.steps_to_tiling / self.n_nodes


def grid_shape(n: int) -> tuple[int, int]:
    """Most square ``rows x cols`` factorisation of ``n`` (rows <= cols)."""
    r = int(np.floor(np.sqrt(n)))
    while n % r:
        r -= 1
    return r, n // r


def scaling_benchmark(sizes, seed: int = 0, nodes_per_unit: int = 25, target: float = 0.9,
                      step_cap: int = 200_000, check_every: int = 1000,
                      topology: TopologyParams | None = None, sigma2: float = 9.0,
                      gain: float = 3.0, eta_learn: float = 0.01, selection: str = "thresholded",
                      init_scheme: str = "spatially-biased", bias_floor: float = 0.3,
                      pool_frac: float = 0.2, max_pool_fraction: float = 0.25,
                      min_component: int = 5, sample_every: int = 10,
                      dense_threshold: int = 5000, progress=None) -> list[ScalingRow]:
    """Steps until pools tile ``target`` of the layer, for square-ish grids of each size.

    Units scale with the layer (``N / nodes_per_unit``) so the expected pool
    size is the same at every size.  Simultaneous waves are counted as
    components of at least ``min_component`` co-active nodes, sampled every
    ``sample_every`` steps.
    """
    sizes = list(sizes)
    if any(b < a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be non-decreasing")
    topology = topology or TopologyParams()
    rows = []
    for n in sizes:
        shape = grid_shape(int(n))
        geom = build_grid_layer(*shape)
        M = max(1, geom.n_nodes // nodes_per_unit)
        S = build_synaptic_matrix(geom, topology, dense_threshold=dense_threshold)
        adj = geom.neighbor_graph(topology.r_e)
        units = init_units(M, geom.n_nodes, seed, init_scheme, geom=geom,
                           eta_learn=eta_learn, bias_floor=bias_floor)
        state = init_layer_state(geom, None, seed)
        counts = []

        def observe(t, st, _units):
            if t % sample_every == 0:
                lab, k = label_components(adj, st.spikes)
                if k:
                    sz = np.bincount(lab[lab >= 0])
                    counts.append(int((sz >= min_component).sum()))
                else:
                    counts.append(0)

        t0 = time.perf_counter()
        done, cov, converged = 0, 0.0, False
        while done < step_cap:
            chunk = min(check_every, step_cap - done)
            self_organize(geom, S, None, NoiseParams(sigma2), units, chunk, seed, state=state,
                          gain=gain, selection=selection, observer=observe)
            done += chunk
            cov = tiling_coverage(extract_pools(units, geom, pool_frac, topology.r_e,
                                                max_pool_fraction), geom)
            if progress is not None:
                progress(geom.n_nodes, done, cov)
            if cov >= target:
                converged = True
                break
        c = np.asarray(counts)
        nz = c[c > 0]
        rows.append(ScalingRow(geom.n_nodes, M, shape, done, converged, cov,
                               int(c.max()) if len(c) else 0,
                               float(np.median(nz)) if len(nz) else 0.0,
                               time.perf_counter() - t0))
    return rows


def scaling_to_csv(rows: list[ScalingRow], path) -> None:
    with open(path, "w") as fh:
        fh.write("n_nodes,n_units,rows,cols,steps_to_tiling,steps_per_node,converged,coverage,"
                 "peak_components,median_components\n")
        for r in rows:
            fh.write(f"{r.n_nodes},{r.n_units},{r.shape[0]},{r.shape[1]},{r.steps_to_tiling},"
                     f"{r.steps_per_node:.6f},{int(r.converged)},{r.coverage:.6f},"
                     f"{r.peak_components},{r.median_components:.3f}\n")
