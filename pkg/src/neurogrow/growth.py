"""Developmental growth of the two-layer network from a single cell.

Cells live on a 2-D scaffold.  Growth proceeds in sweeps; a sweep samples
as many cells (uniformly, with replacement) as the population had when the
sweep began, then every cell ages by one.  A sampled cell

* divides horizontally while young (``clockH < hcd_age``), budgeted
  (``hf_lim > 0``) and uncrowded (fewer than ``thresh_hdiv`` cells within
  ``r_hdiv``): a daughter appears at a random point within ``r_hdiv``,
  both daughters restart their clock and inherit ``hf_lim - 1``;
* divides vertically once old enough, if it has not already done so and no
  vertically divided cell lies within ``r_vdiv``: a twin processing unit is
  created in layer-II connected only to this cell;
* otherwise stays quiescent.

Between sweeps the current network runs a few dynamics/plasticity steps,
so self-organisation starts long before the layer is full.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .dynamics import (DEFAULT_COUPLING_GAIN, IzhikevichParams, LayerState,
                       NoiseParams, init_layer_state, step)
from .plasticity import ProcessingUnits, empty_units, self_organize
from .topology import (LayerGeometry, TopologyParams, build_synaptic_matrix,
                       load_mask)


# ---------------------------------------------------------------- scaffolds

@dataclass(frozen=True)
class Scaffold:
    """Region cells may occupy.

    ``kind`` is ``rect`` (``size`` = (width, height) from the origin),
    ``disk`` (``size`` = (radius,), centred on ``origin``) or ``mask``
    (each true cell of ``mask`` covers a ``spacing``-sized square centred
    on its lattice point).
    """

    kind: str = "rect"
    size: tuple = (30.0, 30.0)
    origin: tuple = (0.0, 0.0)
    mask: tuple | None = None
    spacing: float = 1.0

    @classmethod
    def from_mask(cls, mask, spacing: float = 1.0) -> "Scaffold":
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ValueError("scaffold mask has no true cells")
        return cls("mask", mask.shape, (0.0, 0.0), tuple(map(tuple, mask.tolist())), spacing)

    @classmethod
    def from_file(cls, path, spacing: float = 1.0) -> "Scaffold":
        return cls.from_mask(load_mask(path), spacing)

    @property
    def label(self) -> str:
        if self.kind == "mask":
            return f"mask{self.size[0]}x{self.size[1]}"
        return f"{self.kind}" + "x".join(f"{s:g}" for s in self.size)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0] - self.origin[0], pts[:, 1] - self.origin[1]
        if self.kind == "rect":
            w, h = self.size
            return (x >= 0) & (x < w) & (y >= 0) & (y < h)
        if self.kind == "disk":
            return x * x + y * y <= self.size[0] ** 2
        if self.kind == "mask":
            m = np.asarray(self.mask, dtype=bool)
            c = np.floor(x / self.spacing + 0.5).astype(int)
            r = np.floor(y / self.spacing + 0.5).astype(int)
            ok = (r >= 0) & (r < m.shape[0]) & (c >= 0) & (c < m.shape[1])
            out = np.zeros(len(pts), dtype=bool)
            out[ok] = m[r[ok], c[ok]]
            return out
        raise ValueError(f"unknown scaffold kind {self.kind!r}")

    def centroid(self) -> np.ndarray:
        if self.kind == "rect":
            return np.array(self.origin) + np.array(self.size) / 2
        if self.kind == "disk":
            return np.array(self.origin, dtype=float)
        m = np.asarray(self.mask, dtype=bool)
        r, c = np.nonzero(m)
        return np.array([c.mean(), r.mean()]) * self.spacing

    def area(self) -> float:
        if self.kind == "rect":
            return float(self.size[0] * self.size[1])
        if self.kind == "disk":
            return math.pi * self.size[0] ** 2
        return float(np.asarray(self.mask, dtype=bool).sum()) * self.spacing ** 2


@dataclass(frozen=True)
class GrowthParams:
    hcd_age: int = 25
    hf_max: int = 40
    r_hdiv: float = 1.0
    r_vdiv: float = 1.0
    thresh_hdiv: int = 3
    scaffold: Scaffold = field(default_factory=Scaffold)
    seed_point: tuple | None = None
    placement: str = "disk"
    placement_attempts: int = 32
    daughter_room: bool = True

    def validate(self) -> None:
        if min(self.hcd_age, self.hf_max, self.r_hdiv, self.r_vdiv) <= 0:
            raise ValueError("growth parameters must be positive")
        if self.thresh_hdiv < 1:
            raise ValueError("thresh_hdiv must be >= 1")


# ---------------------------------------------------------------- state

@dataclass
class GrowthState:
    positions: np.ndarray          # (n, 2)
    clock: np.ndarray              # clockH per cell
    hf_lim: np.ndarray
    vcd: np.ndarray
    unit_of: np.ndarray            # layer-II twin index or -1
    sweep: int = 0
    n_units: int = 0
    lineage: list = field(default_factory=list)   # (sweep, event, parent, child, x, y, crowd)

    @property
    def n_cells(self) -> int:
        return len(self.positions)

    def copy(self) -> "GrowthState":
        return GrowthState(self.positions.copy(), self.clock.copy(), self.hf_lim.copy(),
                           self.vcd.copy(), self.unit_of.copy(), self.sweep, self.n_units,
                           list(self.lineage))


def seed_cell(params: GrowthParams, seed: int = 0) -> GrowthState:
    """A single young cell at the scaffold centroid (or ``params.seed_point``)."""
    params.validate()
    p0 = np.array(params.seed_point if params.seed_point is not None
                  else params.scaffold.centroid(), dtype=float)
    if not params.scaffold.contains(p0)[0]:
        raise ValueError(f"seed point {tuple(p0)} lies outside the scaffold")
    return GrowthState(
        positions=p0.reshape(1, 2), clock=np.zeros(1, dtype=int),
        hf_lim=np.array([params.hf_max]), vcd=np.zeros(1, dtype=bool),
        unit_of=np.full(1, -1),
    )


def _count_within(state: GrowthState, i: int, radius: float, among=None) -> int:
    d = state.positions - state.positions[i]
    near = (d * d).sum(1) <= radius * radius
    near[i] = False
    if among is not None:
        near &= among
    return int(near.sum())


def _place_daughter(state: GrowthState, i: int, params: GrowthParams, rng) -> np.ndarray | None:
    for _ in range(params.placement_attempts):
        if params.placement == "ring":
            r = params.r_hdiv
        else:
            r = params.r_hdiv * math.sqrt(rng.random())
        a = 2 * math.pi * rng.random()
        p = state.positions[i] + r * np.array([math.cos(a), math.sin(a)])
        if r <= 0 or not params.scaffold.contains(p)[0]:
            continue
        if params.daughter_room:
            d = state.positions - p
            if int(((d * d).sum(1) <= params.r_hdiv ** 2).sum()) >= params.thresh_hdiv:
                continue
        return p
    return None


def growth_step(state: GrowthState, params: GrowthParams, rng,
                index: int | None = None) -> tuple[GrowthState, str]:
    """Sample one cell (or use ``index``) and apply the division rules in place.

    Returns the state and the event: ``"H"``, ``"V"`` or ``"Q"``.
    """
    n = state.n_cells
    if n < 1:
        raise ValueError("growth needs at least one cell")
    i = int(rng.integers(n)) if index is None else int(index)
    if state.clock[i] < params.hcd_age:
        crowd = _count_within(state, i, params.r_hdiv)
        if crowd < params.thresh_hdiv and state.hf_lim[i] > 0:
            p = _place_daughter(state, i, params, rng)
            if p is not None:
                lim = state.hf_lim[i] - 1
                state.hf_lim[i] = lim
                state.clock[i] = 0
                state.positions = np.vstack([state.positions, p])
                state.clock = np.append(state.clock, 0)
                state.hf_lim = np.append(state.hf_lim, lim)
                state.vcd = np.append(state.vcd, False)
                state.unit_of = np.append(state.unit_of, -1)
                state.lineage.append((state.sweep, "H", i, n, float(p[0]), float(p[1]), crowd))
                return state, "H"
        return state, "Q"
    if not state.vcd[i]:
        if _count_within(state, i, params.r_vdiv, among=state.vcd) == 0:
            state.vcd[i] = True
            state.unit_of[i] = state.n_units
            x, y = state.positions[i]
            state.lineage.append((state.sweep, "V", i, state.n_units, float(x), float(y), -1))
            state.n_units += 1
            return state, "V"
    return state, "Q"


def growth_sweep(state: GrowthState, params: GrowthParams, rng) -> GrowthState:
    """``n`` samples for a population of ``n`` at sweep start, then age every cell."""
    for _ in range(state.n_cells):
        growth_step(state, params, rng)
    state.clock += 1
    state.sweep += 1
    return state


def capacity_bound(params: GrowthParams) -> int | None:
    """Upper bound on the layer-I population (``None`` without ``daughter_room``).

    Tile the scaffold's bounding box with squares of side ``r_hdiv/sqrt 2``.
    Any two cells in one square are within ``r_hdiv``, and a daughter is
    only placed where fewer than ``thresh_hdiv`` cells lie within
    ``r_hdiv``, so no square ever holds more than ``thresh_hdiv`` cells.
    """
    if not params.daughter_room:
        return None
    sc = params.scaffold
    if sc.kind == "rect":
        w, h = sc.size
    elif sc.kind == "disk":
        w = h = 2 * sc.size[0]
    else:
        h, w = sc.size[0] * sc.spacing, sc.size[1] * sc.spacing
    side = params.r_hdiv / math.sqrt(2)
    return int(params.thresh_hdiv * math.ceil(w / side) * math.ceil(h / side))


def detect_steady_state(history, window: int) -> bool:
    """True iff every population in ``history`` is constant over the last ``window`` entries."""
    if window < 1:
        raise ValueError("window must be >= 1")
    h = np.asarray(history)
    if len(h) < window:
        return False
    tail = h[-window:]
    return bool(np.all(tail == tail[0]))


def check_invariants(state: GrowthState, params: GrowthParams) -> list[str]:
    """Return human-readable violations of the growth invariants (empty if none)."""
    bad = []
    if not params.scaffold.contains(state.positions).all():
        bad.append(f"sweep {state.sweep}: cell outside scaffold")
    v = np.flatnonzero(state.vcd)
    if len(v) > 1:
        d = state.positions[v][:, None] - state.positions[v][None]
        d2 = (d * d).sum(-1)
        np.fill_diagonal(d2, np.inf)
        if (d2 <= params.r_vdiv * params.r_vdiv).any():
            bad.append(f"sweep {state.sweep}: two vertically divided cells within r_vdiv")
    for rec in state.lineage:
        if rec[1] == "H" and rec[6] >= params.thresh_hdiv:
            bad.append(f"sweep {rec[0]}: division by crowded cell {rec[2]}")
    if (state.hf_lim < 0).any() or (state.hf_lim > params.hf_max).any():
        bad.append(f"sweep {state.sweep}: division budget out of range")
    return bad


# ---------------------------------------------------------------- scheduler

@dataclass
class SimConfig:
    """Dynamics/plasticity settings used while a network grows."""

    topology: TopologyParams = field(default_factory=TopologyParams)
    izhikevich: IzhikevichParams = field(default_factory=IzhikevichParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    gain: float = DEFAULT_COUPLING_GAIN
    eta_learn: float = 0.01
    selection: str = "thresholded"


@dataclass
class GrownNetwork:
    layer1: LayerGeometry
    units: ProcessingUnits
    lineage: list
    converged: bool
    history: list
    sweeps: int
    growth: GrowthState
    layer_state: LayerState
    invariant_violations: list = field(default_factory=list)

    def lineage_to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("sweep,event,parent_id,child_id,x,y\n")
            for s, e, p, c, x, y, _ in self.lineage:
                fh.write(f"{s},{e},{p},{c},{x:.6f},{y:.6f}\n")


def grow_network(params: GrowthParams | None = None, sim: SimConfig | None = None,
                 seed: int = 0, max_steps: int = 1000, interleave: int = 10,
                 window: int = 50, validate: bool = True, progress=None) -> GrownNetwork:
    """Grow until populations are constant for ``window`` sweeps or ``max_steps`` sweeps pass."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    params = params or GrowthParams()
    sim = sim or SimConfig()
    rng = _rng.stream(seed, "growth")
    gs = seed_cell(params, seed)
    geom = LayerGeometry(gs.positions.copy(), scaffold_id=params.scaffold.label)
    layer = init_layer_state(geom, sim.izhikevich, seed)
    units = empty_units(1, sim.eta_learn)
    history = []
    violations = []
    converged = False
    S = build_synaptic_matrix(geom, sim.topology)
    for sweep in range(max_steps):
        n_before, m_before = gs.n_cells, gs.n_units
        growth_sweep(gs, params, rng)
        if gs.n_cells > n_before:
            k = gs.n_cells - n_before
            layer.append_nodes(k)
            units.add_nodes(k)
        if gs.n_cells > n_before or gs.n_units > m_before:
            geom = LayerGeometry(gs.positions.copy(), scaffold_id=params.scaffold.label)
        if gs.n_cells > n_before:
            S = build_synaptic_matrix(geom, sim.topology)
        for rec in gs.lineage:
            if rec[1] == "V" and rec[3] >= units.n_units:
                col = np.zeros(gs.n_cells)
                col[rec[2]] = 1.0
                units.add_unit(col)
        if validate:
            violations.extend(check_invariants(gs, params))
        if interleave > 0 and units.n_units > 0:
            self_organize(geom, S, sim.izhikevich, sim.noise, units, interleave, seed,
                          state=layer, gain=sim.gain, selection=sim.selection)
        elif interleave > 0:
            for _ in range(interleave):
                step(layer, S, sim.noise, gain=sim.gain)
        history.append((gs.n_cells, gs.n_units))
        if progress is not None:
            progress(sweep + 1, gs.n_cells, gs.n_units)
        if detect_steady_state(history, window):
            converged = True
            break
    return GrownNetwork(geom, units, list(gs.lineage), converged, history, gs.sweep, gs,
                        layer, violations)
