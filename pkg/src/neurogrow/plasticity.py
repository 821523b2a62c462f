"""Layer-II processing units: ReLU + winner-take-all + normalised Hebbian learning.

Weights are stored node-major, ``w[i, j]`` connecting layer-I node ``i`` to
unit ``j``, so the activation of every unit is a sum over the rows of the
nodes that fired.  Files and the evaluation module use the unit-major
``W1 = w.T``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _rng
from .dynamics import (DEFAULT_COUPLING_GAIN, IzhikevichParams, LayerState,
                       NoiseParams, init_layer_state, step)
from .errors import FormatError
from .topology import LayerGeometry, SynapticMatrix

SELECTIONS = ("thresholded", "raw")


@dataclass
class ProcessingUnits:
    w: np.ndarray                 # (N, M), non-negative
    c: np.ndarray                 # (M,) thresholds
    z: np.ndarray                 # (M,) updates in the current window
    y_max: np.ndarray             # (M,) running max of winning activations
    mean0: np.ndarray             # (M,) normalisation targets
    eta_learn: float = 0.01

    @property
    def n_units(self) -> int:
        return self.w.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.w.shape[0]

    @property
    def W1(self) -> np.ndarray:
        """Unit-major view, shape (M, N)."""
        return self.w.T

    def copy(self) -> "ProcessingUnits":
        return ProcessingUnits(self.w.copy(), self.c.copy(), self.z.copy(),
                               self.y_max.copy(), self.mean0.copy(), self.eta_learn)

    def add_nodes(self, k: int) -> None:
        """Append ``k`` zero-weight nodes; targets are rebased so column sums are kept."""
        n_old = self.n_nodes
        self.w = np.vstack([self.w, np.zeros((k, self.n_units))])
        self.mean0 = self.mean0 * (n_old / self.n_nodes)

    def add_unit(self, weights: np.ndarray, c: float = 0.0) -> int:
        """Append one unit with the given weight column; returns its index."""
        col = np.asarray(weights, dtype=float).reshape(-1, 1)
        if col.shape[0] != self.n_nodes or (col < 0).any() or col.sum() <= 0:
            raise ValueError("new unit needs a non-negative, non-zero column of length N")
        self.w = np.hstack([self.w, col])
        self.c = np.append(self.c, c)
        self.z = np.append(self.z, 0)
        self.y_max = np.append(self.y_max, 0.0)
        self.mean0 = np.append(self.mean0, col.mean())
        return self.n_units - 1

    # -- binary matrix file -------------------------------------------------

    MAGIC = b"NGW1"

    def weights_to_bytes(self) -> bytes:
        M, N = self.n_units, self.n_nodes
        body = np.ascontiguousarray(self.W1, dtype="<f8").tobytes()
        return struct.pack("<4sII", self.MAGIC, M, N) + body


def empty_units(n_nodes: int, eta_learn: float = 0.01) -> ProcessingUnits:
    return ProcessingUnits(np.zeros((n_nodes, 0)), np.zeros(0), np.zeros(0, dtype=int),
                           np.zeros(0), np.zeros(0), eta_learn)


def save_weights(W1: np.ndarray, path) -> None:
    W1 = np.asarray(W1, dtype="<f8")
    M, N = W1.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", ProcessingUnits.MAGIC, M, N))
        fh.write(np.ascontiguousarray(W1).tobytes())


def load_weights(path) -> np.ndarray:
    """Read an ``NGW1`` file; returns the unit-major (M, N) matrix."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12:
        raise FormatError("weight file shorter than its 12-byte header", 0)
    magic, M, N = struct.unpack("<4sII", data[:12])
    if magic != ProcessingUnits.MAGIC:
        raise FormatError(f"bad weight magic {magic!r}", 0)
    need = 12 + 8 * M * N
    if len(data) != need:
        raise FormatError(f"expected {need} bytes for {M}x{N} weights, found {len(data)}",
                          min(len(data), need))
    return np.frombuffer(data, dtype="<f8", offset=12).reshape(M, N).astype(float)


def init_units(M: int, N: int, seed: int = 0, init_scheme: str = "uniform-full",
               geom: LayerGeometry | None = None, eta_learn: float = 0.01,
               c0: float = 0.0, bias_radius: float | None = None,
               bias_floor: float = 0.3) -> ProcessingUnits:
    """Fresh units with ``w ~ U(0,1)``.

    ``spatially-biased`` tilts each unit's weights towards a point of a
    regular sub-lattice spanning the layer: weights are multiplied by
    ``bias_floor + (1 - bias_floor) * exp(-d^2 / 2 r^2)``.  The floor keeps
    every unit connected to the whole layer, so the initial receptive
    fields are still unselective; the tilt only decides which unit tends to
    win in which region, letting distant regions organise in parallel.
    """
    if M < 1 or N < 1:
        raise ValueError("M and N must be >= 1")
    rng = _rng.stream(seed, "init-units")
    w = rng.uniform(0.0, 1.0, size=(N, M))
    # U(0,1) can return exactly 0; keep every initial connection positive
    w[w == 0] = np.finfo(float).tiny
    if init_scheme == "spatially-biased":
        if geom is None or geom.n_nodes != N:
            raise ValueError("spatially-biased init needs the matching geometry")
        centres, spacing = unit_centres(geom, M)
        sigma = bias_radius if bias_radius is not None else spacing
        d2 = ((geom.positions[:, None, :] - centres[None, :, :]) ** 2).sum(-1)
        w = w * (bias_floor + (1.0 - bias_floor) * np.exp(-d2 / (2 * sigma * sigma)))
    elif init_scheme != "uniform-full":
        raise ValueError(f"unknown init scheme {init_scheme!r}")
    return ProcessingUnits(
        w=w, c=np.full(M, float(c0)), z=np.zeros(M, dtype=int), y_max=np.zeros(M),
        mean0=w.mean(0), eta_learn=float(eta_learn),
    )


def unit_centres(geom: LayerGeometry, M: int) -> tuple[np.ndarray, float]:
    """``M`` points on a near-square lattice covering the layer's bounding box."""
    lo = geom.positions.min(0)
    hi = geom.positions.max(0)
    span = np.maximum(hi - lo, 1e-9)
    ny = max(1, int(round(np.sqrt(M * span[1] / span[0]))))
    nx = int(np.ceil(M / ny))
    xs = lo[0] + (np.arange(nx) + 0.5) * span[0] / nx
    ys = lo[1] + (np.arange(ny) + 0.5) * span[1] / ny
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])[:M]
    return pts, float(max(span[0] / nx, span[1] / ny))


@dataclass(frozen=True)
class WinnerResult:
    winner: int | None = None
    activation: float = 0.0


def forward_wta(units: ProcessingUnits, spikes: np.ndarray,
                selection: str = "thresholded") -> WinnerResult:
    """Single-winner ReLU layer.

    ``raw`` picks the argmax of the raw drive and then gates it by the
    winner's threshold; ``thresholded`` picks the argmax of drive minus
    threshold.  Ties go to the lowest unit index.
    """
    spikes = np.asarray(spikes, dtype=bool)
    if spikes.shape != (units.n_nodes,):
        raise ValueError("spike vector length must equal the node count")
    fired = np.flatnonzero(spikes)
    if len(fired) == 0 or units.n_units == 0:
        return WinnerResult()
    r = units.w[fired].sum(0)
    if selection == "thresholded":
        j = int(np.argmax(r - units.c))
    elif selection == "raw":
        j = int(np.argmax(r))
    else:
        raise ValueError(f"unknown selection {selection!r}")
    y = r[j] - units.c[j]
    if y > 0:
        return WinnerResult(j, float(y))
    return WinnerResult()


def hebbian_update(units: ProcessingUnits, result: WinnerResult,
                   spikes: np.ndarray) -> ProcessingUnits:
    """Reinforce the winner's weights from fired nodes, then restore its mean."""
    if result.winner is None:
        return units
    j = result.winner
    fired = np.flatnonzero(spikes)
    col = units.w[:, j]
    col[fired] += units.eta_learn * result.activation
    col *= units.mean0[j] / col.mean()
    units.z[j] += 1
    if result.activation > units.y_max[j]:
        units.y_max[j] = result.activation
    return units


def update_thresholds(units: ProcessingUnits, t: int, window: int = 1000,
                      z_min: int = 200, divisor: float = 5.0) -> ProcessingUnits:
    """At window boundaries, raise quiet units' thresholds and reset counters."""
    if t % window != 0:
        return units
    low = units.z < z_min
    units.c[low] = units.y_max[low] / divisor
    units.z[:] = 0
    return units


@dataclass
class OrganizeTrace:
    step: np.ndarray
    winner: np.ndarray            # -1 where no unit won
    activation: np.ndarray
    windows: list = field(default_factory=list)   # (step, units updated, thresholds changed)
    final_state: LayerState | None = None

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("step,winner,activation\n")
            for s, w, a in zip(self.step, self.winner, self.activation):
                fh.write(f"{s},{w},{float(a)!r}\n")


def self_organize(geom: LayerGeometry, S: SynapticMatrix, izh_params: IzhikevichParams | None,
                  noise: NoiseParams, units: ProcessingUnits, steps: int, seed: int = 0,
                  state: LayerState | None = None, gain: float = DEFAULT_COUPLING_GAIN,
                  selection: str = "thresholded", dt: float = 1.0, substeps: int = 2,
                  window: int = 1000, z_min: int = 200,
                  observer: Callable[[int, LayerState, ProcessingUnits], None] | None = None,
                  ) -> tuple[ProcessingUnits, OrganizeTrace]:
    """Couple layer-I dynamics to the units for ``steps`` steps (units mutated in place).

    Pass ``state`` to continue a previous run; its step counter drives both
    the noise stream and the threshold windows.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if units.n_nodes != geom.n_nodes:
        raise ValueError("units and geometry disagree on node count")
    if state is None:
        state = init_layer_state(geom, izh_params, seed)
    state.alive = geom.alive.copy()
    steps_out = np.empty(steps, dtype=np.int64)
    winners = np.full(steps, -1, dtype=np.int64)
    acts = np.zeros(steps)
    windows = []
    buf = np.empty(geom.n_nodes)
    for k in range(steps):
        step(state, S, noise, dt=dt, substeps=substeps, gain=gain, drive_buf=buf)
        t = state.t
        res = forward_wta(units, state.spikes, selection)
        hebbian_update(units, res, state.spikes)
        steps_out[k] = t
        if res.winner is not None:
            winners[k] = res.winner
            acts[k] = res.activation
        if t % window == 0:
            windows.append((t, int((units.z > 0).sum()), int((units.z < z_min).sum())))
        update_thresholds(units, t, window, z_min)
        if observer is not None:
            observer(t, state, units)
    return units, OrganizeTrace(steps_out, winners, acts, windows, state)
