"""Izhikevich dynamics for layer-I.

One call to :func:`step` advances the layer by ``dt`` time units using the
usual scheme for this model: the potential is updated in ``substeps``
forward-Euler sub-steps, the recovery variable once.  Synaptic drive comes
from the spikes of the previous step, noise is white with variance
``sigma2`` per unit time, and nodes above threshold are reset.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _rng
from .errors import FormatError, NumericOverflowError
from .topology import LayerGeometry, SynapticMatrix

# Drive delivered per presynaptic spike, in units of S.  A spike in this
# model lasts a single step, while the waves described for this network need
# roughly three time units of coupling current per spike to recruit
# neighbours; see the README for the calibration.
DEFAULT_COUPLING_GAIN = 3.0


@dataclass(frozen=True)
class IzhikevichParams:
    a: float = 0.02
    b: float = 0.2
    c_range: tuple = (-65.0, -50.0)
    d_range: tuple = (2.0, 8.0)
    v0: float = -65.0
    u0: float = -13.0
    spike_threshold: float = 30.0

    def sample_cd(self, seed: int, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-node reset parameters; node ``i`` gets the same values for any ``n > i``."""
        lo, hi = self.c_range
        c = lo + (hi - lo) * _rng.counter_uniforms(seed, n, _rng.PARAM_C)
        lo, hi = self.d_range
        d = lo + (hi - lo) * _rng.counter_uniforms(seed, n, _rng.PARAM_D)
        return c, d


@dataclass(frozen=True)
class NoiseParams:
    sigma2: float = 9.0

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")


@dataclass
class LayerState:
    """Mutable per-node state; ``t`` counts completed steps.

    Noise for step ``t`` is a pure function of ``(seed, t, node)``, so the
    seed and step counter are the entire random state.
    """

    v: np.ndarray
    u: np.ndarray
    c: np.ndarray
    d: np.ndarray
    alive: np.ndarray
    seed: int
    params: IzhikevichParams = field(default_factory=IzhikevichParams)
    t: int = 0
    spikes: np.ndarray = None

    def __post_init__(self):
        if self.spikes is None:
            self.spikes = np.zeros(len(self.v), dtype=bool)

    @property
    def n_nodes(self) -> int:
        return len(self.v)

    def copy(self) -> "LayerState":
        return LayerState(self.v.copy(), self.u.copy(), self.c.copy(), self.d.copy(),
                          self.alive.copy(), self.seed, self.params, self.t,
                          self.spikes.copy())

    def append_nodes(self, k: int) -> None:
        """Grow the layer by ``k`` rest-state nodes (used during network growth)."""
        n = self.n_nodes + k
        c, d = self.params.sample_cd(self.seed, n)
        self.v = np.concatenate([self.v, np.full(k, self.params.v0)])
        self.u = np.concatenate([self.u, np.full(k, self.params.u0)])
        self.c, self.d = c, d
        self.alive = np.concatenate([self.alive, np.ones(k, dtype=bool)])
        self.spikes = np.concatenate([self.spikes, np.zeros(k, dtype=bool)])


def init_layer_state(geom: LayerGeometry, params: IzhikevichParams | None = None,
                     seed: int = 0) -> LayerState:
    params = params or IzhikevichParams()
    n = geom.n_nodes
    if n < 1:
        raise ValueError("geometry is empty")
    c, d = params.sample_cd(seed, n)
    return LayerState(
        v=np.full(n, params.v0, dtype=float),
        u=np.full(n, params.u0, dtype=float),
        c=c, d=d, alive=geom.alive.copy(), seed=int(seed), params=params,
    )


def step(state: LayerState, S: SynapticMatrix | None, noise: NoiseParams,
         dt: float = 1.0, substeps: int = 2, gain: float = DEFAULT_COUPLING_GAIN,
         drive_buf: np.ndarray | None = None) -> LayerState:
    """Advance ``state`` in place by one step of length ``dt`` and return it.

    ``S=None`` means no intra-layer coupling.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = state.n_nodes
    if S is not None and S.n_nodes != n:
        raise ValueError(f"coupling has {S.n_nodes} nodes, state has {n}")
    p = state.params
    t_next = state.t + 1
    alive = state.alive

    current = np.zeros(n)
    fired_prev = np.flatnonzero(state.spikes)
    if S is not None and len(fired_prev):
        current += gain * S.drive(fired_prev, drive_buf)
    if noise.sigma2 > 0:
        # variance sigma2/dt held over dt gives sigma2 per unit time
        current += np.sqrt(noise.sigma2 / dt) * _rng.counter_normals(state.seed, t_next, n)

    v = state.v.copy()
    u = state.u
    h = dt / substeps
    thr = p.spike_threshold
    # A node that crosses the apex during a sub-step has spiked: it is held
    # at the apex for the rest of the step instead of following the
    # quadratic past it, which would feed huge values into u.
    crossed = np.zeros(n, dtype=bool)
    for _ in range(substeps):
        dv = h * (0.04 * v * v + 5.0 * v + 140.0 - u + current)
        v = np.where(crossed, v, v + dv)
        over = v > thr
        crossed |= over
        v[over] = thr
    u_new = u + dt * p.a * (p.b * v - u)

    if not (np.isfinite(v).all() and np.isfinite(u_new).all()):
        raise NumericOverflowError(t_next)

    fired = crossed & alive
    v[fired] = state.c[fired]
    u_new[fired] += state.d[fired]
    # ablated nodes stay frozen
    v[~alive] = state.v[~alive]
    u_new[~alive] = u[~alive]

    state.v = v
    state.u = u_new
    state.spikes = fired
    state.t = t_next
    return state


class SpikeTrace:
    """Spike raster stored as one packed bitset per step."""

    def __init__(self, n_nodes: int, bits: np.ndarray | None = None):
        self.n_nodes = int(n_nodes)
        self._nbytes = (self.n_nodes + 7) // 8
        self._rows: list[np.ndarray] = []
        if bits is not None:
            bits = np.asarray(bits, dtype=np.uint8).reshape(-1, self._nbytes)
            self._rows = [row.copy() for row in bits]

    @classmethod
    def from_dense(cls, raster) -> "SpikeTrace":
        raster = np.asarray(raster, dtype=bool)
        if raster.ndim != 2:
            raise ValueError("raster must be (steps, N)")
        tr = cls(raster.shape[1])
        for row in raster:
            tr.append(row)
        return tr

    def append(self, spikes: np.ndarray) -> None:
        if len(spikes) != self.n_nodes:
            raise ValueError("spike vector length mismatch")
        self._rows.append(np.packbits(np.asarray(spikes, dtype=bool)))

    @property
    def steps(self) -> int:
        return len(self._rows)

    def __len__(self) -> int:
        return self.steps

    def frame(self, t: int) -> np.ndarray:
        return np.unpackbits(self._rows[t], count=self.n_nodes).astype(bool)

    def __iter__(self):
        for t in range(self.steps):
            yield self.frame(t)

    def to_dense(self) -> np.ndarray:
        if not self._rows:
            return np.zeros((0, self.n_nodes), dtype=bool)
        return np.unpackbits(np.stack(self._rows), axis=1, count=self.n_nodes).astype(bool)

    def counts(self) -> np.ndarray:
        return np.array([int(np.unpackbits(r, count=self.n_nodes).sum()) for r in self._rows],
                        dtype=int)

    def events(self):
        """Yield ``(step, node_id)`` pairs in step order."""
        for t in range(self.steps):
            for i in np.flatnonzero(self.frame(t)):
                yield t, int(i)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpikeTrace):
            return NotImplemented
        return (self.n_nodes == other.n_nodes and self.steps == other.steps
                and all(np.array_equal(a, b) for a, b in zip(self._rows, other._rows)))

    # -- file formats ------------------------------------------------------

    MAGIC = b"NGRW"
    VERSION = 1

    def to_bytes(self) -> bytes:
        """16-byte header then the raster bitstream as alternating run lengths.

        Runs start with a (possibly empty) run of zeros; each length is an
        unsigned LEB128 varint.
        """
        header = struct.pack("<4sIII", self.MAGIC, self.VERSION, self.n_nodes, self.steps)
        flat = self.to_dense().ravel()
        return header + _encode_runs(flat)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SpikeTrace":
        if len(data) < 16:
            raise FormatError("raster file shorter than its 16-byte header", 0)
        magic, version, n, steps = struct.unpack("<4sIII", data[:16])
        if magic != cls.MAGIC:
            raise FormatError(f"bad raster magic {magic!r}", 0)
        if version != cls.VERSION:
            raise FormatError(f"unsupported raster version {version}", 4)
        flat = _decode_runs(data, 16, n * steps)
        return cls.from_dense(flat.reshape(steps, n)) if steps else cls(n)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "SpikeTrace":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_events_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("step,node_id\n")
            for t, i in self.events():
                fh.write(f"{t},{i}\n")


def _encode_runs(flat: np.ndarray) -> bytes:
    flat = np.asarray(flat, dtype=bool)
    if flat.size == 0:
        return b""
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    lengths = np.diff(bounds).tolist()
    if flat[0]:
        lengths = [0] + lengths
    out = bytearray()
    for n in lengths:
        while True:
            byte = n & 0x7F
            n >>= 7
            if n:
                out.append(byte | 0x80)
            else:
                out.append(byte)
                break
    return bytes(out)


def _decode_runs(data: bytes, offset: int, total: int) -> np.ndarray:
    out = np.zeros(total, dtype=bool)
    pos, val, i = 0, False, offset
    while i < len(data):
        n, shift = 0, 0
        start = i
        while True:
            if i >= len(data):
                raise FormatError("truncated varint in raster body", start)
            b = data[i]
            i += 1
            n |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                break
        if pos + n > total:
            raise FormatError("raster runs exceed declared size", start)
        if val:
            out[pos:pos + n] = True
        pos += n
        val = not val
    if pos != total:
        raise FormatError(f"raster body covers {pos} of {total} cells", len(data))
    return out


def run(state: LayerState, S: SynapticMatrix | None, noise: NoiseParams, steps: int,
        observer: Callable[[LayerState], None] | None = None, dt: float = 1.0,
        substeps: int = 2, gain: float = DEFAULT_COUPLING_GAIN) -> SpikeTrace:
    """Run ``steps`` steps, recording the raster; ``observer(state)`` after each."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    trace = SpikeTrace(state.n_nodes)
    buf = np.empty(state.n_nodes)
    for _ in range(steps):
        step(state, S, noise, dt=dt, substeps=substeps, gain=gain, drive_buf=buf)
        trace.append(state.spikes)
        if observer is not None:
            observer(state)
    return trace
