"""Layer-I geometry and intra-layer coupling.

Nodes live on an arbitrary 2-D scaffold.  Coupling between two nodes is a
pure function of their distance: constant excitation ``l`` inside ``r_e``, a
dead zone up to ``r_i`` and exponentially decaying inhibition beyond.

Two storage strategies share one numba kernel so they agree bit for bit:

* dense — the full N x N matrix, used below ``dense_threshold`` nodes;
* on-the-fly — coupling values are recomputed from positions whenever a
  drive is needed, keeping memory O(N) for large layers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy.sparse import csr_matrix
from scipy.spatial import cKDTree

DENSE_THRESHOLD = 5000


@dataclass(frozen=True)
class TopologyParams:
    r_e: float = 2.0
    r_i: float = 4.0
    l: float = 5.0
    m: float = -2.0
    decay_len: float = 10.0

    def validate(self) -> None:
        if not (0 < self.r_e < self.r_i):
            raise ValueError(f"need 0 < r_e < r_i, got r_e={self.r_e}, r_i={self.r_i}")
        if self.l <= 0:
            raise ValueError("excitation weight l must be positive")
        if self.m >= 0:
            raise ValueError("inhibition magnitude m must be negative")
        if self.decay_len <= 0:
            raise ValueError("decay_len must be positive")


@dataclass
class LayerGeometry:
    """Positions of layer-I nodes plus an alive mask.

    Ablated nodes keep their index so maps from before and after an
    ablation line up.
    """

    positions: np.ndarray
    alive: np.ndarray = None
    scaffold_id: str = "custom"

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("positions must have shape (N, 2)")
        if pos.shape[0] < 1:
            raise ValueError("a geometry needs at least one node")
        if len(np.unique(pos, axis=0)) != len(pos):
            raise ValueError("node positions must be distinct")
        self.positions = np.ascontiguousarray(pos)
        if self.alive is None:
            self.alive = np.ones(len(pos), dtype=bool)
        else:
            self.alive = np.asarray(self.alive, dtype=bool).copy()
            if self.alive.shape != (len(pos),):
                raise ValueError("alive mask length must match node count")

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def n_alive(self) -> int:
        return int(self.alive.sum())

    def distances(self) -> np.ndarray:
        """Full pairwise distance matrix (symmetric, exact zeros on the diagonal)."""
        return _distance_matrix(self.positions)

    def neighbor_graph(self, radius: float, alive_only: bool = True) -> csr_matrix:
        """Sparse adjacency of node pairs within ``radius`` (self-loops excluded)."""
        tree = cKDTree(self.positions)
        pairs = tree.query_pairs(radius * (1 + 1e-12), output_type="ndarray")
        if len(pairs):
            dx = self.positions[pairs[:, 0]] - self.positions[pairs[:, 1]]
            keep = np.sqrt((dx * dx).sum(1)) <= radius
            pairs = pairs[keep]
        if alive_only and len(pairs):
            keep = self.alive[pairs[:, 0]] & self.alive[pairs[:, 1]]
            pairs = pairs[keep]
        n = self.n_nodes
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]]) if len(pairs) else np.zeros(0, int)
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]]) if len(pairs) else np.zeros(0, int)
        return csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))

    def copy(self) -> "LayerGeometry":
        return LayerGeometry(self.positions.copy(), self.alive.copy(), self.scaffold_id)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("id,x,y,alive\n")
            for i, (x, y) in enumerate(self.positions):
                fh.write(f"{i},{float(x)!r},{float(y)!r},{int(self.alive[i])}\n")


# ---------------------------------------------------------------- builders

def build_grid_layer(rows: int, cols: int, spacing: float = 1.0,
                     jitter: float = 0.0, seed: int = 0) -> LayerGeometry:
    """Regular ``rows x cols`` lattice; node ``r*cols + c`` sits at ``(c, r)*spacing``.

    ``jitter`` (fraction of spacing, < 0.5) perturbs every node uniformly,
    which keeps positions distinct.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if not 0 <= jitter < 0.5:
        raise ValueError("jitter must lie in [0, 0.5)")
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    pos = np.column_stack([c.ravel(), r.ravel()]).astype(float) * spacing
    sid = f"grid{rows}x{cols}"
    if jitter > 0:
        rng = np.random.default_rng(seed)
        pos = pos + rng.uniform(-jitter, jitter, pos.shape) * spacing
        sid += f"-jitter{jitter:g}"
    return LayerGeometry(pos, scaffold_id=sid)


def build_geometry_from_mask(mask, spacing: float = 1.0) -> LayerGeometry:
    """One node per true cell of a 2-D boolean grid (row-major ordering)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask must be two-dimensional")
    if not mask.any():
        raise ValueError("mask has no true cells")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    r, c = np.nonzero(mask)
    pos = np.column_stack([c, r]).astype(float) * spacing
    rows, cols = mask.shape
    if mask.all():
        sid = f"grid{rows}x{cols}"
    else:
        sid = f"mask{rows}x{cols}"
    return LayerGeometry(pos, scaffold_id=sid)


def annulus_mask(outer: float, inner: float = 0.0, spacing: float = 1.0) -> np.ndarray:
    """Mask of lattice points with ``inner < r <= outer`` around the centre cell."""
    if outer <= inner or outer <= 0:
        raise ValueError("need outer > inner >= 0")
    k = int(math.floor(outer / spacing))
    idx = np.arange(-k, k + 1) * spacing
    xx, yy = np.meshgrid(idx, idx)
    rr = np.sqrt(xx * xx + yy * yy)
    mask = (rr <= outer) & (rr > inner)
    if inner == 0:
        mask[k, k] = True
    return mask


def disk_mask(radius: float, spacing: float = 1.0) -> np.ndarray:
    return annulus_mask(radius, 0.0, spacing)


def load_mask(path) -> np.ndarray:
    """Read a mask from a ``#``/``.`` text grid or a JSON array of 0/1 rows."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("["):
        data = json.loads(text)
        arr = np.asarray(data)
        if arr.ndim != 2 or not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{path}: expected a rectangular array of 0/1")
        return arr.astype(bool)
    lines = [ln.rstrip("\n\r") for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty mask")
    width = max(len(ln) for ln in lines)
    mask = np.zeros((len(lines), width), dtype=bool)
    for i, ln in enumerate(lines):
        bad = set(ln) - {"#", "."}
        if bad:
            raise ValueError(f"{path}: line {i + 1} has characters other than '#' and '.'")
        mask[i, : len(ln)] = [ch == "#" for ch in ln]
    return mask


def save_mask(mask, path) -> None:
    mask = np.asarray(mask, dtype=bool)
    with open(path, "w") as fh:
        for row in mask:
            fh.write("".join("#" if v else "." for v in row) + "\n")


def ablate_nodes(geom: LayerGeometry, ids) -> LayerGeometry:
    """Return a copy of ``geom`` with ``ids`` marked dead (idempotent)."""
    ids = np.asarray(sorted(set(int(i) for i in ids)), dtype=int)
    if len(ids) and (ids.min() < 0 or ids.max() >= geom.n_nodes):
        raise ValueError(f"node ids must lie in [0, {geom.n_nodes})")
    out = geom.copy()
    out.alive[ids] = False
    return out


def contiguous_block(geom: LayerGeometry, center, count: int) -> np.ndarray:
    """The ``count`` alive nodes nearest to ``center`` (a compact, contiguous patch)."""
    center = np.asarray(center, dtype=float)
    d = np.sqrt(((geom.positions - center) ** 2).sum(1))
    d[~geom.alive] = np.inf
    order = np.lexsort((np.arange(geom.n_nodes), d))
    return np.sort(order[:count])


# ------------------------------------------------------------------ kernel

def coupling_value(d: float, params: TopologyParams) -> float:
    """Reference scalar coupling for a pair at distance ``d > 0``."""
    if d <= params.r_e:
        return params.l
    if d < params.r_i:
        return 0.0
    return params.m * math.exp(-d / params.decay_len)


@numba.njit(cache=True)
def _kernel(d, r_e, r_i, l, m, decay):
    if d <= r_e:
        return l
    if d < r_i:
        return 0.0
    return m * math.exp(-d / decay)


@numba.njit(cache=True)
def _distance_matrix(pos):
    n = pos.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            d = math.sqrt(dx * dx + dy * dy)
            out[i, j] = d
            out[j, i] = d
    return out


@numba.njit(cache=True)
def _dense_matrix(pos, alive, r_e, r_i, l, m, decay):
    n = pos.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        if not alive[i]:
            continue
        for j in range(i + 1, n):
            if not alive[j]:
                continue
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            s = _kernel(math.sqrt(dx * dx + dy * dy), r_e, r_i, l, m, decay)
            out[i, j] = s
            out[j, i] = s
    return out


@numba.njit(cache=True)
def _drive_dense(S, fired_idx, out):
    # S is symmetric, so summing rows of the fired nodes is the column sum
    out[:] = 0.0
    n = S.shape[0]
    for k in range(fired_idx.shape[0]):
        j = fired_idx[k]
        for i in range(n):
            out[i] += S[j, i]


@numba.njit(cache=True, parallel=True)
def _drive_kernel(pos, alive, fired_idx, r_e, r_i, l, m, decay, out):
    n = pos.shape[0]
    for i in numba.prange(n):
        acc = 0.0
        if alive[i]:
            for k in range(fired_idx.shape[0]):
                j = fired_idx[k]
                if j == i or not alive[j]:
                    acc += 0.0
                    continue
                dx = pos[j, 0] - pos[i, 0]
                dy = pos[j, 1] - pos[i, 1]
                acc += _kernel(math.sqrt(dx * dx + dy * dy), r_e, r_i, l, m, decay)
        out[i] = acc


@dataclass
class SynapticMatrix:
    """Intra-layer coupling S for a geometry.

    ``weights`` is materialised only for the dense strategy (or on explicit
    request); :meth:`drive` works for both.
    """

    geom: LayerGeometry
    params: TopologyParams
    dense: bool = True
    _weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.geom.n_nodes

    @property
    def weights(self) -> np.ndarray:
        if self._weights is None:
            p = self.params
            self._weights = _dense_matrix(self.geom.positions, self.geom.alive,
                                          p.r_e, p.r_i, p.l, p.m, p.decay_len)
        return self._weights

    def drive(self, fired_idx: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Total coupling ``sum_j S[i, j]`` over fired nodes ``j`` for every ``i``."""
        if out is None:
            out = np.empty(self.n_nodes)
        fired_idx = np.ascontiguousarray(fired_idx, dtype=np.int64)
        if self.dense:
            _drive_dense(self.weights, fired_idx, out)
        else:
            p = self.params
            _drive_kernel(self.geom.positions, self.geom.alive, fired_idx,
                          p.r_e, p.r_i, p.l, p.m, p.decay_len, out)
        return out


def build_synaptic_matrix(geom: LayerGeometry, params: TopologyParams | None = None,
                          dense_threshold: int = DENSE_THRESHOLD) -> SynapticMatrix:
    """Coupling matrix for ``geom``; dense below ``dense_threshold`` nodes."""
    params = params or TopologyParams()
    params.validate()
    if geom.n_nodes < 1:
        raise ValueError("geometry is empty")
    dense = geom.n_nodes <= dense_threshold
    sm = SynapticMatrix(geom, params, dense=dense)
    if dense:
        sm.weights  # materialise eagerly
    return sm
