"""Digit-classification check of the learned pooling layer.

Three kinds of first-layer weights are compared under the same pipeline:
``y = F(W1 x)``, ``y_fc = F(W2 y)`` with a fixed random ``W2``, and a
linear readout ``W3`` fitted in closed form by (ridge) least squares.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import _rng
from .errors import FormatError, SingularSystemError

KINDS = ("self-organized", "hand-crafted", "random")

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class Dataset:
    images: np.ndarray        # (T, N) in [0, 1]
    labels: np.ndarray        # (T,) ints 0..9
    split: str = "train"
    shape: tuple = (28, 28)

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, n: int) -> "Dataset":
        return Dataset(self.images[:n], self.labels[:n], self.split, self.shape)


def _read(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def parse_idx_images(data: bytes) -> tuple[np.ndarray, tuple]:
    if len(data) < 16:
        raise FormatError("image file shorter than its 16-byte header", len(data))
    magic, n, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IMAGE_MAGIC:
        raise FormatError(f"image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}", 0)
    need = 16 + n * rows * cols
    if len(data) < need:
        raise FormatError(f"image data truncated: need {need} bytes, found {len(data)}",
                          len(data))
    if len(data) > need:
        raise FormatError(f"{len(data) - need} trailing bytes after image data", need)
    px = np.frombuffer(data, dtype=np.uint8, offset=16).reshape(n, rows * cols)
    return px, (rows, cols)


def parse_idx_labels(data: bytes) -> np.ndarray:
    if len(data) < 8:
        raise FormatError("label file shorter than its 8-byte header", len(data))
    magic, n = struct.unpack(">II", data[:8])
    if magic != LABEL_MAGIC:
        raise FormatError(f"label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}", 0)
    need = 8 + n
    if len(data) < need:
        raise FormatError(f"label data truncated: need {need} bytes, found {len(data)}",
                          len(data))
    if len(data) > need:
        raise FormatError(f"{len(data) - need} trailing bytes after label data", need)
    lab = np.frombuffer(data, dtype=np.uint8, offset=8).astype(np.int64)
    bad = np.flatnonzero(lab > 9)
    if len(bad):
        raise FormatError(f"label {lab[bad[0]]} outside 0..9", 8 + int(bad[0]))
    return lab


def load_idx(images_path, labels_path, split: str = "train") -> Dataset:
    """Read an IDX image/label pair; pixels are scaled to [0, 1]."""
    px, shape = parse_idx_images(_read(images_path))
    lab = parse_idx_labels(_read(labels_path))
    if len(px) != len(lab):
        raise FormatError(f"{len(px)} images but {len(lab)} labels", 4)
    return Dataset(px.astype(float) / 255.0, lab, split, shape)


def find_mnist(directory=None) -> Path | None:
    """Directory holding the four standard files (plain or .gz).

    An explicit ``directory``, else ``$MNIST_DIR``, is the only place
    looked at when given; otherwise ``~/mnist`` and ``/root/mnist`` are tried.
    """
    explicit = directory or os.environ.get("MNIST_DIR")
    cands = [explicit] if explicit else [Path.home() / "mnist", "/root/mnist"]
    for c in cands:
        d = Path(c)
        if all(_resolve(d, f) for pair in MNIST_FILES.values() for f in pair):
            return d
    return None


def _resolve(d: Path, name: str) -> Path | None:
    for cand in (d / name, d / (name + ".gz")):
        if cand.is_file():
            return cand
    return None


def load_mnist(directory, n_train: int = 10_000, n_test: int = 1_000) -> tuple[Dataset, Dataset]:
    d = Path(directory)
    out = []
    for split, n in (("train", n_train), ("test", n_test)):
        img, lab = (_resolve(d, f) for f in MNIST_FILES[split])
        if img is None or lab is None:
            raise FileNotFoundError(f"MNIST {split} files not found in {d}")
        out.append(load_idx(img, lab, split).subset(n))
    return out[0], out[1]


# ---------------------------------------------------------------- W1 builders

def build_handcrafted(grid=(28, 28), pool: int = 4, stride: int = 4) -> np.ndarray:
    """Binary W1 with one unit per ``pool x pool`` patch on a ``stride`` lattice."""
    rows, cols = grid
    if pool < 1 or stride < 1 or pool > min(rows, cols):
        raise ValueError("pool must fit inside the grid")
    if (rows - pool) % stride or (cols - pool) % stride:
        raise ValueError(f"{pool}x{pool} pools with stride {stride} do not tile a {rows}x{cols} grid")
    W = []
    for a in range(0, rows - pool + 1, stride):
        for b in range(0, cols - pool + 1, stride):
            m = np.zeros((rows, cols))
            m[a:a + pool, b:b + pool] = 1.0
            W.append(m.ravel())
    return np.array(W)


def build_random(N: int, M: int, k: int, seed: int = 0) -> np.ndarray:
    """Binary W1 where each unit picks ``k`` distinct nodes uniformly at random."""
    if not 1 <= k <= N:
        raise ValueError("need 1 <= k <= N")
    rng = _rng.stream(seed, "random-w1")
    W = np.zeros((M, N))
    for j in range(M):
        W[j, rng.choice(N, size=k, replace=False)] = 1.0
    return W


def build_self_organized(grid=(28, 28), M: int = 49, steps: int = 200_000, seed: int = 0,
                         sim=None, init_scheme: str = "uniform-full") -> np.ndarray:
    """Learned (real-valued) W1 from self-organisation on a ``grid`` layer."""
    from .dynamics import init_layer_state
    from .growth import SimConfig
    from .plasticity import init_units, self_organize
    from .topology import build_grid_layer, build_synaptic_matrix

    sim = sim or SimConfig()
    geom = build_grid_layer(*grid)
    S = build_synaptic_matrix(geom, sim.topology)
    units = init_units(M, geom.n_nodes, seed, init_scheme, geom=geom, eta_learn=sim.eta_learn)
    state = init_layer_state(geom, sim.izhikevich, seed)
    self_organize(geom, S, sim.izhikevich, sim.noise, units, steps, seed, state=state,
                  gain=sim.gain, selection=sim.selection)
    return units.W1.copy()


# ---------------------------------------------------------------- pipeline

NONLINEARITIES = {
    "tanh": np.tanh,
    "clip": lambda z: np.clip(z, -1.0, 1.0),
}


@dataclass
class NetworkConfig:
    kind: str
    W1: np.ndarray                 # (M, N)
    W2: np.ndarray                 # (L, M)
    nonlinearity: str = "tanh"
    normalize_rows: bool = True

    @property
    def L(self) -> int:
        return self.W2.shape[0]

    def __post_init__(self):
        if self.W2.shape[1] != self.W1.shape[0]:
            raise ValueError("W2 columns must equal the number of W1 units")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")

    def effective_W1(self) -> np.ndarray:
        if not self.normalize_rows:
            return self.W1
        s = self.W1.sum(1, keepdims=True)
        s[s == 0] = 1.0
        return self.W1 / s


def random_W2(L: int, M: int, seed: int = 0) -> np.ndarray:
    """Fixed random fully connected layer, scaled so pre-activations are O(1)."""
    rng = _rng.stream(seed, "w2")
    return rng.standard_normal((L, M)) / np.sqrt(M)


def make_config(kind: str, W1: np.ndarray, L: int = 1000, w2_seed: int = 0,
                nonlinearity: str = "tanh", normalize_rows: bool = True) -> NetworkConfig:
    return NetworkConfig(kind, np.asarray(W1, float), random_W2(L, W1.shape[0], w2_seed),
                         nonlinearity, normalize_rows)


def featurize(cfg: NetworkConfig, x: np.ndarray) -> np.ndarray:
    """``F(W2 F(W1 x))`` for one image ``(N,)`` or a batch ``(T, N)``; output in [-1, 1]."""
    F = NONLINEARITIES[cfg.nonlinearity]
    x = np.asarray(x, dtype=float)
    y = F(x @ cfg.effective_W1().T)
    return F(y @ cfg.W2.T)


@dataclass
class ReadoutWeights:
    W3: np.ndarray            # (10, L)
    ridge: float


def fit_readout(features: np.ndarray, targets: np.ndarray, ridge: float | None = None) -> ReadoutWeights:
    """Closed-form ``W3 = Y_T Y^T (Y Y^T + ridge I)^-1``.

    ``features`` is ``(L, T)`` and ``targets`` ``(C, T)``.  The default ridge
    is ``1e-6 * trace(Y Y^T) / L``.
    """
    Y = np.asarray(features, dtype=float)
    T = np.asarray(targets, dtype=float)
    if Y.ndim != 2 or T.ndim != 2 or Y.shape[1] != T.shape[1] or Y.shape[1] < 1:
        raise ValueError("features (L, T) and targets (C, T) must share T >= 1")
    L = Y.shape[0]
    G = Y @ Y.T
    if ridge is None:
        ridge = 1e-6 * float(np.trace(G)) / L
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    A = G + ridge * np.eye(L)
    if ridge == 0:
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
            raise SingularSystemError("Gram matrix is singular; use ridge > 0")
    try:
        W3 = np.linalg.solve(A, Y @ T.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"{exc}; use ridge > 0") from exc
    if not np.isfinite(W3).all():
        raise SingularSystemError("readout has non-finite entries; use ridge > 0")
    return ReadoutWeights(W3, float(ridge))


def one_hot(labels: np.ndarray, classes: int = 10) -> np.ndarray:
    """``(classes, T)`` one-hot targets."""
    return np.eye(classes)[np.asarray(labels, dtype=int)].T


def predict(readout: ReadoutWeights, features: np.ndarray) -> np.ndarray:
    return np.argmax(readout.W3 @ features, axis=0)


def evaluate(cfg: NetworkConfig, readout: ReadoutWeights, dataset: Dataset) -> float:
    feats = featurize(cfg, dataset.images).T
    return float(np.mean(predict(readout, feats) == dataset.labels))


def train_and_score(cfg: NetworkConfig, train: Dataset, test: Dataset,
                    ridge: float | None = None) -> tuple[float, float]:
    """Fit the readout on ``train``; return ``(train accuracy, test accuracy)``."""
    Ftr = featurize(cfg, train.images).T
    ro = fit_readout(Ftr, one_hot(train.labels), ridge)
    acc_tr = float(np.mean(predict(ro, Ftr) == train.labels))
    return acc_tr, evaluate(cfg, ro, test)


# ---------------------------------------------------------------- comparison

@dataclass
class ComparisonReport:
    kinds: list = field(default_factory=list)     # {kind, n, mean, std}
    pairs: list = field(default_factory=list)     # {pair, p_value}
    accuracies: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kinds": self.kinds, "pairs": self.pairs,
                "accuracies": {k: [float(a) for a in v] for k, v in self.accuracies.items()}}

    def kind(self, name: str) -> dict:
        return next(k for k in self.kinds if k["kind"] == name)

    def p_value(self, a: str, b: str) -> float:
        for p in self.pairs:
            if p["pair"] in ([a, b], [b, a]):
                return p["p_value"]
        raise KeyError((a, b))


def welch_p(a, b) -> float:
    """Two-sided unequal-variance t-test p-value with the degenerate cases pinned."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        return 1.0 if a[0] == b[0] else 0.0
    return float(stats.ttest_ind(a, b, equal_var=False).pvalue)


def comparison_report(accuracies: dict) -> ComparisonReport:
    """Per-kind mean/std (sample std) and pairwise Welch p-values."""
    names = [k for k in KINDS if k in accuracies] + [k for k in accuracies if k not in KINDS]
    rep = ComparisonReport(accuracies={k: list(accuracies[k]) for k in names})
    for k in names:
        a = np.asarray(accuracies[k], dtype=float)
        if len(a) < 2:
            raise ValueError(f"kind {k!r} needs at least two runs")
        rep.kinds.append({"kind": k, "n": int(len(a)), "mean": float(a.mean()),
                          "std": float(a.std(ddof=1))})
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            rep.pairs.append({"pair": [names[i], names[j]],
                              "p_value": welch_p(accuracies[names[i]], accuracies[names[j]])})
    return rep


def compare_kinds(configs: dict, train: Dataset, test: Dataset,
                  ridge: float | None = None) -> ComparisonReport:
    """``configs`` maps kind -> list of NetworkConfig (one per seed)."""
    acc = {}
    for kind, cfgs in configs.items():
        acc[kind] = [train_and_score(c, train, test, ridge)[1] for c in cfgs]
    return comparison_report(acc)
