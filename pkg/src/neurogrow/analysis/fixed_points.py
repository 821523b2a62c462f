"""Fixed points of the rate model ``tau dx/dt = -x + S F(x) + noise``.

``F`` is the Heaviside step with ``F(0) = 1``.  Off the kink a fixed point
is fully determined by its active set ``A``: ``x = S[:, A].sum(1)``, and it
is consistent when ``x_j >= 0`` exactly for ``j`` in ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _rng
from ..errors import NumericOverflowError, SizeLimitError
from ._geom import components

HEAVISIDE_CONVENTION = "F(0)=1; consistency x_j >= 0 <=> j in A"


def _matrix(S) -> np.ndarray:
    return np.asarray(S.weights if hasattr(S, "weights") else S, dtype=float)


def heaviside(x: np.ndarray) -> np.ndarray:
    return (x >= 0).astype(float)


def field_of(S: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Canonical evaluation of ``S F(x)`` for an active mask (fixed summation order)."""
    idx = np.flatnonzero(active)
    if len(idx) == 0:
        return np.zeros(S.shape[0])
    return S[:, idx].sum(1)


@dataclass
class FixedPoint:
    x: np.ndarray
    active_set: tuple
    residual: float
    stable: bool | None = None
    eigen_extent: float | None = None
    convention: str = HEAVISIDE_CONVENTION

    @property
    def strict(self) -> bool:
        """No coordinate sits on the Heaviside kink."""
        return bool(np.all(self.x != 0))

    def to_dict(self) -> dict:
        return {
            "active_set": [int(i) for i in self.active_set],
            "x": [float(v) for v in self.x],
            "residual": float(self.residual),
            "stable": self.stable,
            "eigen_extent": self.eigen_extent,
        }


def _make_point(S: np.ndarray, mask: np.ndarray) -> FixedPoint:
    x = field_of(S, mask)
    res = float(np.abs(x - field_of(S, x >= 0)).max()) if len(x) else 0.0
    return FixedPoint(x=x, active_set=tuple(int(i) for i in np.flatnonzero(mask)), residual=res)


def is_consistent(S: np.ndarray, mask: np.ndarray) -> bool:
    x = field_of(S, mask)
    return bool(np.array_equal(x >= 0, np.asarray(mask, dtype=bool)))


def rate_fixed_points_bruteforce(S, max_n: int = 16) -> list[FixedPoint]:
    """Every consistent active set, in increasing binary order of the set."""
    S = _matrix(S)
    n = S.shape[0]
    if n > max_n:
        raise SizeLimitError(f"{n} nodes exceeds brute-force limit {max_n}; "
                             "use rate_fixed_points_iterative")
    out = []
    chunk = 1 << min(n, 14)
    bits = np.arange(n, dtype=np.int64)
    for start in range(0, 1 << n, chunk):
        codes = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        B = ((codes[:, None] >> bits) & 1).astype(float)
        X = B @ S.T
        ok = np.all((X >= 0) == (B > 0), axis=1)
        for r in np.flatnonzero(ok):
            mask = B[r] > 0
            # re-check with the canonical summation so borderline sets agree
            if is_consistent(S, mask):
                out.append(_make_point(S, mask))
    return out


def rate_fixed_points_iterative(S, starts: int = 50, seed: int = 0, max_iter: int = 2000,
                                relax: float = 0.3, scale: float | None = None,
                                initial=None, return_stats: bool = False):
    """Fixed points reached from random initial activities.

    Each start follows the relaxed map ``x <- x + relax (S F(x) - x)``
    (the noiseless rate model on a time grid) until the active set stops
    changing, then snaps to the exact point for that set.  ``relax=1`` is
    the plain active-set map.  Starts that do not settle, or settle on an
    inconsistent set, are discarded and counted.  ``initial`` vectors, if
    given, are tried before the ``starts`` random ones.
    """
    if starts < 1:
        raise ValueError("starts must be >= 1")
    S = _matrix(S)
    n = S.shape[0]
    rng = _rng.stream(seed, "rate-starts")
    if scale is None:
        scale = float(np.abs(S).sum(1).max()) or 1.0
    found: dict[tuple, FixedPoint] = {}
    discarded = 0
    given = [np.asarray(v, dtype=float) for v in (initial if initial is not None else [])]
    total = len(given) + starts
    for k in range(total):
        x = given[k].copy() if k < len(given) else rng.normal(0.0, scale, n)
        mask = x >= 0
        settled = False
        unchanged = 0
        for _ in range(max_iter):
            x = x + relax * (field_of(S, mask) - x)
            new = x >= 0
            if np.array_equal(new, mask):
                unchanged += 1
                if unchanged >= 3 and is_consistent(S, mask):
                    settled = True
                    break
            else:
                unchanged = 0
            mask = new
        if not settled:
            discarded += 1
            continue
        fp = _make_point(S, mask)
        found.setdefault(fp.active_set, fp)
    pts = [found[k] for k in sorted(found, key=lambda a: (len(a), a))]
    if return_stats:
        return pts, {"starts": total, "discarded": discarded}
    return pts


@dataclass
class StabilityReport:
    eigenvalues: np.ndarray | None
    multiplicity: int
    stable: bool | None
    differentiable: bool
    tau_d: float

    @property
    def eigen_extent(self) -> float | None:
        return None if self.eigenvalues is None else float(self.eigenvalues.max())


def jacobian_stability(fp: FixedPoint, S=None, tau_d: float = 1.0) -> StabilityReport:
    """Linear stability from the analytic Jacobian.

    Away from the kink ``F'(x) = 0`` so ``J = -(1/tau_d) I`` exactly; with
    any ``x_i = 0`` the Jacobian does not exist and the verdict is left open.
    """
    if tau_d <= 0:
        raise ValueError("tau_d must be positive")
    n = len(fp.x)
    if not fp.strict:
        fp.stable, fp.eigen_extent = None, None
        return StabilityReport(None, 0, None, False, tau_d)
    lam = -1.0 / tau_d
    ev = np.full(n, lam)
    fp.stable, fp.eigen_extent = True, lam
    return StabilityReport(ev, n, True, True, tau_d)


def bump_count(active_set, adj) -> int:
    """Number of connected components of the active set under ``adj``."""
    return len(components(adj, np.asarray(active_set, dtype=int)))


def excitatory_graph(S):
    """Adjacency of positively coupled pairs (the local-excitation neighbourhood)."""
    from scipy.sparse import csr_matrix
    M = _matrix(S)
    return csr_matrix(M > 0)


@dataclass
class RateTrace:
    x_final: np.ndarray
    active_counts: np.ndarray
    centroids: np.ndarray          # dominant-component centroid per step (nan if silent)
    transitions: int
    transition_steps: list = field(default_factory=list)


def simulate_rate_model(S, tau_d: float = 1.0, sigma2: float = 0.0, steps: int = 10_000,
                        seed: int = 0, dt: float = 0.5, x0: np.ndarray | None = None,
                        positions: np.ndarray | None = None, jump: float = 1.0) -> RateTrace:
    """Euler-Maruyama integration with a bump-transition counter.

    A transition is counted when the centroid of the largest active
    component moves at least ``jump`` away from where the previous
    transition left it.  Without ``positions`` nodes are placed at their
    index on a line.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if tau_d <= 0 or dt <= 0:
        raise ValueError("tau_d and dt must be positive")
    M = _matrix(S)
    n = M.shape[0]
    adj = excitatory_graph(M)
    pos = np.arange(n, dtype=float)[:, None] if positions is None else np.asarray(positions, float)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    amp = np.sqrt(sigma2 * dt) / tau_d
    counts = np.zeros(steps, dtype=int)
    cents = np.full((steps, pos.shape[1]), np.nan)
    ref = None
    transitions, when = 0, []
    for t in range(steps):
        drift = -x + field_of(M, x >= 0)
        x = x + (dt / tau_d) * drift
        if sigma2 > 0:
            x = x + amp * _rng.counter_normals(seed, t + 1, n, _rng.NOISE_RATE)
        if not np.isfinite(x).all():
            raise NumericOverflowError(t + 1, "rate activity")
        active = np.flatnonzero(x >= 0)
        counts[t] = len(active)
        if len(active) == 0:
            continue
        comps = components(adj, active)
        dom = max(comps, key=len)
        c = pos[dom].mean(0)
        cents[t] = c
        if ref is None:
            ref = c
        elif np.sqrt(((c - ref) ** 2).sum()) >= jump:
            transitions += 1
            when.append(t + 1)
            ref = c
    return RateTrace(x, counts, cents, transitions, when)


def reference_line_layout(length: int = 30, width: int = 3):
    """The strip used for noise experiments: ``width`` rows of ``length`` nodes.

    A single row is too sparse to hold a bump with a useful margin under the
    default coupling; three rows give bumps whose weakest node sits about
    3 units from the kink.
    """
    from ..topology import build_grid_layer
    return build_grid_layer(width, length)


def robust_bump(S, starts: int = 300, seed: int = 0) -> FixedPoint | None:
    """The single-bump fixed point whose closest coordinate to the kink is farthest."""
    M = _matrix(S)
    adj = excitatory_graph(M)
    pts = rate_fixed_points_iterative(M, starts, seed)
    bumps = [p for p in pts
             if 0 < len(p.active_set) < M.shape[0] and bump_count(p.active_set, adj) == 1]
    if not bumps:
        return None
    return max(bumps, key=lambda p: (float(np.abs(p.x).min()), [-i for i in p.active_set]))
