"""Random streams.

Per-step noise comes from a counter-based generator (Philox) keyed by
``(seed, step)`` with a domain tag in the counter, so the value seen by node
``i`` at step ``t`` never depends on how many other nodes exist or in which
order they are evaluated.  Everything else uses ordinary seeded generators
split by purpose.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1

# domain tags for counter-based streams
NOISE_LAYER = 1
NOISE_RATE = 2
PARAM_C = 3
PARAM_D = 4


def counter_normals(seed: int, step: int, n: int, domain: int = NOISE_LAYER) -> np.ndarray:
    """``n`` standard normals for ``(seed, step)``; prefix-stable in ``n``."""
    key = (int(seed) & _MASK64) | ((int(step) & _MASK64) << 64)
    bitgen = np.random.Philox(key=key, counter=[0, 0, 0, int(domain)])
    return np.random.Generator(bitgen).standard_normal(n)


def counter_uniforms(seed: int, n: int, domain: int, step: int = 0) -> np.ndarray:
    """``n`` uniforms on [0, 1) for ``(seed, step, domain)``; prefix-stable in ``n``."""
    key = (int(seed) & _MASK64) | ((int(step) & _MASK64) << 64)
    bitgen = np.random.Philox(key=key, counter=[0, 0, 0, int(domain)])
    return np.random.Generator(bitgen).random(n)


def stream(seed: int, purpose: str) -> np.random.Generator:
    """Independent generator for a named purpose (weights, parameters, ...)."""
    tag = zlib.crc32(purpose.encode())
    return np.random.default_rng(np.random.SeedSequence([int(seed) & _MASK64, tag]))
