"""Grow a two-layer spiking network and self-organize its pooling layer."""

import os

# the TBB layer bundled with some numba installs is too old; workqueue is
# always available and deterministic for our prange loops
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"
