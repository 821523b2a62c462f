"""Run directories: manifest, run log and small export helpers."""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__

FIGURE_SUFFIXES = {".png", ".pdf", ".svg"}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(obj, path) -> None:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=True)
    Path(path).write_text(text + "\n")


def versions() -> dict:
    import matplotlib
    import numba
    import scipy
    return {
        "neurogrow": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "matplotlib": matplotlib.__version__,
    }


def write_manifest(out_dir, command: str, config_hash: str, seed: int, extra: dict | None = None) -> dict:
    """List every file in ``out_dir`` with its checksum.

    Figures are listed without checksums: renderer versions change their
    bytes without changing their content.  Volatile facts (versions,
    argv) live here and in ``run.log``, never in the data files, so data
    outputs are byte-identical across reruns.
    """
    out = Path(out_dir)
    outputs, figures = {}, []
    for p in sorted(out.rglob("*")):
        if not p.is_file() or p.name in ("manifest.json", "run.log"):
            continue
        rel = p.relative_to(out).as_posix()
        if p.suffix in FIGURE_SUFFIXES:
            figures.append(rel)
        else:
            outputs[rel] = sha256_file(p)
    manifest = {
        "command": command,
        "config_hash": config_hash,
        "seed": seed,
        "versions": versions(),
        "argv": sys.argv[1:],
        "outputs": outputs,
        "figures": figures,
    }
    if extra:
        manifest.update(extra)
    write_json(manifest, out / "manifest.json")
    return manifest


def run_logger(out_dir, name: str = "neurogrow", verbose: bool = True) -> logging.Logger:
    """Logger writing timestamped lines to ``run.log`` and, if verbose, stderr."""
    log = logging.getLogger(f"{name}.{Path(out_dir).resolve()}")
    log.setLevel(logging.INFO)
    log.propagate = False
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(message)s")
    fh = logging.FileHandler(Path(out_dir) / "run.log", mode="w")
    fh.setFormatter(fmt)
    log.addHandler(fh)
    if verbose:
        sh = logging.StreamHandler(sys.stderr)
        sh.setFormatter(fmt)
        log.addHandler(sh)
    return log


def close_logger(log: logging.Logger) -> None:
    for h in list(log.handlers):
        h.flush()
        h.close()
        log.removeHandler(h)
