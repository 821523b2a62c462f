"""Experiment configuration: one YAML document with a block per module.

Every field has a default, so an empty file (or no file) gives the
standard experiment.  ``load -> save -> load`` round-trips exactly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class TopologyConfig:
    rows: int = 30
    cols: int = 30
    spacing: float = 1.0
    jitter: float = 0.0
    mask_file: str | None = None
    r_e: float = 2.0
    r_i: float = 4.0
    l: float = 5.0
    m: float = -2.0
    decay_len: float = 10.0
    dense_threshold: int = 5000


@dataclass
class DynamicsConfig:
    sigma2: float = 9.0
    dt: float = 1.0
    substeps: int = 2
    coupling_gain: float = 3.0
    steps: int = 5000
    a: float = 0.02
    b: float = 0.2
    c_range: tuple = (-65.0, -50.0)
    d_range: tuple = (2.0, 8.0)
    v0: float = -65.0
    u0: float = -13.0
    spike_threshold: float = 30.0


@dataclass
class PlasticityConfig:
    units: int = 36
    steps: int = 50_000
    eta_learn: float = 0.01
    init_scheme: str = "uniform-full"
    c0: float = 0.0
    selection: str = "thresholded"
    window: int = 1000
    z_min: int = 200
    bias_floor: float = 0.3


@dataclass
class AnalysisConfig:
    pool_frac: float = 0.2
    max_pool_fraction: float = 0.25
    tiling_target: float = 0.9
    coverage_every: int = 1000
    wave_k: int = 5
    wave_min_size: int = 3
    wave_window: int = 2000
    ablate_fraction: float = 0.05
    ablate_file: str | None = None
    post_ablation_steps: int = 30_000
    inhibition_radii: tuple = ()
    sweep_seeds: tuple = (0, 1, 2)
    fp_nodes: int = 10
    fp_layouts: int = 1
    fp_box: float = 8.0
    fp_starts: int = 200
    tau_d: float = 1.0
    rate_sigma2: tuple = (0.0, 2.0, 9.0)
    rate_steps: int = 10_000
    rate_dt: float = 0.5
    rate_seeds: tuple = (0, 1, 2)
    scaling_sizes: tuple = (1500, 10000)
    scaling_nodes_per_unit: int = 25
    scaling_target: float = 0.9
    scaling_step_cap: int = 200_000
    scaling_check_every: int = 1000


@dataclass
class GrowthConfig:
    hcd_age: int = 25
    hf_max: int = 40
    r_hdiv: float = 1.0
    r_vdiv: float = 1.0
    thresh_hdiv: int = 3
    scaffold: str = "rect"
    scaffold_size: tuple = (30.0, 30.0)
    scaffold_file: str | None = None
    placement: str = "disk"
    daughter_room: bool = True
    interleave: int = 10
    window: int = 50
    max_steps: int = 1000
    post_steps: int = 0


@dataclass
class EvalConfig:
    mnist_dir: str | None = None
    n_train: int = 10_000
    n_test: int = 1_000
    seeds: int = 5
    kinds: tuple = ("self-organized", "hand-crafted", "random")
    hidden: int = 1000
    pool: int = 4
    stride: int = 4
    nonlinearity: str = "tanh"
    ridge: float | None = None
    so_steps: int = 200_000


@dataclass
class ExperimentConfig:
    seed: int = 0
    out: str = "runs"
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    plasticity: PlasticityConfig = field(default_factory=PlasticityConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    growth: GrowthConfig = field(default_factory=GrowthConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    @classmethod
    def from_dict(cls, data: dict | None) -> "ExperimentConfig":
        return _build(cls, data or {}, "")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, f in fields.items():
        if name not in data:
            continue
        val = data[name]
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        key = f"{where}.{name}" if where else name
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), val, key)
        else:
            kwargs[name] = _coerce(val, default, key)
    return cls(**kwargs)


def _number(v):
    if isinstance(v, str):
        try:
            return float(v) if any(ch in v for ch in ".eE") else int(v)
        except ValueError:
            return v
    return v


def _coerce(val, default, key):
    if val is None or default is None:
        return val
    if isinstance(default, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"{key}: expected true/false, got {val!r}")
        return val
    if isinstance(default, int):
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{key}: expected an integer, got {val!r}")
        return val
    if isinstance(default, float):
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {val!r}")
        return float(val)
    if isinstance(default, tuple):
        if isinstance(val, str):
            val = [v.strip() for v in val.split(",") if v.strip()]
        if not isinstance(val, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {val!r}")
        proto = default[0] if default else None
        if proto is not None and not isinstance(proto, str):
            return tuple(_coerce(v, proto, key) for v in val)
        if proto is None:
            return tuple(_number(v) for v in val)
        return tuple(val)
    if isinstance(default, str):
        if not isinstance(val, str):
            raise ConfigError(f"{key}: expected a string, got {val!r}")
        return val
    return val
