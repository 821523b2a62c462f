"""Wave detection, pool extraction, rate-model fixed points and scaling."""

from .fixed_points import (FixedPoint, RateTrace, StabilityReport, bump_count,
                           jacobian_stability, rate_fixed_points_bruteforce,
                           rate_fixed_points_iterative, reference_line_layout, robust_bump,
                           simulate_rate_model)
from .pools import Pool, extract_pools, pool_extents, tiling_coverage
from .scaling import ScalingRow, scaling_benchmark
from .waves import Wave, WaveStats, detect_waves, wave_stats

__all__ = [
    "FixedPoint", "RateTrace", "StabilityReport", "bump_count", "jacobian_stability",
    "rate_fixed_points_bruteforce", "rate_fixed_points_iterative", "reference_line_layout",
    "robust_bump", "simulate_rate_model", "Pool", "extract_pools", "pool_extents",
    "tiling_coverage", "ScalingRow", "scaling_benchmark", "Wave", "WaveStats",
    "detect_waves", "wave_stats",
]
