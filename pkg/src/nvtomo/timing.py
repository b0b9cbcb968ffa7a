"""Acquisition-time planner.

Per-point spectral acquisition times are fixed table entries for two
spectral resolutions; they are looked up, never scaled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType

# seconds per spectral point, keyed by method then by delta_f (Hz)
TIMING_TABLE = MappingProxyType({
    "xy8": MappingProxyType({1300.0: 586.0, 30000.0: 22.0}),
    "dqc": MappingProxyType({1300.0: 37.0, 30000.0: 1.3}),
    "enhanced": MappingProxyType({1300.0: 1.0, 30000.0: 0.036}),
})
METHODS = tuple(TIMING_TABLE)


@dataclass(frozen=True)
class TimeEstimate:
    total_seconds: float
    n_projections: int
    n_points: int
    per_point_seconds: float
    method: str
    table_delta_f_hz: float

    @property
    def minutes(self) -> float:
        return self.total_seconds / 60.0

    def breakdown(self) -> str:
        return (f"{self.n_projections} projections x {self.n_points} points x "
                f"{self.per_point_seconds:g} s/point ({self.method} @ {self.table_delta_f_hz:g} Hz) "
                f"= {self.total_seconds:g} s ({self.minutes:.1f} min)")


def per_point_seconds(method: str, delta_f_hz: float) -> tuple[float, float]:
    """Table entry for the tabulated resolution closest to ``delta_f_hz``."""
    if method not in TIMING_TABLE:
        raise ValueError(f"unknown acquisition method {method!r}; known: {', '.join(METHODS)}")
    column = min(TIMING_TABLE[method], key=lambda f: abs(f - delta_f_hz))
    return TIMING_TABLE[method][column], column


def estimate_time(n_projections: int, spread_hz: float, delta_f_hz: float, method: str = "enhanced") -> TimeEstimate:
    if n_projections < 1 or not spread_hz > 0 or not delta_f_hz > 0:
        raise ValueError("n_projections, spread and delta_f must be positive")
    seconds, column = per_point_seconds(method, delta_f_hz)
    n_points = max(1, math.ceil(spread_hz / delta_f_hz))
    return TimeEstimate(n_projections * n_points * seconds, int(n_projections), n_points, seconds, method, column)
