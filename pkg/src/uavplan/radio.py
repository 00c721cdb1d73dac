"""Link budget helpers and coverage maps from base-station layouts.

All power quantities are linear (watts, power ratios) unless a name ends in
``_db``. Distances are meters, frequencies hertz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .grid import Cell, GridMap

# Empirical offset of the free-space path-loss formula, in dB.
PATH_LOSS_OFFSET_DB = 147.55
BOLTZMANN = 1.380649e-23


class NoCoverageError(ValueError):
    """The altitude gap alone exceeds the link budget."""


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0:
        raise ValueError("linear power ratio must be positive")
    return 10.0 * math.log10(value)


def thermal_noise_w(bandwidth_hz: float, temperature_k: float = 290.0) -> float:
    """kTB noise power."""
    return BOLTZMANN * temperature_k * bandwidth_hz


def path_loss_db(distance: float, carrier_freq: float) -> float:
    """Path loss 20 log10(d) + 20 log10(f) - 147.55 dB."""
    if distance <= 0 or carrier_freq <= 0:
        raise ValueError("distance and carrier frequency must be positive")
    return 20.0 * math.log10(distance) + 20.0 * math.log10(carrier_freq) - PATH_LOSS_OFFSET_DB


def reference_gain(carrier_freq: float) -> float:
    """Channel power gain at 1 m implied by :func:`path_loss_db`."""
    return 10.0 ** (-path_loss_db(1.0, carrier_freq) / 10.0)


@dataclass(frozen=True)
class RadioParams:
    tx_power: float
    channel_gain_ref: float
    noise_power: float
    snr_min: float
    uav_altitude: float
    bs_altitude: float
    carrier_freq: float = 2e9

    def __post_init__(self):
        for name in ("tx_power", "channel_gain_ref", "noise_power", "snr_min", "carrier_freq"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.uav_altitude >= self.bs_altitude >= 0:
            raise ValueError("need uav_altitude >= bs_altitude >= 0")

    @property
    def reference_snr(self) -> float:
        return self.tx_power * self.channel_gain_ref / self.noise_power


def coverage_radius(params: RadioParams) -> float:
    """Largest horizontal distance at which the SNR still meets ``snr_min``.

    ``sqrt(snr_ref / snr_min - (H_uav - H_bs)**2)``; raises
    :class:`NoCoverageError` when the radicand is negative.
    """
    gap = params.uav_altitude - params.bs_altitude
    radicand = params.reference_snr / params.snr_min - gap * gap
    if radicand < 0:
        raise NoCoverageError(
            f"no horizontal coverage: altitude gap {gap} m exceeds the link budget")
    return math.sqrt(radicand)


@dataclass(frozen=True)
class BaseStation:
    x: float
    y: float
    altitude: float
    kind: str = "GBS"

    def __post_init__(self):
        if self.kind not in ("GBS", "ABS"):
            raise ValueError(f"unknown station kind {self.kind!r}")


@dataclass(frozen=True)
class FeasibilityMap:
    feasible: np.ndarray  # bool, shape (rows, cols)
    no_stations: bool = False

    @property
    def count(self) -> int:
        return int(self.feasible.sum())


def _check_altitudes(stations: Sequence[BaseStation]):
    for kind in ("GBS", "ABS"):
        alts = {s.altitude for s in stations if s.kind == kind}
        if len(alts) > 1:
            raise ValueError(f"all {kind} stations must share one altitude, got {sorted(alts)}")


def cell_centers(rows: int, cols: int, cell_size: float) -> tuple[np.ndarray, np.ndarray]:
    """Ground coordinates of cell centers; x grows with column, y with row."""
    ys, xs = np.mgrid[0:rows, 0:cols]
    return (xs + 0.5) * cell_size, (ys + 0.5) * cell_size


def feasibility_map(grid_dims: tuple[int, int], cell_size: float,
                    stations: Sequence[BaseStation], params: RadioParams,
                    uav_altitude: Optional[float] = None) -> FeasibilityMap:
    """Cells whose center lies within some station's coverage radius.

    Each station is evaluated with its own altitude substituted into
    ``params``; the boundary counts as covered.
    """
    rows, cols = grid_dims
    if rows < 1 or cols < 1:
        raise ValueError("grid must have at least one cell")
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    if uav_altitude is not None:
        params = replace(params, uav_altitude=uav_altitude)
    feasible = np.zeros((rows, cols), dtype=bool)
    if not stations:
        return FeasibilityMap(feasible, no_stations=True)
    _check_altitudes(stations)

    radii: dict[float, float] = {}
    xs, ys = cell_centers(rows, cols, cell_size)
    for s in stations:
        if s.altitude not in radii:
            radii[s.altitude] = coverage_radius(replace(params, bs_altitude=s.altitude))
        radius = radii[s.altitude]
        feasible |= np.hypot(xs - s.x, ys - s.y) <= radius
    return FeasibilityMap(feasible)


def coverage_grid(feasibility: FeasibilityMap, start: Cell, destination: Cell,
                  stations: Iterable[Cell] = ()) -> GridMap:
    """Planner map: infeasible cells become no-fly, plus start/destination/PS cells."""
    rows, cols = feasibility.feasible.shape
    nofly = [(r, c) for r in range(rows) for c in range(cols) if not feasibility.feasible[r, c]]
    ps = list(stations)
    blocked = [cell for cell in [start, destination, *ps] if not feasibility.feasible[cell]]
    if blocked:
        raise ValueError(f"cells {blocked} lie outside radio coverage")
    return GridMap.from_layout(rows, cols, start, destination, stations=ps, nofly=nofly)


def parse_stations(text: str, gbs_altitude: float, abs_altitude: float) -> list[BaseStation]:
    """Read ``kind x_m y_m`` lines; ``#`` lines are comments."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'kind x_m y_m', got {raw!r}")
        kind = parts[0].upper()
        if kind not in ("GBS", "ABS"):
            raise ValueError(f"line {lineno}: unknown station kind {parts[0]!r}")
        try:
            x, y = float(parts[1]), float(parts[2])
        except ValueError:
            raise ValueError(f"line {lineno}: bad coordinates in {raw!r}") from None
        alt = gbs_altitude if kind == "GBS" else abs_altitude
        out.append(BaseStation(x, y, alt, kind))
    return out


def read_stations(path, gbs_altitude: float, abs_altitude: float) -> list[BaseStation]:
    return parse_stations(Path(path).read_text(encoding="utf-8"), gbs_altitude, abs_altitude)

