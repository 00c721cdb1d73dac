"""Battery model and post-hoc mission validation of a policy."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

from .grid import Action, Cell, CellKind, GridMap, neighbor

CELL_SIZE_M = 800.0
SPEED_MPS = 800.0 / 60.0


class Outcome(enum.Enum):
    SUCCESS = "Success"
    DEPLETED = "Depleted"
    LOOP = "Loop"
    NOFLY_VIOLATION = "NoFlyViolation"

    @property
    def exit_status(self) -> int:
        return _EXIT[self]


_EXIT = {Outcome.SUCCESS: 0, Outcome.DEPLETED: 2, Outcome.LOOP: 3, Outcome.NOFLY_VIOLATION: 4}


class PolicyError(ValueError):
    """The policy has no action for a cell the flight reached."""


@dataclass(frozen=True)
class BatteryModel:
    capacity: float = 1.0
    per_step_cost: float = 0.1
    min_reserve: float = 0.0

    def __post_init__(self):
        if not self.capacity > 0:
            raise ValueError("capacity must be positive")
        if not 0 < self.per_step_cost <= self.capacity:
            raise ValueError("per_step_cost must lie in (0, capacity]")
        if not 0 <= self.min_reserve < self.capacity:
            raise ValueError("min_reserve must lie in [0, capacity)")

    @property
    def range_steps(self) -> int:
        """Moves possible on one full charge while keeping ``min_reserve``."""
        # small slack so 1.0 / 0.1 counts as 10 despite binary rounding
        return math.floor((self.capacity - self.min_reserve) / self.per_step_cost + 1e-9)

    def level(self, steps_since_charge: int) -> float:
        return max(self.capacity - steps_since_charge * self.per_step_cost, 0.0)

    def as_dict(self) -> dict:
        return asdict(self)


def mission_time(total_steps: int, cell_size: float = CELL_SIZE_M, speed: float = SPEED_MPS) -> float:
    """Flight time in seconds for ``total_steps`` cell-to-cell moves."""
    if speed <= 0:
        raise ValueError("speed must be positive")
    return total_steps * cell_size / speed


@dataclass
class EnergyTrace:
    steps: list[tuple[Cell, float]]
    outcome: Outcome
    min_battery: float
    total_steps: int
    mission_time: float
    nofly_visits: int = 0
    segments: list[int] = field(default_factory=list)

    @property
    def cells(self) -> list[Cell]:
        return [cell for cell, _ in self.steps]

    def to_csv(self) -> str:
        lines = ["step,row,col,battery"]
        for i, ((r, c), level) in enumerate(self.steps):
            lines.append(f"{i},{r},{c},{level:.6g}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        return (f"outcome={self.outcome.value} steps={self.total_steps} "
                f"min_battery={self.min_battery:.6g} mission_time_s={self.mission_time:.6g} "
                f"nofly_visits={self.nofly_visits}")


def simulate_policy(grid: GridMap, policy: Mapping[Cell, Action] | object, battery: BatteryModel,
                    start: Cell | None = None, cell_size: float = CELL_SIZE_M,
                    speed: float = SPEED_MPS) -> EnergyTrace:
    """Fly ``policy`` from ``start`` with a full battery and classify the result.

    ``steps`` holds ``(cell, battery_after_arrival)`` including the start.
    Each move needs one charge quantum above ``min_reserve``; landing on any
    station-bearing cell restores full charge. Revisiting a cell within one
    recharge-free segment, or exceeding ``rows * cols * range`` moves, is a
    loop. No-fly visits are counted and reported as ``NoFlyViolation`` when the
    flight otherwise succeeds.
    """
    start = grid.start if start is None else start
    if not grid.in_bounds(start):
        raise ValueError(f"start {start} out of bounds")
    if grid.kind(start) is CellKind.NOFLY:
        raise ValueError(f"start {start} is a no-fly cell")
    action_of = getattr(policy, "action_of", policy)
    rng_steps = battery.range_steps
    cap = grid.rows * grid.cols * max(rng_steps, 1)

    cell = start
    since_charge = 0
    segment = {cell}
    steps = [(cell, battery.capacity)]
    segments = []
    nofly = 0
    outcome = None
    while cell != grid.destination:
        if len(steps) - 1 >= cap:
            outcome = Outcome.LOOP
            break
        if since_charge + 1 > rng_steps:
            outcome = Outcome.DEPLETED
            break
        try:
            action = action_of[cell]
        except KeyError:
            raise PolicyError(f"policy has no action for cell {cell}") from None
        nxt = neighbor(cell, action)
        if not grid.in_bounds(nxt):
            raise PolicyError(f"policy moves {Action(action).name} off the grid from {cell}")
        if nxt in segment:
            outcome = Outcome.LOOP
            break
        cell = nxt
        since_charge += 1
        kind = grid.kind(cell)
        if kind is CellKind.NOFLY:
            nofly += 1
        if kind.has_station:
            steps.append((cell, battery.capacity))
            segments.append(since_charge)
            since_charge = 0
            segment = {cell}
        else:
            steps.append((cell, battery.level(since_charge)))
            segment.add(cell)
    if outcome is None:
        outcome = Outcome.NOFLY_VIOLATION if nofly else Outcome.SUCCESS
    if since_charge:
        segments.append(since_charge)
    total = len(steps) - 1
    return EnergyTrace(
        steps=steps,
        outcome=outcome,
        min_battery=min(level for _, level in steps),
        total_steps=total,
        mission_time=mission_time(total, cell_size, speed),
        nofly_visits=nofly,
        segments=segments,
    )
