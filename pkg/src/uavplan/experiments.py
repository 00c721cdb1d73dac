"""Monte-Carlo sweeps over random power-station counts and convergence reports."""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .energy import BatteryModel, Outcome, simulate_policy
from .grid import Cell, CellKind, GridMap, RewardTable
from .oracle import feasible_starts, refuel_shortest_path
from .qlearning import Hyperparams, TrainingError, TrainingLog, extract_policy, train

SCENARIO_START: Cell = (1, 1)
SCENARIO_DESTINATION: Cell = (14, 14)


class SuccessMode(enum.Enum):
    START_TO_DEST = "start"
    ALL_CELLS = "all"


@dataclass(frozen=True)
class SweepConfig:
    grid_dims: tuple[int, int] = (20, 20)
    extra_ps_counts: tuple[int, ...] = tuple(range(51))
    trials_per_count: int = 100
    nofly_count: int = 0
    seed: int = 0
    success_mode: SuccessMode = SuccessMode.START_TO_DEST
    start: Cell = SCENARIO_START
    destination: Cell = SCENARIO_DESTINATION
    battery: BatteryModel = BatteryModel()
    use_learner: bool = False
    learner_hyper: Hyperparams = Hyperparams()

    def __post_init__(self):
        rows, cols = self.grid_dims
        free = rows * cols - self.nofly_count - 2
        if self.trials_per_count < 1:
            raise ValueError("trials_per_count must be >= 1")
        if self.nofly_count < 0:
            raise ValueError("nofly_count must be >= 0")
        bad = [k for k in self.extra_ps_counts if k < 0 or k > free]
        if bad:
            raise ValueError(f"station counts {bad} exceed the {free} free cells")

    def as_dict(self) -> dict:
        return {
            "grid_dims": list(self.grid_dims),
            "extra_ps_counts": list(self.extra_ps_counts),
            "trials_per_count": self.trials_per_count,
            "nofly_count": self.nofly_count,
            "seed": self.seed,
            "success_mode": self.success_mode.value,
            "start": list(self.start),
            "destination": list(self.destination),
            "battery": self.battery.as_dict(),
            "learner": self.use_learner,
        }


@dataclass(frozen=True)
class SweepEntry:
    extra_ps: int
    trials: int
    successes: int

    @property
    def probability(self) -> float:
        return self.successes / self.trials


@dataclass
class SweepResult:
    entries: list[SweepEntry]
    trials: int
    seed: int

    def probabilities(self) -> dict[int, float]:
        return {e.extra_ps: e.probability for e in self.entries}

    def to_csv(self, header_comments: Sequence[str] = ()) -> str:
        lines = [f"# {c}" for c in header_comments]
        lines.append("extra_ps,trials,successes,probability")
        lines += [f"{e.extra_ps},{e.trials},{e.successes},{e.probability:.6g}" for e in self.entries]
        return "\n".join(lines) + "\n"


def trial_rng(seed: int, extra_ps: int, trial: int) -> np.random.Generator:
    """Independent stream per (count, trial) so extending a sweep never
    perturbs trials already run."""
    return np.random.default_rng(np.random.SeedSequence([seed, extra_ps, trial]))


def trial_grid(config: SweepConfig, extra_ps: int, trial: int) -> GridMap:
    """Random layout: no-fly cells first, then ``extra_ps`` stations, never on S or D."""
    rng = trial_rng(config.seed, extra_ps, trial)
    rows, cols = config.grid_dims
    free = [(r, c) for r in range(rows) for c in range(cols)
            if (r, c) not in (config.start, config.destination)]
    picks = rng.permutation(len(free))
    nofly = [free[i] for i in picks[:config.nofly_count]]
    stations = [free[i] for i in picks[config.nofly_count:config.nofly_count + extra_ps]]
    return GridMap.from_layout(rows, cols, config.start, config.destination,
                               stations=stations, nofly=nofly)


def trial_succeeds(config: SweepConfig, grid: GridMap, trial_seed: int = 0) -> bool:
    if config.use_learner:
        return _learner_succeeds(config, grid, trial_seed)
    if config.success_mode is SuccessMode.START_TO_DEST:
        return refuel_shortest_path(grid, config.battery, grid.start) is not None
    covered = feasible_starts(grid, config.battery)
    return all(cell in covered for cell in grid.all_cells()
               if grid.kind(cell) is not CellKind.NOFLY)


def _learner_succeeds(config: SweepConfig, grid: GridMap, trial_seed: int) -> bool:
    try:
        table, _ = train(grid, RewardTable(), config.learner_hyper, seed=trial_seed)
    except TrainingError:
        return False
    policy, _ = extract_policy(table)
    if config.success_mode is SuccessMode.START_TO_DEST:
        starts = [grid.start]
    else:
        starts = [c for c in grid.all_cells()
                  if grid.kind(c) is not CellKind.NOFLY and c != grid.destination]
    return all(simulate_policy(grid, policy, config.battery, s).outcome is Outcome.SUCCESS
               for s in starts)


def _run_count(args: tuple[SweepConfig, int]) -> SweepEntry:
    config, k = args
    successes = 0
    for trial in range(config.trials_per_count):
        grid = trial_grid(config, k, trial)
        seed = int(np.random.SeedSequence([config.seed, k, trial, 1]).generate_state(1)[0])
        successes += trial_succeeds(config, grid, seed)
    return SweepEntry(k, config.trials_per_count, successes)


def run_sweep(config: SweepConfig, jobs: int = 1) -> SweepResult:
    """Success probability per extra station count.

    Counts may be evaluated in worker processes; each trial owns its
    random stream, so the result does not depend on ``jobs``.
    """
    work = [(config, k) for k in config.extra_ps_counts]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_run_count, work))
    else:
        entries = [_run_count(w) for w in work]
    entries.sort(key=lambda e: e.extra_ps)
    return SweepResult(entries, config.trials_per_count, config.seed)


@dataclass
class ConvergenceReport:
    converged_at: Optional[int]
    smoothed: np.ndarray
    threshold: float
    window: int
    deltas: np.ndarray = field(repr=False, default=None)

    def to_csv(self, header_comments: Sequence[str] = ()) -> str:
        lines = [f"# {c}" for c in header_comments]
        lines.append("episode,delta,delta_smoothed")
        lines += [f"{i},{d!r},{s!r}" for i, (d, s) in
                  enumerate(zip(self.deltas.tolist(), self.smoothed.tolist()), start=1)]
        return "\n".join(lines) + "\n"


def convergence_report(log: TrainingLog | Sequence[float], window: int = 100,
                       threshold: float = 1e-3) -> ConvergenceReport:
    """First episode whose trailing ``window`` deltas all sit below ``threshold``.

    ``converged_at`` is 1-based and ``None`` when that never happens. The
    smoothed curve is a trailing mean (shorter at the start).
    """
    deltas = np.asarray(log.deltas if isinstance(log, TrainingLog) else log, dtype=float)
    if deltas.size == 0:
        raise ValueError("no deltas to report on")
    if window < 1 or window > deltas.size:
        raise ValueError(f"window {window} must lie in [1, {deltas.size}]")
    # convolution rather than a running cumsum: early deltas of ~1e3 would
    # swamp the tiny late ones through cancellation
    sums = np.convolve(deltas, np.ones(window))[: deltas.size]
    smoothed = sums / np.minimum(np.arange(1, deltas.size + 1), window)

    windows = np.lib.stride_tricks.sliding_window_view(deltas, window).max(axis=1)
    hits = np.flatnonzero(windows < threshold)
    converged_at = int(hits[0]) + window if hits.size else None
    return ConvergenceReport(converged_at, smoothed, threshold, window, deltas)


SPARK = " .:-=+*#%@"


def sparkline(values: Sequence[float], lo: float = 0.0, hi: float = 1.0) -> str:
    """One character per value, scaled between ``lo`` and ``hi``."""
    top = len(SPARK) - 1
    out = []
    for v in values:
        frac = 0.0 if hi <= lo else (min(max(v, lo), hi) - lo) / (hi - lo)
        out.append(SPARK[round(frac * top)])
    return "".join(out)
