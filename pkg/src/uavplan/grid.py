"""Grid world for coarse UAV planning: map cells, moves and rewards.

Map files are plain text, one grid row per line::

    .  regular cell
    P  power station
    X  no-fly cell
    S  start (carries a power station)
    D  destination (carries a power station)

Lines starting with ``#`` are comments. Coordinates are ``(row, col)`` with
row 0 at the top; ``Down`` increments the row and ``Right`` the column.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

Cell = tuple[int, int]


class CellKind(enum.Enum):
    REGULAR = "."
    POWER_STATION = "P"
    NOFLY = "X"
    START = "S"
    DESTINATION = "D"

    @property
    def has_station(self) -> bool:
        """Start and destination host fixed power stations."""
        return self in (CellKind.POWER_STATION, CellKind.START, CellKind.DESTINATION)


class Action(enum.IntEnum):
    # Values fix the tie-break order used everywhere: Up < Down < Left < Right.
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3

    @property
    def delta(self) -> Cell:
        return _DELTAS[self]

    @property
    def letter(self) -> str:
        return self.name[0]

    @property
    def opposite(self) -> "Action":
        return _OPPOSITE[self]

    @classmethod
    def from_letter(cls, letter: str) -> "Action":
        try:
            return _BY_LETTER[letter.upper()]
        except KeyError:
            raise ValueError(f"unknown action letter {letter!r}") from None


_DELTAS = {Action.UP: (-1, 0), Action.DOWN: (1, 0), Action.LEFT: (0, -1), Action.RIGHT: (0, 1)}
_OPPOSITE = {Action.UP: Action.DOWN, Action.DOWN: Action.UP,
             Action.LEFT: Action.RIGHT, Action.RIGHT: Action.LEFT}
_BY_LETTER = {a.letter: a for a in Action}


class MapParseError(ValueError):
    """Malformed map text. ``line`` and ``column`` are 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class GridMap:
    cells: tuple[tuple[CellKind, ...], ...]
    start: Cell
    destination: Cell

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.rows}x{self.cols}")
        if any(len(row) != self.cols for row in self.cells):
            raise ValueError("ragged grid")
        for name, cell in (("start", self.start), ("destination", self.destination)):
            if not self.in_bounds(cell):
                raise ValueError(f"{name} {cell} out of bounds")
            if self.kind(cell) is CellKind.NOFLY:
                raise ValueError(f"{name} {cell} is a no-fly cell")
        if self.start == self.destination:
            raise ValueError("start and destination must differ")

    @property
    def rows(self) -> int:
        return len(self.cells)

    @property
    def cols(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols

    def kind(self, cell: Cell) -> CellKind:
        """Kind of ``cell``; start and destination report their own kinds."""
        if cell == self.start:
            return CellKind.START
        if cell == self.destination:
            return CellKind.DESTINATION
        return self.cells[cell[0]][cell[1]]

    def has_station(self, cell: Cell) -> bool:
        return self.kind(cell).has_station

    def all_cells(self):
        for r in range(self.rows):
            for c in range(self.cols):
                yield (r, c)

    def nonterminal_cells(self) -> list[Cell]:
        return [cell for cell in self.all_cells() if cell != self.destination]

    def cells_of(self, kind: CellKind) -> list[Cell]:
        return [cell for cell in self.all_cells() if self.kind(cell) is kind]

    def stations(self) -> list[Cell]:
        """All power-station-bearing cells, start and destination included."""
        return [cell for cell in self.all_cells() if self.has_station(cell)]

    def replace(self, updates: dict[Cell, CellKind]) -> "GridMap":
        """Copy of this map with some cells reassigned (not start/destination)."""
        rows = [list(row) for row in self.cells]
        for (r, c), kind in updates.items():
            if (r, c) in (self.start, self.destination):
                raise ValueError(f"cannot overwrite start/destination at {(r, c)}")
            if kind in (CellKind.START, CellKind.DESTINATION):
                raise ValueError("use from_layout to move start/destination")
            rows[r][c] = kind
        return GridMap(tuple(tuple(row) for row in rows), self.start, self.destination)

    @classmethod
    def from_layout(cls, rows: int, cols: int, start: Cell, destination: Cell,
                    stations=(), nofly=()) -> "GridMap":
        grid = [[CellKind.REGULAR] * cols for _ in range(rows)]
        for r, c in stations:
            grid[r][c] = CellKind.POWER_STATION
        for r, c in nofly:
            grid[r][c] = CellKind.NOFLY
        if rows >= 1 and cols >= 1:
            for cell, kind in ((start, CellKind.START), (destination, CellKind.DESTINATION)):
                if 0 <= cell[0] < rows and 0 <= cell[1] < cols:
                    if grid[cell[0]][cell[1]] is CellKind.NOFLY:
                        raise ValueError(f"{kind.name.lower()} {cell} is a no-fly cell")
                    grid[cell[0]][cell[1]] = kind
        return cls(tuple(tuple(row) for row in grid), start, destination)


def load_map(text: str) -> GridMap:
    """Parse map-file text into a :class:`GridMap`.

    Raises :class:`MapParseError` naming the offending line/column for ragged
    rows, unknown characters, or a missing/duplicated ``S`` or ``D``.
    """
    kinds = {k.value: k for k in CellKind}
    rows: list[tuple[CellKind, ...]] = []
    start = dest = None
    width = None
    blank_after_rows = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if line.startswith("#"):
            continue
        if not line.strip():
            blank_after_rows = bool(rows)
            continue
        if blank_after_rows:
            raise MapParseError("blank line inside map body", lineno - 1)
        if width is None:
            width = len(line)
        elif len(line) != width:
            raise MapParseError(f"row has {len(line)} cells, expected {width}", lineno)
        row = []
        for colno, ch in enumerate(line):
            kind = kinds.get(ch)
            if kind is None:
                raise MapParseError(f"unknown cell character {ch!r}", lineno, colno + 1)
            cell = (len(rows), colno)
            if kind is CellKind.START:
                if start is not None:
                    raise MapParseError("duplicate start 'S'", lineno, colno + 1)
                start = cell
            elif kind is CellKind.DESTINATION:
                if dest is not None:
                    raise MapParseError("duplicate destination 'D'", lineno, colno + 1)
                dest = cell
            row.append(kind)
        rows.append(tuple(row))
    if not rows:
        raise MapParseError("empty map")
    if start is None:
        raise MapParseError("missing start 'S'")
    if dest is None:
        raise MapParseError("missing destination 'D'")
    try:
        return GridMap(tuple(rows), start, dest)
    except ValueError as exc:
        raise MapParseError(str(exc)) from None


def render_map(grid: GridMap) -> str:
    """Canonical map text: one line per row, trailing newline, no comments."""
    return "".join(
        "".join(grid.kind((r, c)).value for c in range(grid.cols)) + "\n"
        for r in range(grid.rows)
    )


def read_map(path) -> GridMap:
    return load_map(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class RewardTable:
    ps_reward: float = 1.0
    step_cost: float = -0.1
    destination_reward: float = 1000.0
    nofly_penalty: float = -30.0
    # Optional multiplier for station/no-fly rewards, called as shaping(grid, cell).
    shaping: Optional[Callable[[GridMap, Cell], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.ps_reward > 0:
            raise ValueError("ps_reward must be positive")
        if not self.step_cost < 0:
            raise ValueError("step_cost must be negative")
        if not self.destination_reward > 0:
            raise ValueError("destination_reward must be positive")
        if not self.nofly_penalty < self.step_cost:
            raise ValueError("nofly_penalty must be below step_cost")

    def for_cell(self, grid: GridMap, cell: Cell) -> float:
        """Reward for entering ``cell``."""
        kind = grid.kind(cell)
        if kind is CellKind.DESTINATION:
            return self.destination_reward
        if kind is CellKind.REGULAR:
            return self.step_cost
        base = self.nofly_penalty if kind is CellKind.NOFLY else self.ps_reward
        if self.shaping is not None:
            base *= self.shaping(grid, cell)
        return base

    def as_dict(self) -> dict:
        return {"ps_reward": self.ps_reward, "step_cost": self.step_cost,
                "destination_reward": self.destination_reward,
                "nofly_penalty": self.nofly_penalty}


def distance_shaping(strength: float = 0.5):
    """Multiplier ``1 + strength / (1 + d)`` with ``d`` the Manhattan distance
    from the cell to the destination; stations near the goal weigh more."""

    def shape(grid: GridMap, cell: Cell) -> float:
        d = abs(cell[0] - grid.destination[0]) + abs(cell[1] - grid.destination[1])
        return 1.0 + strength / (1.0 + d)

    return shape


def is_terminal(grid: GridMap, cell: Cell) -> bool:
    return cell == grid.destination


def available_actions(grid: GridMap, cell: Cell) -> tuple[Action, ...]:
    """Legal moves from ``cell`` in tie-break order; empty at the destination."""
    if not grid.in_bounds(cell):
        raise ValueError(f"cell {cell} out of bounds")
    if is_terminal(grid, cell):
        return ()
    r, c = cell
    return tuple(a for a in Action if grid.in_bounds((r + a.delta[0], c + a.delta[1])))


def neighbor(cell: Cell, action: Action) -> Cell:
    dr, dc = action.delta
    return (cell[0] + dr, cell[1] + dc)


def step(grid: GridMap, rewards: RewardTable, cell: Cell, action: Action) -> tuple[Cell, float]:
    """Deterministic transition: ``(next_cell, reward_for_entering_it)``."""
    if action not in available_actions(grid, cell):
        raise ValueError(f"action {action.name} is not legal from {cell}")
    nxt = neighbor(cell, action)
    return nxt, rewards.for_cell(grid, nxt)


def reachable(grid: GridMap, source: Optional[Cell] = None, avoid_nofly: bool = True) -> set[Cell]:
    """Cells reachable from ``source`` (default: start) by 4-neighbour moves."""
    source = grid.start if source is None else source
    seen = {source}
    queue = deque([source])
    while queue:
        cell = queue.popleft()
        for a in Action:
            nxt = neighbor(cell, a)
            if nxt in seen or not grid.in_bounds(nxt):
                continue
            if avoid_nofly and grid.kind(nxt) is CellKind.NOFLY:
                continue
            seen.add(nxt)
            queue.append(nxt)
    return seen
