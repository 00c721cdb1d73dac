"""Exact reference solvers.

``value_iteration`` solves the same reward MDP the learner sees.
``refuel_shortest_path`` is the true minimum-move mission: breadth-first
search over (cell, charge quanta left) where station cells restore full
charge and no-fly cells are excluded outright.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .energy import BatteryModel
from .grid import Action, Cell, CellKind, GridMap, RewardTable, available_actions, neighbor
from .qlearning import ValueMap


@dataclass(frozen=True)
class ChargeState:
    cell: Cell
    steps_remaining: int


@dataclass(frozen=True)
class RefuelPath:
    length: int
    path: list[Cell]


def value_iteration(grid: GridMap, rewards: RewardTable, gamma: float = 0.9, tol: float = 1e-9,
                    tie_tol: float = 1e-6, max_sweeps: int = 100_000):
    """Synchronous Bellman sweeps with V(destination) pinned at 0.

    Returns ``(ValueMap, optimal)`` where ``optimal[cell]`` is every action
    whose backed-up value is within ``tie_tol`` of the best.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if not tol > 0:
        raise ValueError("tol must be positive")
    cells = grid.nonterminal_cells()
    moves = {
        cell: [(a, nxt, rewards.for_cell(grid, nxt))
               for a in available_actions(grid, cell)
               for nxt in (neighbor(cell, a),)]
        for cell in cells
    }
    V = {cell: 0.0 for cell in grid.all_cells()}
    for _ in range(max_sweeps):
        new = {cell: max(r + gamma * V[nxt] for _, nxt, r in moves[cell]) for cell in cells}
        change = max(abs(new[c] - V[c]) for c in cells)
        V.update(new)
        if change < tol:
            break
    optimal = {}
    for cell in cells:
        backed = {a: r + gamma * V[nxt] for a, nxt, r in moves[cell]}
        top = max(backed.values())
        optimal[cell] = {a for a, v in backed.items() if v >= top - tie_tol}
    return ValueMap({c: V[c] for c in cells}), optimal


def bellman_residual(grid: GridMap, rewards: RewardTable, values: ValueMap, gamma: float) -> float:
    worst = 0.0
    for cell, v in values.value_of.items():
        backed = max(
            rewards.for_cell(grid, nxt) + gamma * (0.0 if nxt == grid.destination else values[nxt])
            for a in available_actions(grid, cell) for nxt in (neighbor(cell, a),))
        worst = max(worst, abs(v - backed))
    return worst


def refuel_shortest_path(grid: GridMap, battery: BatteryModel,
                         start: Optional[Cell] = None) -> Optional[RefuelPath]:
    """Fewest moves from ``start`` (full charge) to the destination, or ``None``.

    Nodes are :class:`ChargeState` pairs, encoded as ``cell_index * (full + 1)
    + steps_remaining`` for speed. A node with no charge left has no moves.
    """
    start = grid.start if start is None else start
    if grid.kind(start) is CellKind.NOFLY:
        raise ValueError(f"start {start} is a no-fly cell")
    if start == grid.destination:
        return RefuelPath(0, [start])
    full = battery.range_steps
    width = full + 1
    cols = grid.cols
    adj, station = _adjacency(grid)
    goal = grid.destination[0] * cols + grid.destination[1]
    origin = (start[0] * cols + start[1]) * width + full
    parent = {origin: -1}
    queue = deque([origin])
    while queue:
        node = queue.popleft()
        cell, left = divmod(node, width)
        if left == 0:
            continue
        for nxt in adj[cell]:
            child = nxt * width + (full if station[nxt] else left - 1)
            if child in parent:
                continue
            parent[child] = node
            if nxt == goal:
                path = []
                while child != -1:
                    path.append(divmod(child // width, cols))
                    child = parent[child]
                path.reverse()
                return RefuelPath(len(path) - 1, path)
            queue.append(child)
    return None


def _adjacency(grid: GridMap) -> tuple[list[list[int]], list[bool]]:
    # flat neighbour lists over enterable cells, in Action order
    cols = grid.cols
    adj, station = [], []
    for cell in grid.all_cells():
        station.append(grid.has_station(cell))
        out = []
        for a in Action:
            nxt = neighbor(cell, a)
            if grid.in_bounds(nxt) and grid.kind(nxt) is not CellKind.NOFLY:
                out.append(nxt[0] * cols + nxt[1])
        adj.append(out)
    return adj, station


def shortest_path_length(grid: GridMap, start: Optional[Cell] = None) -> Optional[int]:
    """Plain BFS distance ignoring battery (no-fly cells excluded)."""
    start = grid.start if start is None else start
    dist = _bfs_distances(grid, start, limit=None)
    return dist.get(grid.destination)


def _bfs_distances(grid: GridMap, source: Cell, limit: Optional[int]) -> dict[Cell, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        cell = queue.popleft()
        d = dist[cell]
        if limit is not None and d >= limit:
            continue
        for a in Action:
            nxt = neighbor(cell, a)
            if nxt in dist or not grid.in_bounds(nxt) or grid.kind(nxt) is CellKind.NOFLY:
                continue
            dist[nxt] = d + 1
            queue.append(nxt)
    return dist


def feasible_starts(grid: GridMap, battery: BatteryModel) -> set[Cell]:
    """Every cell from which a full-charge flight can reach the destination.

    Grows the set of stations known to reach the destination, each time
    sweeping a battery-range BFS ball around the newly added station.
    """
    full = battery.range_steps
    good = {grid.destination}
    covered = {grid.destination}
    frontier = deque([grid.destination])
    while frontier:
        station = frontier.popleft()
        for cell in _bfs_distances(grid, station, limit=full):
            if cell in covered:
                continue
            covered.add(cell)
            if grid.has_station(cell) and cell not in good:
                good.add(cell)
                frontier.append(cell)
    return covered
