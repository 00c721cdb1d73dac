import itertools
import random
from collections import deque

import pytest

from uavplan.energy import BatteryModel
from uavplan.grid import CellKind, GridMap, RewardTable
from uavplan.oracle import (bellman_residual, feasible_starts, refuel_shortest_path,
                            shortest_path_length, value_iteration)

GRID_DIMS = (20, 20)


def scenario_grid(stations=()):
    return GridMap.from_layout(*GRID_DIMS, (1, 1), (14, 14), stations=stations)


def test_value_iteration_one_step():
    # D next to s: one-step horizon
    g = GridMap.from_layout(2, 2, (0, 0), (0, 1))
    values, optimal = value_iteration(g, RewardTable())
    assert values[(0, 0)] == pytest.approx(1000.0)
    assert optimal[(0, 0)] == {next(iter(optimal[(0, 0)]))}


def test_value_iteration_corridor():
    g = GridMap.from_layout(2, 3, (1, 0), (0, 2))
    values, _ = value_iteration(g, RewardTable())
    assert values[(0, 1)] == pytest.approx(1000.0)
    assert values[(1, 2)] == pytest.approx(1000.0)
    # s1 -> s2 -> D through regular cells
    assert values[(0, 0)] == pytest.approx(-0.1 + 0.9 * 1000.0)


def test_value_iteration_deterministic_and_residual():
    g = GridMap.from_layout(6, 7, (0, 0), (5, 6), stations=[(2, 3)], nofly=[(3, 3), (4, 4)])
    a = value_iteration(g, RewardTable())
    b = value_iteration(g, RewardTable())
    assert a[0].value_of == b[0].value_of and a[1] == b[1]
    assert bellman_residual(g, RewardTable(), a[0], 0.9) < 1e-8
    with pytest.raises(ValueError):
        value_iteration(g, RewardTable(), gamma=1.0)


def test_no_station_scenario_grid_infeasible():
    assert refuel_shortest_path(scenario_grid(), BatteryModel()) is None


def test_two_station_construction():
    result = refuel_shortest_path(scenario_grid([(6, 6), (11, 11)]), BatteryModel())
    assert result.length == 26
    assert result.path[0] == (1, 1) and result.path[-1] == (14, 14)
    assert len(result.path) == 27


def test_within_range_equals_bfs():
    g = GridMap.from_layout(6, 6, (0, 0), (4, 3), nofly=[(1, 0), (1, 1), (1, 2)])
    assert refuel_shortest_path(g, BatteryModel()).length == shortest_path_length(g) == 7


def test_start_is_destination_and_nofly_start():
    g = GridMap.from_layout(3, 3, (0, 0), (2, 2), nofly=[(1, 1)])
    assert refuel_shortest_path(g, BatteryModel(), (2, 2)).length == 0
    with pytest.raises(ValueError):
        refuel_shortest_path(g, BatteryModel(), (1, 1))


def test_path_respects_battery():
    g = scenario_grid([(4, 6), (11, 8)])
    res = refuel_shortest_path(g, BatteryModel())
    since = 0
    for a, b in zip(res.path, res.path[1:]):
        assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
        since = 0 if g.has_station(b) else since + 1
        assert since <= 10


def random_grid(rng, rows=20, cols=20, n_ps=15, n_x=20):
    cells = [(r, c) for r in range(rows) for c in range(cols) if (r, c) not in ((1, 1), (14, 14))]
    pick = rng.sample(cells, n_ps + n_x)
    return GridMap.from_layout(rows, cols, (1, 1), (14, 14), stations=pick[:n_ps], nofly=pick[n_ps:])


def brute_force_length(g, battery, start):
    # independent BFS over explicit (cell, remaining) tuples
    full = battery.range_steps
    seen = {(start, full): 0}
    q = deque([(start, full)])
    while q:
        cell, left = q.popleft()
        if cell == g.destination:
            return seen[(cell, left)]
        if left == 0:
            continue
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nxt = (cell[0] + dr, cell[1] + dc)
            if not g.in_bounds(nxt) or g.kind(nxt) is CellKind.NOFLY:
                continue
            node = (nxt, full if g.has_station(nxt) else left - 1)
            if node not in seen:
                seen[node] = seen[(cell, left)] + 1
                q.append(node)
    return None


def test_matches_brute_force_and_bounds():
    rng = random.Random(11)
    battery = BatteryModel()
    for _ in range(40):
        g = random_grid(rng)
        res = refuel_shortest_path(g, battery)
        ref = brute_force_length(g, battery, g.start)
        assert (res.length if res else None) == ref
        plain = shortest_path_length(g)
        if res is not None:
            assert res.length >= plain
            if plain <= battery.range_steps:
                assert res.length == plain


def test_adding_station_never_hurts():
    rng = random.Random(2)
    battery = BatteryModel()
    for _ in range(30):
        g = random_grid(rng, n_ps=10, n_x=10)
        before = refuel_shortest_path(g, battery)
        free = [c for c in g.cells_of(CellKind.REGULAR)]
        g2 = g.replace({rng.choice(free): CellKind.POWER_STATION})
        after = refuel_shortest_path(g2, battery)
        if before is not None:
            assert after is not None and after.length <= before.length


def test_feasible_starts_matches_per_cell_oracle():
    rng = random.Random(4)
    battery = BatteryModel()
    for _ in range(6):
        cells = [(r, c) for r in range(12) for c in range(12) if (r, c) not in ((1, 1), (9, 9))]
        pick = rng.sample(cells, 20)
        g = GridMap.from_layout(12, 12, (1, 1), (9, 9), stations=pick[:8], nofly=pick[8:])
        covered = feasible_starts(g, battery)
        for cell in g.all_cells():
            if g.kind(cell) is CellKind.NOFLY:
                assert cell not in covered
                continue
            assert (cell in covered) == (refuel_shortest_path(g, battery, cell) is not None)
