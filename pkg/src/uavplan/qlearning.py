"""Tabular Q-learning over the planning grid.

The learner's state is the cell alone; battery feasibility is checked
afterwards by :mod:`uavplan.energy`.

Random stream contract: one :class:`random.Random` per run, seeded with the
run seed. Each episode draws its start cell with one ``randrange`` call, then
every step calls :func:`epsilon_greedy`, which always consumes one
``random()`` and one ``randrange()`` draw. Nothing else touches the stream.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, TypeVar

from .grid import Action, Cell, CellKind, GridMap, RewardTable, available_actions, neighbor, reachable

T = TypeVar("T")

# Consecutive sub-threshold episodes required before stopping early.
PATIENCE = 100
# Episode step cap, as a multiple of the cell count.
STEP_CAP_FACTOR = 10


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = 0.9
    alpha0: float = 0.1
    eps_numerator: float = 0.9
    epochs: int = 100_000
    alpha_decay_offset: float = 0.995
    alpha_decay_slope: float = 0.005
    convergence_threshold: float = 1e-3
    t_increment: float = 1.0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.eps_numerator > 0:
            raise ValueError("eps_numerator must be positive")
        if self.convergence_threshold < 0:
            raise ValueError("convergence_threshold must be >= 0")
        if not self.t_increment > 0:
            raise ValueError("t_increment must be positive")

    def epsilon(self, episode: int) -> float:
        """Exploration probability for ``episode`` (1-based).

        The schedule clock starts at 1 and advances ``t_increment`` per episode.
        """
        return self.eps_numerator / (1.0 + (episode - 1) * self.t_increment)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class QTable:
    q: dict[Cell, dict[Action, float]]
    update_counts_sa: dict[Cell, dict[Action, int]]
    update_counts_s: dict[Cell, int]


@dataclass(frozen=True)
class Policy:
    action_of: dict[Cell, Action]

    def __getitem__(self, cell: Cell) -> Action:
        return self.action_of[cell]

    def __contains__(self, cell) -> bool:
        return cell in self.action_of


@dataclass(frozen=True)
class ValueMap:
    value_of: dict[Cell, float]

    def __getitem__(self, cell: Cell) -> float:
        return self.value_of[cell]


@dataclass
class TrainingLog:
    deltas: list[float] = field(default_factory=list)
    episodes_run: int = 0
    total_updates: int = 0


def init_q(grid: GridMap, rewards: RewardTable) -> QTable:
    """Q seeded with the immediate reward of the cell each action enters."""
    q, counts_sa, counts_s = {}, {}, {}
    for cell in grid.nonterminal_cells():
        acts = available_actions(grid, cell)
        q[cell] = {a: rewards.for_cell(grid, neighbor(cell, a)) for a in acts}
        counts_sa[cell] = {a: 0 for a in acts}
        counts_s[cell] = 0
    return QTable(q, counts_sa, counts_s)


def epsilon_greedy(proposed: T, legal: Sequence[T], eps: float, rng: random.Random) -> T:
    """With probability ``min(eps, 1)`` a uniform pick from ``legal``, else ``proposed``.

    Always draws exactly two values from ``rng`` so the stream advances the
    same way whichever branch is taken.
    """
    if not legal:
        raise ValueError("no legal actions")
    u = rng.random()
    j = rng.randrange(len(legal))
    return legal[j] if u < eps else proposed


def adaptive_alpha(alpha0: float, count: int, offset: float = 0.995, slope: float = 0.005) -> float:
    if count < 0:
        raise ValueError("count must be >= 0")
    return alpha0 / (offset + count * slope)


def q_update(q_sa: float, reward: float, max_q_next: float, alpha: float, gamma: float) -> float:
    return q_sa + alpha * (reward + gamma * max_q_next - q_sa)


def _argmax(values: Sequence[float]) -> int:
    # first maximum wins, which realises the Up < Down < Left < Right tie order
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def train(grid: GridMap, rewards: RewardTable, hyper: Hyperparams = Hyperparams(),
          seed: int = 0, qtable: Optional[QTable] = None) -> tuple[QTable, TrainingLog]:
    """Run the episode loop; returns the trained table and per-episode deltas.

    Episodes start from a uniformly drawn non-terminal, non-no-fly cell and
    use ``eps = eps_numerator / t``. Training stops after ``hyper.epochs``
    episodes, or earlier once ``PATIENCE`` consecutive episodes each change
    no Q value by ``convergence_threshold`` or more.
    """
    if grid.destination not in reachable(grid, grid.start):
        raise TrainingError("destination is unreachable from start without crossing no-fly cells")
    table = qtable if qtable is not None else init_q(grid, rewards)

    # Flat, list-based copy of the table for the inner loop.
    cells = grid.nonterminal_cells()
    index = {cell: i for i, cell in enumerate(cells)}
    terminal = len(cells)
    acts = [available_actions(grid, cell) for cell in cells]
    nxt = [[index.get(neighbor(cell, a), terminal) for a in acts[i]] for i, cell in enumerate(cells)]
    rew = [[rewards.for_cell(grid, neighbor(cell, a)) for a in acts[i]] for i, cell in enumerate(cells)]
    Q = [[table.q[cell][a] for a in acts[i]] for i, cell in enumerate(cells)]
    Q.append([0.0])  # terminal pseudo-row: max Q at the destination is 0
    cnt_sa = [[table.update_counts_sa[cell][a] for a in acts[i]] for i, cell in enumerate(cells)]
    cnt_s = [table.update_counts_s[cell] for cell in cells]
    legal = [tuple(range(len(a))) for a in acts]
    starts = [index[c] for c in cells if grid.kind(c) is not CellKind.NOFLY]

    rng = random.Random(seed)
    gamma, alpha0 = hyper.gamma, hyper.alpha0
    offset, slope = hyper.alpha_decay_offset, hyper.alpha_decay_slope
    threshold = hyper.convergence_threshold
    cap = STEP_CAP_FACTOR * grid.rows * grid.cols
    log = TrainingLog()
    quiet = 0

    for t in range(1, hyper.epochs + 1):
        eps = hyper.epsilon(t)
        s = starts[rng.randrange(len(starts))]
        a = _argmax(Q[s])
        biggest = 0.0
        n = 0
        while s != terminal and n < cap:
            a = epsilon_greedy(a, legal[s], eps, rng)
            s2 = nxt[s][a]
            r = rew[s][a]
            c = cnt_sa[s][a]
            alpha = alpha0 / (offset + c * slope)
            cnt_sa[s][a] = c + 1
            qs = Q[s]
            old = qs[a]
            q2 = Q[s2]
            a2 = _argmax(q2)
            qs[a] = old + alpha * (r + gamma * q2[a2] - old)
            change = abs(qs[a] - old)
            if change > biggest:
                biggest = change
            cnt_s[s] += 1
            s, a = s2, a2
            n += 1
        log.total_updates += n
        log.deltas.append(biggest)
        log.episodes_run = t
        if threshold > 0:
            quiet = quiet + 1 if biggest < threshold else 0
            if quiet >= PATIENCE:
                break

    for i, cell in enumerate(cells):
        table.q[cell] = dict(zip(acts[i], Q[i]))
        table.update_counts_sa[cell] = dict(zip(acts[i], cnt_sa[i]))
        table.update_counts_s[cell] = cnt_s[i]
    return table, log


def extract_policy(table: QTable) -> tuple[Policy, ValueMap]:
    """Greedy action and its value per cell (ties: Up < Down < Left < Right)."""
    action_of, value_of = {}, {}
    for cell, qs in table.q.items():
        ordered = sorted(qs)
        best = ordered[_argmax([qs[a] for a in ordered])]
        action_of[cell] = best
        value_of[cell] = qs[best]
    return Policy(action_of), ValueMap(value_of)


def argmax_set(qs: dict[Action, float], tol: float = 0.0) -> set[Action]:
    top = max(qs.values())
    return {a for a, v in qs.items() if v >= top - tol}
