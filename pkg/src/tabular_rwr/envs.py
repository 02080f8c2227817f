"""Built-in environments."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .mdp import FiniteMdp

# up, down, left, right as (row, col) offsets
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
ACTION_NAMES = ("up", "down", "left", "right")


def _four_room_walls():
    walls = {(r, 5) for r in range(11) if r not in (1, 8)}
    walls |= {(5, c) for c in range(5) if c != 2}
    walls |= {(6, c) for c in range(6, 11) if c != 8}
    return frozenset(walls)


@dataclass(frozen=True)
class GridSpec:
    width: int = 11
    height: int = 11
    walls: frozenset = _four_room_walls()
    start: tuple[int, int] = (0, 0)
    goal: tuple[int, int] = (10, 10)
    goal_reward: float = 1.0
    step_reward: float = 0.001
    discount: float = 0.9

    def cells(self) -> list[tuple[int, int]]:
        """Free cells in row-major order; index in this list is the state id."""
        return [
            (r, c)
            for r in range(self.height)
            for c in range(self.width)
            if (r, c) not in self.walls
        ]

    def step(self, cell, action):
        if cell == self.goal:
            return cell
        dr, dc = MOVES[action]
        r, c = cell[0] + dr, cell[1] + dc
        if not (0 <= r < self.height and 0 <= c < self.width) or (r, c) in self.walls:
            return cell
        return (r, c)

    def distances_to_goal(self) -> dict:
        """Shortest path length from every free cell that can reach the goal."""
        cells = self.cells()
        preds = {cell: [] for cell in cells}
        for cell in cells:
            for a in range(len(MOVES)):
                preds[self.step(cell, a)].append(cell)
        dist = {self.goal: 0}
        queue = deque([self.goal])
        while queue:
            cur = queue.popleft()
            for p in preds[cur]:
                if p not in dist:
                    dist[p] = dist[cur] + 1
                    queue.append(p)
        return dist

    def problems(self) -> list[str]:
        out = []
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if cell in self.walls:
                out.append(f"{name} {cell} is a wall")
        dist = self.distances_to_goal()
        for cell in self.cells():
            if cell not in dist:
                out.append(f"cell {cell} cannot reach the goal")
        return out


def gridworld(spec: GridSpec) -> FiniteMdp:
    problems = spec.problems()
    if problems:
        raise ValueError("; ".join(problems))
    cells = spec.cells()
    index = {cell: i for i, cell in enumerate(cells)}
    n_s, n_a = len(cells), len(MOVES)
    transition = np.zeros((n_s, n_a, n_s))
    reward = np.full((n_s, n_a), spec.step_reward)
    for cell, s in index.items():
        for a in range(n_a):
            nxt = spec.step(cell, a)
            transition[s, a, index[nxt]] = 1.0
            if cell != spec.goal and nxt == spec.goal:
                reward[s, a] = spec.goal_reward
    mu0 = np.zeros(n_s)
    mu0[index[spec.start]] = 1.0
    return FiniteMdp(transition, reward, spec.discount, mu0, name="four-room")


def four_room() -> FiniteMdp:
    return gridworld(GridSpec())


def two_state_bandit(q_values, gamma: float = 0.9, goal_value: float = 0.5,
                     name: str = "bandit") -> FiniteMdp:
    """Decision state 0 whose actions all lead to an absorbing goal state 1.

    Rewards are back-solved so that Q(0, a) equals ``q_values[a]`` under the
    discount; the goal pays ``goal_value * (1 - gamma)`` per step, so its
    value is ``goal_value`` and every action there is tied.
    """
    q_values = np.asarray(q_values, dtype=np.float64)
    n_a = q_values.size
    transition = np.zeros((2, n_a, 2))
    transition[:, :, 1] = 1.0
    reward = np.empty((2, n_a))
    reward[0] = q_values - gamma * goal_value
    reward[1] = goal_value * (1.0 - gamma)
    return FiniteMdp(transition, reward, gamma, [1.0, 0.0], name=name)


def two_action_mdp(gamma: float = 0.9) -> FiniteMdp:
    """Two actions with Q(init, .) = (2, 1) at the initial state."""
    mdp = two_state_bandit([2.0, 1.0], gamma, name="two-action")
    q_init = mdp.reward[0] + gamma * 0.5
    assert np.allclose(q_init, [2.0, 1.0], rtol=0, atol=1e-10), q_init
    return mdp


def counterexample_mdp(gamma: float = 0.9) -> FiniteMdp:
    """Expected-reward form of the two-armed stochastic bandit: Q = (1, 2/3)."""
    return two_state_bandit([1.0, 2.0 / 3.0], gamma, name="counterexample")


def single_action_mdp() -> FiniteMdp:
    """One state, one action, self-loop paying 0.001: everything is greedy."""
    return FiniteMdp([[[1.0]]], [[0.001]], 0.9, [1.0], name="trivial")


def random_mdp(
    n_states: int,
    n_actions: int,
    seed: int,
    reward_range: tuple[float, float] = (0.1, 1.0),
    discount: float = 0.9,
) -> FiniteMdp:
    """Flat-Dirichlet transition rows, uniform rewards, uniform start."""
    lo, hi = reward_range
    if not lo > 0:
        raise ValueError(f"reward lower bound must be positive, got {lo}")
    if hi < lo:
        raise ValueError(f"empty reward range {reward_range}")
    rng = np.random.default_rng(seed)
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    # dirichlet rows can miss 1 by a few ulps
    transition /= transition.sum(axis=2, keepdims=True)
    reward = rng.uniform(lo, hi, size=(n_states, n_actions))
    mu0 = np.full(n_states, 1.0 / n_states)
    return FiniteMdp(transition, reward, discount, mu0, name=f"random-{seed}")
