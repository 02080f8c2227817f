"""Stochastic-reward bandits and the effect of reward transformations on the optimal arm.

Values are computed with whatever number type the bandit holds, so a
bandit built from :class:`fractions.Fraction` gives exact results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

TIE_TOL = 1e-12


@dataclass(frozen=True)
class StochasticRewardBandit:
    """``outcomes[a]`` lists (reward, probability) pairs for arm ``a``."""

    outcomes: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "outcomes", tuple(tuple((r, p) for r, p in arm) for arm in self.outcomes)
        )
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not self.outcomes:
            out.append("bandit has no arms")
        for a, arm in enumerate(self.outcomes):
            total = sum(p for _, p in arm)
            if abs(total - 1) > 1e-12:
                out.append(f"arm {a} probabilities sum to {float(total):.12g}")
            if any(p < 0 for _, p in arm):
                out.append(f"arm {a} has a negative probability")
        return out

    @property
    def n_actions(self) -> int:
        return len(self.outcomes)

    @classmethod
    def from_json(cls, path) -> StochasticRewardBandit:
        with Path(path).open() as fh:
            data = json.load(fh)
        if isinstance(data, dict):
            data = data["actions"]
        return cls([[(o["reward"], o["prob"]) for o in arm] for arm in data])

    def to_json(self) -> list:
        return [[{"reward": float(r), "prob": float(p)} for r, p in arm] for arm in self.outcomes]


def counterexample_bandit() -> StochasticRewardBandit:
    """Arm 0 pays 1 surely; arm 1 pays 0 w.p. 2/3 and 2 w.p. 1/3."""
    return StochasticRewardBandit([
        [(1, Fraction(1))],
        [(0, Fraction(2, 3)), (2, Fraction(1, 3))],
    ])


@dataclass(frozen=True)
class RewardTransform:
    """``kind`` is ``"linear"`` (scale, offset), ``"exponential"`` (base) or ``"table"``."""

    kind: str
    scale: float = 1
    offset: float = 0
    base: float = 1
    table: tuple = ()

    def __post_init__(self):
        if self.kind == "linear":
            if not self.scale > 0:
                raise ValueError(f"linear transform needs scale > 0, got {self.scale}")
        elif self.kind == "exponential":
            if not self.base > 1:
                raise ValueError(f"exponential transform needs base > 1, got {self.base}")
        elif self.kind == "table":
            object.__setattr__(self, "table", tuple(dict(self.table).items()))
        else:
            raise ValueError(f"unknown transform kind {self.kind!r}")

    @classmethod
    def linear(cls, scale, offset) -> RewardTransform:
        return cls("linear", scale=scale, offset=offset)

    @classmethod
    def exponential(cls, base) -> RewardTransform:
        return cls("exponential", base=base)

    @classmethod
    def from_table(cls, mapping) -> RewardTransform:
        return cls("table", table=tuple(mapping.items()))

    def __call__(self, r):
        if self.kind == "linear":
            return self.scale * r + self.offset
        if self.kind == "exponential":
            return self.base ** r
        return dict(self.table)[r]

    def describe(self) -> str:
        if self.kind == "linear":
            return f"linear(scale={self.scale}, offset={self.offset})"
        if self.kind == "exponential":
            return f"exponential(base={self.base})"
        return f"table({dict(self.table)})"


def action_values(bandit: StochasticRewardBandit, transform: RewardTransform | None = None):
    """Expected (transformed) reward of each arm."""
    u = transform if transform is not None else (lambda r: r)
    return [sum(p * u(r) for r, p in arm) for arm in bandit.outcomes]


def argmax_set(values, tie_tol: float = TIE_TOL) -> frozenset:
    best = max(values)
    return frozenset(a for a, q in enumerate(values) if q >= best - tie_tol)


def optimal_action_shift(bandit: StochasticRewardBandit, transform: RewardTransform,
                         tie_tol: float = TIE_TOL):
    """(argmax before, argmax after, shifted) for the given transform."""
    before = argmax_set(action_values(bandit), tie_tol)
    after = argmax_set(action_values(bandit, transform), tie_tol)
    return before, after, before != after
