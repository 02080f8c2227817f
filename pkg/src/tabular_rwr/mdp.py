"""Finite MDP and tabular policy data model."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

INPUT_ROW_TOL = 1e-12
POLICY_ROW_TOL = 1e-10


class InvalidMdpError(ValueError):
    """Raised when an MDP fails validation; ``violations`` holds the report."""

    def __init__(self, violations, source=None):
        self.violations = list(violations)
        where = f" in {source}" if source else ""
        super().__init__(f"invalid MDP{where}: " + "; ".join(self.violations))


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    """Tabular MDP with deterministic rewards.

    ``transition[s, a, t]`` is the probability of moving to ``t`` after taking
    ``a`` in ``s``; ``reward[s, a]`` is the reward for that choice.
    """

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    initial_dist: np.ndarray
    name: str = field(default="mdp", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "initial_dist", _frozen(self.initial_dist))
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.reward.shape[0]

    @property
    def n_actions(self) -> int:
        return self.reward.shape[1]

    @property
    def rewards_strictly_positive(self) -> bool:
        return bool(self.reward.size) and float(self.reward.min()) > 0.0

    def replace(self, **changes) -> FiniteMdp:
        fields = dict(
            transition=self.transition,
            reward=self.reward,
            discount=self.discount,
            initial_dist=self.initial_dist,
            name=self.name,
        )
        fields.update(changes)
        return FiniteMdp(**fields)

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "discount": self.discount,
            "initial_dist": self.initial_dist.tolist(),
            "reward": self.reward.tolist(),
            "transition": self.transition.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, name: str = "mdp") -> FiniteMdp:
        return cls(
            transition=data["transition"],
            reward=data["reward"],
            discount=data["discount"],
            initial_dist=data["initial_dist"],
            name=name,
        )


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """Per-state action distribution stored as log-probabilities.

    ``-inf`` entries mean zero probability.
    """

    log_weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "log_weights", _frozen(self.log_weights))

    @classmethod
    def from_probs(cls, probs) -> TabularPolicy:
        probs = np.asarray(probs, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return cls(np.log(probs))

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def n_states(self) -> int:
        return self.log_weights.shape[0]

    @property
    def n_actions(self) -> int:
        return self.log_weights.shape[1]

    def violations(self, tol: float = POLICY_ROW_TOL) -> list[str]:
        out = []
        lw = self.log_weights
        if np.isnan(lw).any():
            for s, a in zip(*np.nonzero(np.isnan(lw))):
                out.append(f"policy entry ({s},{a}) is NaN")
            return out
        if np.isposinf(lw).any():
            out.append("policy has +inf log-weight")
            return out
        sums = np.exp(lw).sum(axis=1)
        for s in np.nonzero(np.abs(sums - 1.0) > tol)[0]:
            out.append(f"policy row {s} sums to {sums[s]:.12g}")
        return out


def validate(mdp: FiniteMdp, require_positive_rewards: bool = False) -> list[str]:
    """Return every invariant violation of ``mdp``; empty when valid."""
    out = []
    P, R, mu = mdp.transition, mdp.reward, mdp.initial_dist
    if R.ndim != 2 or P.ndim != 3 or mu.ndim != 1:
        return [
            f"bad shapes: transition {P.shape}, reward {R.shape}, "
            f"initial_dist {mu.shape}"
        ]
    n_s, n_a = R.shape
    if n_s < 1 or n_a < 1:
        out.append(f"need at least one state and one action, got {R.shape}")
    if P.shape != (n_s, n_a, n_s):
        out.append(f"transition shape {P.shape} != {(n_s, n_a, n_s)}")
    if mu.shape != (n_s,):
        out.append(f"initial_dist shape {mu.shape} != {(n_s,)}")
    if out:
        return out

    if not np.isfinite(P).all():
        out.append("transition has non-finite entries")
    if not np.isfinite(R).all():
        out.append("reward has non-finite entries")
    for s, a, t in zip(*np.nonzero(P < 0)):
        out.append(f"transition ({s},{a},{t}) is negative: {P[s, a, t]:.12g}")
    sums = P.sum(axis=2)
    for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > INPUT_ROW_TOL)):
        out.append(f"row ({s},{a}) sums to {sums[s, a]:.12g}")

    for s in np.nonzero(mu < 0)[0]:
        out.append(f"initial_dist[{s}] is negative: {mu[s]:.12g}")
    if abs(mu.sum() - 1.0) > INPUT_ROW_TOL:
        out.append(f"initial_dist sums to {mu.sum():.12g}")

    if not 0.0 < mdp.discount < 1.0:
        out.append(f"discount {mdp.discount} not in (0, 1)")

    if require_positive_rewards and not mdp.rewards_strictly_positive:
        s, a = np.unravel_index(np.argmin(R), R.shape)
        out.append(f"reward ({s},{a}) = {R[s, a]:.12g} is not strictly positive")
    return out


def shift_rewards_linear(mdp: FiniteMdp, scale: float, offset: float) -> FiniteMdp:
    """Apply ``r -> scale * r + offset`` to every reward."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return mdp.replace(reward=scale * mdp.reward + offset)


def uniform_policy(mdp: FiniteMdp) -> TabularPolicy:
    shape = (mdp.n_states, mdp.n_actions)
    return TabularPolicy(np.full(shape, -np.log(mdp.n_actions)))


def random_policy(mdp: FiniteMdp, seed: int) -> TabularPolicy:
    """Rows drawn from the flat Dirichlet, i.e. uniformly on the simplex."""
    rng = np.random.default_rng(seed)
    # Exponential spacings give the flat Dirichlet; stay in log space so that
    # no row can contain an exact zero.
    log_e = np.log(rng.standard_exponential((mdp.n_states, mdp.n_actions)))
    return TabularPolicy(log_e - logsumexp(log_e, axis=1, keepdims=True))


def deterministic_policy(mdp: FiniteMdp, actions) -> TabularPolicy:
    probs = np.zeros((mdp.n_states, mdp.n_actions))
    probs[np.arange(mdp.n_states), np.asarray(actions)] = 1.0
    return TabularPolicy.from_probs(probs)


def load_mdp(path, require_positive_rewards: bool = False) -> FiniteMdp:
    """Read an MDP JSON file; raise :class:`InvalidMdpError` if invalid."""
    path = Path(path)
    with path.open() as fh:
        data = json.load(fh)
    try:
        mdp = FiniteMdp.from_dict(data, name=path.stem)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidMdpError([f"malformed MDP file: {exc!r}"], path) from exc
    report = validate(mdp, require_positive_rewards)
    declared = (data.get("n_states"), data.get("n_actions"))
    if declared != (mdp.n_states, mdp.n_actions):
        report.append(f"declared sizes {declared} != {(mdp.n_states, mdp.n_actions)}")
    if report:
        raise InvalidMdpError(report, path)
    return mdp


def save_mdp(mdp: FiniteMdp, path) -> None:
    with Path(path).open("w") as fh:
        json.dump(mdp.to_dict(), fh)
