"""Exact policy evaluation and optimal values for finite MDPs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .mdp import FiniteMdp, TabularPolicy

DIRECT_MAX_STATES = 2000
DEFAULT_TOL = 1e-10
DEFAULT_TIE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ValueFunctions:
    v: np.ndarray
    q: np.ndarray

    def consistency_error(self, policy: TabularPolicy) -> float:
        """max_s |v(s) - sum_a pi(a|s) q(s,a)|."""
        return float(np.max(np.abs(self.v - np.sum(policy.probs * self.q, axis=1))))


@dataclass(frozen=True, eq=False)
class StateWeighting:
    d: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.d.sum())


@dataclass(frozen=True, eq=False)
class GreedySet:
    """Boolean mask over (state, action) marking actions within ``tie_tol`` of the max."""

    mask: np.ndarray
    tie_tol: float

    @classmethod
    def from_q(cls, q, tie_tol: float = DEFAULT_TIE_TOL) -> GreedySet:
        q = np.asarray(q, dtype=np.float64)
        mask = q >= q.max(axis=1, keepdims=True) - tie_tol
        return cls(mask, tie_tol)

    def actions(self, s: int) -> set[int]:
        return set(np.flatnonzero(self.mask[s]).tolist())

    @property
    def unique(self) -> bool:
        return bool(np.all(self.mask.sum(axis=1) == 1))


def value_bound(mdp: FiniteMdp) -> float:
    """Upper bound on any value: max|R| / (1 - gamma)."""
    return float(np.max(np.abs(mdp.reward))) / (1.0 - mdp.discount)


def _stop_threshold(tol, gamma):
    # A sweep change of at most tol*(1-g)/(2g) puts the iterate within tol/2 of the fixed point.
    return tol * (1.0 - gamma) / (2.0 * gamma)


def apply_w(mdp: FiniteMdp, v) -> np.ndarray:
    """One-step lookahead: R(s,a) + gamma * E[v(s') | s, a]."""
    return kernels.active.bellman_w(mdp.transition, mdp.reward, mdp.discount, v)


def apply_t(mdp: FiniteMdp, q) -> np.ndarray:
    """Bellman optimality operator on an action-value table."""
    return apply_w(mdp, np.max(q, axis=1))


def policy_evaluation(
    mdp: FiniteMdp,
    policy: TabularPolicy,
    method: str | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = 1_000_000,
    v0=None,
) -> ValueFunctions:
    """V and Q of ``policy``.

    ``method="direct"`` solves (I - gamma P_pi) v = r_pi; ``"iterative"`` runs
    Bellman sweeps until within ``tol`` of the fixed point. The default picks
    direct for up to 2000 states.
    """
    if method is None:
        method = "direct" if mdp.n_states <= DIRECT_MAX_STATES else "iterative"
    backend = kernels.active
    p_pi, r_pi = backend.policy_average(policy.probs, mdp.transition, mdp.reward)
    gamma = mdp.discount

    if method == "direct":
        a = np.eye(mdp.n_states) - gamma * p_pi
        v = np.linalg.solve(a, r_pi)
        residual = float(np.max(np.abs(a @ v - r_pi)))
        scale = float(np.max(np.abs(r_pi))) if r_pi.size else 0.0
        # Rounding floor of the residual check itself, far below the 1e-10 bound.
        if residual > 1e-10 * scale + 1e-300:
            raise np.linalg.LinAlgError(
                f"policy evaluation residual {residual:.3g} exceeds 1e-10 * {scale:.3g}"
            )
    elif method == "iterative":
        start = np.zeros(mdp.n_states) if v0 is None else v0
        v, _, residual = backend.evaluate_sweeps(
            p_pi, r_pi, gamma, start, _stop_threshold(tol, gamma), max_iter
        )
        if residual > _stop_threshold(tol, gamma):
            raise RuntimeError(f"iterative evaluation did not converge: {residual:.3g}")
    else:
        raise ValueError(f"unknown method {method!r}")
    return ValueFunctions(v=v, q=apply_w(mdp, v))


def value_iteration(
    mdp: FiniteMdp,
    tol: float = DEFAULT_TOL,
    tie_tol: float = DEFAULT_TIE_TOL,
    max_iter: int = 1_000_000,
) -> tuple[ValueFunctions, GreedySet]:
    """Optimal V*, Q* and the greedy set of Q*.

    Value iteration runs until ``||T(q) - q|| <= tol (1-gamma)/(2 gamma)``. The
    greedy policy of that iterate is then evaluated exactly and kept when it
    is itself a fixed point of T at least as accurate as the iterate.
    """
    gamma = mdp.discount
    threshold = _stop_threshold(tol, gamma)
    q, _, residual = kernels.active.optimal_q_sweeps(
        mdp.transition, mdp.reward, gamma, np.zeros_like(mdp.reward), threshold, max_iter
    )
    if residual > threshold:
        raise RuntimeError(f"value iteration did not converge: {residual:.3g}")

    greedy_actions = np.argmax(q, axis=1)
    probs = np.zeros_like(q)
    probs[np.arange(mdp.n_states), greedy_actions] = 1.0
    exact = policy_evaluation(mdp, TabularPolicy.from_probs(probs), method="direct")
    exact_residual = float(np.max(np.abs(apply_t(mdp, exact.q) - exact.q)))
    if exact_residual <= float(np.max(np.abs(apply_t(mdp, q) - q))):
        q = exact.q
    v = q.max(axis=1)
    return ValueFunctions(v=v, q=q), GreedySet.from_q(q, tie_tol)


def discounted_state_weighting(mdp: FiniteMdp, policy: TabularPolicy) -> StateWeighting:
    """d = sum_{t>=1} gamma^(t-1) (P_pi^T)^t mu0, from its linear fixed point."""
    p_pi, _ = kernels.active.policy_average(policy.probs, mdp.transition, mdp.reward)
    gamma = mdp.discount
    pt = p_pi.T
    d = np.linalg.solve(np.eye(mdp.n_states) - gamma * pt, pt @ mdp.initial_dist)
    return StateWeighting(d=d)


def expected_return(mdp: FiniteMdp, values: ValueFunctions) -> float:
    return float(mdp.initial_dist @ values.v)
