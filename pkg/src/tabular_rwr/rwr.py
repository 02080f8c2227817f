"""The RWR policy update and the exact iteration loop."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import kernels
from .evaluation import (
    GreedySet,
    ValueFunctions,
    expected_return,
    policy_evaluation,
    value_iteration,
)
from .mdp import FiniteMdp, TabularPolicy

MONOTONE_SLACK = 1e-9
IDENTITY_FLOOR = 1e-4


class PositivityError(ValueError):
    """The update needs V(s) > 0 and Q(s, a) > 0 everywhere."""


class ConsistencyError(RuntimeError):
    """An iteration broke monotone improvement; indicates a bug."""


def _check_positive(values: ValueFunctions):
    if np.any(values.v <= 0):
        s = int(np.argmin(values.v))
        raise PositivityError(f"V({s}) = {values.v[s]:.6g} is not positive")
    if np.any(values.q <= 0):
        s, a = np.unravel_index(np.argmin(values.q), values.q.shape)
        raise PositivityError(f"Q({s},{a}) = {values.q[s, a]:.6g} is not positive")


def b_operator(policy: TabularPolicy, values: ValueFunctions) -> TabularPolicy:
    """pi'(a|s) = Q(s,a) pi(a|s) / V(s), renormalized in log space."""
    _check_positive(values)
    return TabularPolicy(kernels.active.b_update(policy.log_weights, values.q, values.v))


def variance_of_q(policy: TabularPolicy, values: ValueFunctions) -> np.ndarray:
    """Var_{a ~ pi(.|s)}[Q(s, a)] per state."""
    _, var = kernels.active.q_moments(policy.log_weights, values.q)
    return var


def one_step_improvement_identity(policy: TabularPolicy, values: ValueFunctions):
    """Both sides of sum_a (B pi)(a|s) Q(s,a) - V(s) = Var[Q(s,.)] / V(s)."""
    new = b_operator(policy, values)
    lhs = np.sum(new.probs * values.q, axis=1) - values.v
    rhs = variance_of_q(policy, values) / values.v
    return lhs, rhs


def identity_relative_error(lhs, rhs, v) -> np.ndarray:
    """|lhs - rhs| relative to max(|lhs|, |rhs|), floored at 1e-4 V(s).

    The floor only matters once the variance is negligible next to V(s),
    where both sides are rounding noise on a value of size V(s).
    """
    denom = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), IDENTITY_FLOOR * np.abs(v))
    return np.abs(lhs - rhs) / denom


@dataclass
class IterationRecord:
    iter: int
    sup_error: float
    rmsve: float
    ret: float
    min_improvement: float
    max_variance: float
    mean_variance: float
    min_greedy_mass: float
    max_nongreedy_mass: float
    identity_error: float


CSV_COLUMNS = [
    "iter", "sup_error", "rmsve", "return", "min_improvement",
    "max_variance", "mean_variance", "min_greedy_mass",
]


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    v_star: np.ndarray | None = None
    greedy: GreedySet | None = None
    policies: list[TabularPolicy] | None = None
    values: list[ValueFunctions] | None = None
    stop_reason: str = ""

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        if name == "return":
            name = "ret"
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    @property
    def sup_errors(self) -> np.ndarray:
        return self.column("sup_error")

    def to_csv(self, path, header: dict | None = None) -> None:
        with Path(path).open("w", newline="") as fh:
            for key, val in (header or {}).items():
                fh.write(f"# {key}={val}\n")
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in self.records:
                row = astuple(rec)[: len(CSV_COLUMNS)]
                writer.writerow([row[0]] + [repr(float(x)) for x in row[1:]])

    @classmethod
    def from_csv(cls, path) -> IterationTrace:
        with Path(path).open() as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        names = [f.name for f in fields(IterationRecord)]
        records = []
        for row in rows:
            vals = [int(row["iter"])] + [float(row[c]) for c in CSV_COLUMNS[1:]]
            vals += [math.nan] * (len(names) - len(vals))
            records.append(IterationRecord(*vals))
        return cls(records=records)


def run_rwr(
    mdp: FiniteMdp,
    initial: TabularPolicy,
    max_iters: int = 10_000,
    stop_eps: float = 1e-10,
    eval_tol: float = 1e-10,
    eval_method: str = "direct",
    optimal: tuple[ValueFunctions, GreedySet] | None = None,
    keep_policies: bool = False,
    check: bool = True,
) -> IterationTrace:
    """Iterate pi <- B(pi) with exact evaluation, recording diagnostics.

    Convergence to the optimum needs every initial probability positive;
    zero-probability actions are allowed and stay at zero.

    Record ``n`` describes pi_n (record 0 is the initial policy); its
    ``min_improvement`` is min_s V_n(s) - V_{n-1}(s) (NaN for n = 0). Stops
    after ``max_iters`` updates, or once the sup-error or the largest
    non-greedy mass drops to ``stop_eps``.

    ``eval_method="iterative"`` warm-starts Bellman sweeps from the previous
    values; monotonicity is then only guaranteed up to ``eval_tol``.
    """
    if not mdp.rewards_strictly_positive:
        raise PositivityError("rewards must be strictly positive")
    problems = initial.violations()
    if problems:
        raise ValueError("invalid initial policy: " + "; ".join(problems))

    if optimal is None:
        optimal = value_iteration(mdp)
    opt_values, greedy = optimal
    v_star = opt_values.v
    backend = kernels.active
    slack = MONOTONE_SLACK if eval_method == "direct" else MONOTONE_SLACK + 2 * eval_tol

    trace = IterationTrace(v_star=v_star, greedy=greedy)
    if keep_policies:
        trace.policies, trace.values = [], []

    policy = initial
    values = policy_evaluation(mdp, policy, method=eval_method, tol=eval_tol)
    prev = None
    for n in range(max_iters + 1):
        _check_positive(values)
        new_lw, var, lhs, nongreedy = backend.rwr_step(
            policy.log_weights, values.q, values.v, greedy.mask
        )
        diff = v_star - values.v
        sup_error = float(np.max(np.abs(diff)))
        if prev is None:
            min_imp = math.nan
        else:
            min_imp = float(np.min(values.v - prev.v))
            q_imp = float(np.min(values.q - prev.q))
            if check and (min_imp < -slack or q_imp < -slack):
                raise ConsistencyError(
                    f"iteration {n}: value decreased (V by {-min_imp:.3g}, "
                    f"Q by {-q_imp:.3g})"
                )
        rel = identity_relative_error(lhs, var / values.v, values.v)
        max_ng = float(np.max(nongreedy))
        trace.records.append(
            IterationRecord(
                iter=n,
                sup_error=sup_error,
                rmsve=float(np.sqrt(np.mean(diff**2))),
                ret=expected_return(mdp, values),
                min_improvement=min_imp,
                max_variance=float(np.max(var)),
                mean_variance=float(np.mean(var)),
                min_greedy_mass=float(np.min(1.0 - nongreedy)),
                max_nongreedy_mass=max_ng,
                identity_error=float(np.max(rel)),
            )
        )
        if keep_policies:
            trace.policies.append(policy)
            trace.values.append(values)

        if sup_error <= stop_eps:
            trace.stop_reason = "sup_error"
            break
        if max_ng <= stop_eps:
            trace.stop_reason = "greedy_mass"
            break
        if n == max_iters:
            trace.stop_reason = "max_iters"
            break

        policy = TabularPolicy(new_lw)
        prev = values
        values = policy_evaluation(
            mdp, policy, method=eval_method, tol=eval_tol,
            v0=values.v if eval_method == "iterative" else None,
        )
    return trace
