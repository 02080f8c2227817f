"""Convergence-rate constants and empirical rate estimates."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .evaluation import GreedySet
from .rwr import IterationTrace

EPS = np.finfo(np.float64).eps
ENVELOPE_SLACK = 1.05


class InsufficientTraceError(ValueError):
    pass


@dataclass
class RateReport:
    lambda_m: float = 0.0
    alpha_m: float = 0.0
    empirical_ratios: list[float] = field(default_factory=list)
    tail_ratio: float | None = None
    envelope_c: float | None = None
    envelope_holds: bool | None = None
    order: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def alpha_from_lambda(lambda_m: float) -> float:
    return 2.0 * lambda_m / (0.9 + 1.1 * lambda_m)


def bound_constants(q_star, v_star, greedy: GreedySet) -> RateReport:
    """lambda_m: worst non-greedy Q*(s,a)/V*(s); alpha_m the induced rate bound."""
    q_star = np.asarray(q_star, dtype=np.float64)
    v_star = np.asarray(v_star, dtype=np.float64)
    if np.any(v_star <= 0):
        raise ValueError("V* must be strictly positive")
    ratios = np.where(greedy.mask, -np.inf, q_star / v_star[:, None])
    lam = float(ratios.max()) if np.isfinite(ratios.max()) else 0.0
    lam = max(lam, 0.0)
    return RateReport(lambda_m=lam, alpha_m=alpha_from_lambda(lam))


def usable_errors(errors, v_scale: float = 1.0) -> np.ndarray:
    """Mask of sup-errors above the rounding floor 100 eps * max(1, |V*|)."""
    floor = 100 * EPS * max(1.0, v_scale)
    return np.asarray(errors) > floor


def _v_scale(trace: IterationTrace) -> float:
    if trace.v_star is None:
        return 1.0
    return float(np.max(np.abs(trace.v_star)))


def empirical_rate(trace: IterationTrace, tail_k: int = 10,
                   report: RateReport | None = None) -> RateReport:
    """Fill successive error ratios e_{n+1}/e_n and their tail median."""
    errors = trace.sup_errors
    ok = usable_errors(errors, _v_scale(trace))
    n_ok = 0
    while n_ok < len(errors) and ok[n_ok]:
        n_ok += 1
    e = errors[:n_ok]
    ratios = e[1:] / e[:-1]
    if ratios.size < 1 or n_ok < 2:
        raise InsufficientTraceError("insufficient trace")
    report = report if report is not None else RateReport()
    report.empirical_ratios = ratios.tolist()
    report.tail_ratio = float(np.median(ratios[-tail_k:]))
    report.order = "sub-linear" if report.tail_ratio > 0.99 else "linear"
    return report


def verify_envelope(trace: IterationTrace, alpha_m: float) -> tuple[bool, float]:
    """Fit C with e_n <= C alpha_m^n on the trace tail.

    The tail is the second half of the iterations whose error is above the
    rounding floor. The envelope holds when e_n / alpha_m^n never grows by
    more than 5% from one tail iteration to the next.
    """
    errors = trace.sup_errors
    if errors.size == 0:
        raise ValueError("empty trace")
    if np.all(errors == 0):
        return True, 0.0
    ok = usable_errors(errors, _v_scale(trace))
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return True, 0.0
    if alpha_m <= 0:
        return False, float("inf")
    tail = idx[idx.size // 2:]
    # log domain keeps alpha^n from underflowing
    log_g = np.log(errors[tail]) - tail * np.log(alpha_m)
    c = float(np.exp(log_g.max()))
    steps = np.diff(log_g)
    holds = bool(np.isfinite(c) and np.all(steps <= np.log(ENVELOPE_SLACK)))
    return holds, c
