"""Closed forms for the two-action and continuum-of-actions bandit examples.

Both examples have a single decision state leading to an absorbing goal.
The two-action case uses Q = (2, 1); the continuum case uses Q*(a) = a + 1 on
[0, 1] with Lebesgue reference measure, started from the uniform density.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy import integrate

from .envs import two_state_bandit
from .mdp import FiniteMdp

EXACT_MAX_N = 50


def scalar_b_map(p: float) -> float:
    """B(p) = 2p / (1 + p), the update of the first action's probability."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return 2 * p / (1 + p)


def scalar_iterates(p0: float, n: int) -> list:
    out = [p0]
    for _ in range(n):
        out.append(scalar_b_map(out[-1]))
    return out


def _odds(x):
    if not 0 < x <= 1:
        raise ValueError(f"argument must lie in (0, 1], got {x}")
    return (1 - x) / x


def scalar_distorted_metric(x: float, y: float) -> float:
    """|f(x) - f(y)| with f(x) = (1 - x) / x; B halves distances to 1 in it."""
    return abs(_odds(x) - _odds(y))


def _check_n(n):
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a nonnegative integer, got {n}")
    return int(n)


def continuous_policy_density(n: int, a: float) -> float:
    """pi_n(a) = (n+1)(a+1)^n / (2^(n+1) - 1)."""
    n = _check_n(n)
    a_arr = np.asarray(a, dtype=np.float64)
    if np.any((a_arr < 0) | (a_arr > 1)):
        raise ValueError("a must lie in [0, 1]")
    # (a+1)^n / 2^(n+1) = ((a+1)/2)^n / 2 keeps large n finite
    return (n + 1) * ((a_arr + 1) / 2) ** n / (2 * (1 - 0.5 ** (n + 1)))


def continuous_value(n: int, exact: bool = False):
    """V_n = (n+1)/(n+2) * (2^(n+2) - 1) / (2^(n+1) - 1)."""
    n = _check_n(n)
    if exact or n <= EXACT_MAX_N:
        val = Fraction(n + 1, n + 2) * Fraction(2 ** (n + 2) - 1, 2 ** (n + 1) - 1)
        return val if exact else float(val)
    h = 0.5 ** (n + 1)
    return (n + 1) / (n + 2) * (2 - h) / (1 - h)


def continuous_error(n: int, exact: bool = False):
    """V* - V_n = (2^(n+2) - n - 3) / ((n+2)(2^(n+1) - 1)), with V* = 2."""
    n = _check_n(n)
    if exact or n <= EXACT_MAX_N:
        val = Fraction(2 ** (n + 2) - n - 3, (n + 2) * (2 ** (n + 1) - 1))
        return val if exact else float(val)
    h = 0.5 ** (n + 1)
    return (2 - (n + 3) * h) / ((n + 2) * (1 - h))


def continuous_bl_distance(n: int, exact: bool = False):
    """Bounded-Lipschitz distance between pi_n and the point mass at a = 1.

    Same closed form as the value error: the witness l(a) = a attains the
    supremum, giving the integral of (1 - a) pi_n(a).
    """
    return continuous_error(n, exact)


def continuous_bl_quadrature(n: int) -> float:
    """Numerical integral of (1 - a) pi_n(a) over [0, 1]."""
    n = _check_n(n)
    val, _ = integrate.quad(
        lambda a: (1 - a) * continuous_policy_density(n, a), 0.0, 1.0,
        epsabs=1e-14, epsrel=1e-13, limit=200,
    )
    return val


def discretize_continuous_bandit(n_cells: int, gamma: float = 0.9) -> FiniteMdp:
    """Midpoint discretization: action i has Q(init, i) = a_i + 1.

    Cells are uniform, so the uniform initial policy carries the Lebesgue
    reference measure (mass 1/n_cells per cell).
    """
    if n_cells < 2:
        raise ValueError(f"need at least 2 cells, got {n_cells}")
    return two_state_bandit(cell_midpoints(n_cells) + 1.0, gamma,
                            name=f"continuous-bandit-{n_cells}")


def cell_midpoints(n_cells: int) -> np.ndarray:
    return (np.arange(n_cells) + 0.5) / n_cells
