"""Backend selection for the hot loops.

The compiled ``_core`` extension is used when it was built; otherwise the
numpy implementation in ``_pure`` is used. Setting ``TABULAR_RWR_PURE=1``
forces the fallback.
"""

import os

import numpy as np

from . import _pure


def _load_compiled():
    try:
        from . import _core
    except ImportError:
        return None
    return _core


_compiled = _load_compiled()
_force_pure = os.environ.get("TABULAR_RWR_PURE", "") not in ("", "0")
BACKEND = "compiled" if _compiled is not None and not _force_pure else "pure"


# Dense matvecs above this many entries go to numpy: BLAS beats the scalar loops.
BLAS_CUTOFF = 1 << 15


def compiled_available() -> bool:
    return _compiled is not None


class _Backend:
    """Normalizes array layout before delegating to one kernel module."""

    def __init__(self, module):
        self.module = module
        self.name = "pure" if module is _pure else "compiled"

    def _dense(self, matrix):
        return _pure if matrix.size > BLAS_CUTOFF else self.module

    def policy_average(self, probs, transition, reward):
        return self.module.policy_average(_c(probs), _c(transition), _c(reward))

    def bellman_w(self, transition, reward, gamma, v):
        return self._dense(transition).bellman_w(_c(transition), _c(reward), float(gamma), _c(v))

    def evaluate_sweeps(self, p_pi, r_pi, gamma, v0, threshold, max_iter):
        return self._dense(p_pi).evaluate_sweeps(
            _c(p_pi), _c(r_pi), float(gamma), _c(v0), float(threshold), int(max_iter)
        )

    def optimal_q_sweeps(self, transition, reward, gamma, q0, threshold, max_iter):
        return self._dense(transition).optimal_q_sweeps(
            _c(transition), _c(reward), float(gamma), _c(q0), float(threshold),
            int(max_iter),
        )

    def b_update(self, log_pi, q, v):
        return self.module.b_update(_c(log_pi), _c(q), _c(v))

    def q_moments(self, log_pi, q):
        return self.module.q_moments(_c(log_pi), _c(q))

    def rwr_step(self, log_pi, q, v, greedy):
        greedy = np.ascontiguousarray(greedy, dtype=bool)
        if self.module is not _pure:
            greedy = greedy.view(np.uint8)
        return self.module.rwr_step(_c(log_pi), _c(q), _c(v), greedy)


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def get_backend(name: str | None = None) -> _Backend:
    """Return the named backend (``"pure"`` or ``"compiled"``), default active."""
    if name is None:
        name = BACKEND
    if name == "pure":
        return _Backend(_pure)
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _Backend(_compiled)
    raise ValueError(f"unknown backend {name!r}")


active = get_backend()
