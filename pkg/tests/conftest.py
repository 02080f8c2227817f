import numpy as np
import pytest

from tabular_rwr import kernels
from tabular_rwr.mdp import FiniteMdp

BACKENDS = ["pure"] + (["compiled"] if kernels.compiled_available() else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    be = kernels.get_backend(request.param)
    monkeypatch.setattr(kernels, "active", be)
    return be


def chain_mdp(gamma=0.5):
    """s0 -> s1 with probability 1, s1 loops; reward 1 everywhere."""
    transition = np.zeros((2, 1, 2))
    transition[:, 0, 1] = 1.0
    return FiniteMdp(transition, np.ones((2, 1)), gamma, [1.0, 0.0])


def one_state_mdp(reward=0.001, gamma=0.9):
    return FiniteMdp([[[1.0]]], [[reward]], gamma, [1.0])


# --- independent oracles -------------------------------------------------


def truncated_values(mdp, probs, steps):
    """V by summing gamma^t E[r_t] over an explicit rollout of the state distribution."""
    p_pi = np.einsum("sa,sat->st", probs, mdp.transition)
    r_pi = (probs * mdp.reward).sum(axis=1)
    v = np.zeros(mdp.n_states)
    dist = np.eye(mdp.n_states)
    disc = 1.0
    for _ in range(steps):
        v += disc * dist @ r_pi
        dist = dist @ p_pi
        disc *= mdp.discount
    return v


def truncated_weighting(mdp, probs, steps):
    """sum_{t>=1} gamma^(t-1) mu_t, with mu_t the state distribution after t steps."""
    p_pi = np.einsum("sa,sat->st", probs, mdp.transition)
    mu = mdp.initial_dist.copy()
    d = np.zeros(mdp.n_states)
    disc = 1.0
    for _ in range(steps):
        mu = mu @ p_pi
        d += disc * mu
        disc *= mdp.discount
    return d


def brute_force_optimal_values(mdp):
    """Max over every deterministic policy of its exact value, state by state."""
    import itertools

    best = np.full(mdp.n_states, -np.inf)
    for actions in itertools.product(range(mdp.n_actions), repeat=mdp.n_states):
        probs = np.zeros((mdp.n_states, mdp.n_actions))
        probs[np.arange(mdp.n_states), actions] = 1.0
        p_pi = np.einsum("sa,sat->st", probs, mdp.transition)
        r_pi = (probs * mdp.reward).sum(axis=1)
        v = np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * p_pi, r_pi)
        best = np.maximum(best, v)
    return best


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
