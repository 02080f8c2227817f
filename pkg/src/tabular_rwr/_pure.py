"""Pure numpy kernels. Same signatures as the compiled ``_core`` module."""

import numpy as np
from scipy.special import logsumexp


def policy_average(probs, transition, reward):
    """Policy-averaged transition matrix and reward vector."""
    p_pi = np.einsum("sa,sat->st", probs, transition)
    r_pi = np.einsum("sa,sa->s", probs, reward)
    return p_pi, r_pi


def bellman_w(transition, reward, gamma, v):
    return reward + gamma * (transition @ v)


def evaluate_sweeps(p_pi, r_pi, gamma, v0, threshold, max_iter):
    v = np.array(v0, dtype=np.float64)
    residual = np.inf
    for sweep in range(1, max_iter + 1):
        v_new = r_pi + gamma * (p_pi @ v)
        residual = float(np.max(np.abs(v_new - v)))
        v = v_new
        if residual <= threshold:
            return v, sweep, residual
    return v, max_iter, residual


def optimal_q_sweeps(transition, reward, gamma, q0, threshold, max_iter):
    q = np.array(q0, dtype=np.float64)
    residual = np.inf
    for sweep in range(1, max_iter + 1):
        q_new = reward + gamma * (transition @ q.max(axis=1))
        residual = float(np.max(np.abs(q_new - q)))
        q = q_new
        if residual <= threshold:
            return q, sweep, residual
    return q, max_iter, residual


def b_update(log_pi, q, v):
    with np.errstate(divide="ignore"):
        raw = log_pi + np.log(q) - np.log(v)[:, None]
    return raw - logsumexp(raw, axis=1, keepdims=True)


def q_moments(log_pi, q):
    pi = np.exp(log_pi)
    mean = np.sum(pi * q, axis=1)
    var = np.sum(pi * (q - mean[:, None]) ** 2, axis=1)
    return mean, np.maximum(var, 0.0)


def rwr_step(log_pi, q, v, greedy):
    """One B-update plus the per-state diagnostics of the step.

    Returns the new log-policy, Var_pi[Q], sum_a pi'(a) Q(a) - V, and the
    probability the current policy puts outside the greedy set.
    """
    new = b_update(log_pi, q, v)
    _, var = q_moments(log_pi, q)
    lhs = np.sum(np.exp(new) * q, axis=1) - v
    nongreedy = np.sum(np.where(greedy, 0.0, np.exp(log_pi)), axis=1)
    return new, var, lhs, nongreedy
