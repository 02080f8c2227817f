# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the RWR iteration. Mirrors ``_pure``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, INFINITY

cnp.import_array()


def policy_average(const double[:, ::1] probs, const double[:, :, ::1] transition,
                   const double[:, ::1] reward):
    cdef Py_ssize_t n_s = probs.shape[0], n_a = probs.shape[1]
    cdef Py_ssize_t s, a, t
    cdef double w
    p_arr = np.zeros((n_s, n_s))
    r_arr = np.zeros(n_s)
    cdef double[:, ::1] p_pi = p_arr
    cdef double[::1] r_pi = r_arr
    for s in range(n_s):
        for a in range(n_a):
            w = probs[s, a]
            if w == 0.0:
                continue
            r_pi[s] += w * reward[s, a]
            for t in range(n_s):
                p_pi[s, t] += w * transition[s, a, t]
    return p_arr, r_arr


def bellman_w(const double[:, :, ::1] transition, const double[:, ::1] reward,
              double gamma, const double[::1] v):
    cdef Py_ssize_t n_s = reward.shape[0], n_a = reward.shape[1]
    cdef Py_ssize_t s, a, t
    cdef double acc
    out_arr = np.empty((n_s, n_a))
    cdef double[:, ::1] out = out_arr
    for s in range(n_s):
        for a in range(n_a):
            acc = 0.0
            for t in range(n_s):
                acc += transition[s, a, t] * v[t]
            out[s, a] = reward[s, a] + gamma * acc
    return out_arr


def evaluate_sweeps(const double[:, ::1] p_pi, const double[::1] r_pi, double gamma,
                    v0, double threshold, long max_iter):
    cdef Py_ssize_t n_s = r_pi.shape[0]
    cdef Py_ssize_t s, t
    cdef long sweep = 0
    cdef double acc, residual = INFINITY, diff
    a_arr = np.array(v0, dtype=np.float64)
    b_arr = np.empty(n_s)
    cdef double[::1] v = a_arr
    cdef double[::1] v_new = b_arr
    cdef double[::1] tmp
    while sweep < max_iter:
        sweep += 1
        residual = 0.0
        for s in range(n_s):
            acc = 0.0
            for t in range(n_s):
                acc += p_pi[s, t] * v[t]
            v_new[s] = r_pi[s] + gamma * acc
            diff = fabs(v_new[s] - v[s])
            if diff > residual:
                residual = diff
        tmp = v
        v = v_new
        v_new = tmp
        if residual <= threshold:
            break
    return np.asarray(v).copy(), sweep, residual


def optimal_q_sweeps(const double[:, :, ::1] transition, const double[:, ::1] reward,
                     double gamma, q0, double threshold, long max_iter):
    cdef Py_ssize_t n_s = reward.shape[0], n_a = reward.shape[1]
    cdef Py_ssize_t s, a, t
    cdef long sweep = 0
    cdef double acc, best, residual = INFINITY, diff
    a_arr = np.array(q0, dtype=np.float64)
    b_arr = np.empty((n_s, n_a))
    cdef double[:, ::1] q = a_arr
    cdef double[:, ::1] q_new = b_arr
    cdef double[:, ::1] tmp
    cdef double[::1] vmax = np.empty(n_s)
    while sweep < max_iter:
        sweep += 1
        for s in range(n_s):
            best = q[s, 0]
            for a in range(1, n_a):
                if q[s, a] > best:
                    best = q[s, a]
            vmax[s] = best
        residual = 0.0
        for s in range(n_s):
            for a in range(n_a):
                acc = 0.0
                for t in range(n_s):
                    acc += transition[s, a, t] * vmax[t]
                q_new[s, a] = reward[s, a] + gamma * acc
                diff = fabs(q_new[s, a] - q[s, a])
                if diff > residual:
                    residual = diff
        tmp = q
        q = q_new
        q_new = tmp
        if residual <= threshold:
            break
    return np.asarray(q).copy(), sweep, residual


cdef inline void _b_row(const double[:, ::1] log_pi, const double[:, ::1] q,
                        const double[::1] v, double[:, ::1] out, Py_ssize_t s) nogil:
    cdef Py_ssize_t a, n_a = log_pi.shape[1]
    cdef double m = -INFINITY, acc = 0.0, lv = log(v[s]), x
    for a in range(n_a):
        x = log_pi[s, a] + log(q[s, a]) - lv
        out[s, a] = x
        if x > m:
            m = x
    for a in range(n_a):
        acc += exp(out[s, a] - m)
    m += log(acc)
    for a in range(n_a):
        out[s, a] -= m


def b_update(const double[:, ::1] log_pi, const double[:, ::1] q, const double[::1] v):
    cdef Py_ssize_t s, n_s = log_pi.shape[0]
    out_arr = np.empty((n_s, log_pi.shape[1]))
    cdef double[:, ::1] out = out_arr
    for s in range(n_s):
        _b_row(log_pi, q, v, out, s)
    return out_arr


cdef inline void _moments_row(const double[:, ::1] log_pi, const double[:, ::1] q,
                              Py_ssize_t s, double* mean, double* var) nogil:
    cdef Py_ssize_t a, n_a = log_pi.shape[1]
    cdef double m = 0.0, vv = 0.0, p, d
    for a in range(n_a):
        m += exp(log_pi[s, a]) * q[s, a]
    for a in range(n_a):
        p = exp(log_pi[s, a])
        d = q[s, a] - m
        vv += p * d * d
    mean[0] = m
    var[0] = vv if vv > 0.0 else 0.0


def q_moments(const double[:, ::1] log_pi, const double[:, ::1] q):
    cdef Py_ssize_t s, n_s = log_pi.shape[0]
    mean_arr = np.empty(n_s)
    var_arr = np.empty(n_s)
    cdef double[::1] mean = mean_arr
    cdef double[::1] var = var_arr
    for s in range(n_s):
        _moments_row(log_pi, q, s, &mean[s], &var[s])
    return mean_arr, var_arr


def rwr_step(const double[:, ::1] log_pi, const double[:, ::1] q, const double[::1] v,
             const unsigned char[:, ::1] greedy):
    cdef Py_ssize_t s, a, n_s = log_pi.shape[0], n_a = log_pi.shape[1]
    cdef double mean, acc, ng
    new_arr = np.empty((n_s, n_a))
    var_arr = np.empty(n_s)
    lhs_arr = np.empty(n_s)
    ng_arr = np.empty(n_s)
    cdef double[:, ::1] new = new_arr
    cdef double[::1] var = var_arr
    cdef double[::1] lhs = lhs_arr
    cdef double[::1] nongreedy = ng_arr
    for s in range(n_s):
        _b_row(log_pi, q, v, new, s)
        _moments_row(log_pi, q, s, &mean, &var[s])
        acc = 0.0
        ng = 0.0
        for a in range(n_a):
            acc += exp(new[s, a]) * q[s, a]
            if not greedy[s, a]:
                ng += exp(log_pi[s, a])
        lhs[s] = acc - v[s]
        nongreedy[s] = ng
    return new_arr, var_arr, lhs_arr, ng_arr
