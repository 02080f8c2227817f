import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabular_rwr import kernels
from tabular_rwr.envs import four_room, two_action_mdp, random_mdp
from tabular_rwr.evaluation import ValueFunctions, policy_evaluation, value_iteration
from tabular_rwr.mdp import TabularPolicy, deterministic_policy, random_policy, uniform_policy
from tabular_rwr.rwr import (
    CSV_COLUMNS,
    ConsistencyError,
    IterationTrace,
    PositivityError,
    b_operator,
    identity_relative_error,
    one_step_improvement_identity,
    run_rwr,
    variance_of_q,
)

from conftest import one_state_mdp


def single_state(q, probs):
    q = np.atleast_2d(np.asarray(q, dtype=float))
    pi = TabularPolicy.from_probs(np.atleast_2d(probs))
    v = np.sum(pi.probs * q, axis=1)
    return pi, ValueFunctions(v, q)


class TestBOperator:
    def test_two_action_step(self, backend):
        pi, vf = single_state([2.0, 1.0], [0.5, 0.5])
        np.testing.assert_allclose(b_operator(pi, vf).probs, [[2 / 3, 1 / 3]], rtol=1e-15)

    def test_deterministic_fixed_point(self, backend):
        pi, vf = single_state([3.0, 7.0], [1.0, 0.0])
        np.testing.assert_array_equal(b_operator(pi, vf).probs, [[1.0, 0.0]])

    def test_constant_q(self, backend):
        pi, vf = single_state([4.0, 4.0, 4.0], [0.2, 0.3, 0.5])
        np.testing.assert_allclose(b_operator(pi, vf).probs, pi.probs, rtol=1e-14)

    def test_rejects_nonpositive(self, backend):
        pi, vf = single_state([1.0, -1.0], [0.5, 0.5])
        with pytest.raises(PositivityError):
            b_operator(pi, vf)
        pi, vf = single_state([0.0, 0.0], [0.5, 0.5])
        with pytest.raises(PositivityError):
            b_operator(pi, vf)

    def test_long_iteration_stays_normalized(self, backend):
        # 5000 updates with ratio 1/2 drive the losing action to ~2^-5000:
        # far below the smallest double, but finite in log space.
        pi, vf = single_state([2.0, 1.0], [0.5, 0.5])
        for _ in range(5000):
            pi = b_operator(pi, ValueFunctions(np.sum(pi.probs * vf.q, axis=1), vf.q))
        assert np.isfinite(pi.log_weights).all()
        assert pi.log_weights[0, 1] == pytest.approx(-5000 * np.log(2), rel=1e-9)
        assert pi.violations() == []


class TestVarianceAndIdentity:
    def test_variance_example(self, backend):
        pi, vf = single_state([2.0, 1.0], [0.5, 0.5])
        assert variance_of_q(pi, vf)[0] == pytest.approx(0.25, rel=1e-15)

    @pytest.mark.parametrize("q,probs", [([2.0, 1.0], [1.0, 0.0]), ([3.0, 3.0], [0.4, 0.6])])
    def test_zero_variance(self, q, probs, backend):
        pi, vf = single_state(q, probs)
        assert variance_of_q(pi, vf)[0] == pytest.approx(0.0, abs=1e-15)
        lhs, rhs = one_step_improvement_identity(pi, vf)
        assert lhs[0] == pytest.approx(0.0, abs=1e-15)
        assert rhs[0] == pytest.approx(0.0, abs=1e-15)

    def test_identity_example(self, backend):
        pi, vf = single_state([2.0, 1.0], [0.5, 0.5])
        lhs, rhs = one_step_improvement_identity(pi, vf)
        assert lhs[0] == pytest.approx(1 / 6, rel=1e-14)
        assert rhs[0] == pytest.approx(1 / 6, rel=1e-14)

    def test_relative_error_floor(self):
        err = identity_relative_error(np.array([1e-18]), np.array([0.0]), np.array([1.0]))
        assert err[0] < 1e-9


class TestRun:
    def test_two_action_trajectory(self, backend):
        mdp = two_action_mdp()
        init = TabularPolicy.from_probs([[0.5, 0.5], [0.5, 0.5]])
        trace = run_rwr(mdp, init, max_iters=30, stop_eps=-1.0, keep_policies=True)
        p = 0.5
        for n, pi in enumerate(trace.policies):
            assert pi.probs[0, 0] == pytest.approx(p, abs=1e-10), n
            # V* - V_n equals 1 - p_n
            assert trace.records[n].sup_error == pytest.approx(1 - p, abs=1e-12)
            p = 2 * p / (1 + p)
        np.testing.assert_allclose(
            [pi.probs[0, 0] for pi in trace.policies[:4]], [0.5, 2 / 3, 0.8, 8 / 9], rtol=1e-14
        )

    def test_greedy_start_is_constant(self, backend):
        mdp = random_mdp(6, 3, seed=9)
        optimal = value_iteration(mdp)
        pi = deterministic_policy(mdp, np.argmax(optimal[0].q, axis=1))
        trace = run_rwr(mdp, pi, max_iters=5, stop_eps=-1.0, optimal=optimal,
                        keep_policies=True)
        assert len(trace) == 6
        for p in trace.policies:
            np.testing.assert_array_equal(p.probs, pi.probs)
        assert np.ptp(trace.column("rmsve")) == 0.0
        assert trace.records[-1].min_greedy_mass == 1.0

    def test_four_room_uniform(self, backend):
        mdp = four_room()
        trace = run_rwr(mdp, uniform_policy(mdp), max_iters=2000, stop_eps=1e-9)
        rm = trace.column("rmsve")
        assert rm[-1] < 0.01
        active = rm > 1e-8
        assert np.all(np.diff(rm[active]) < 0)
        assert trace.stop_reason in ("sup_error", "greedy_mass")

    def test_requires_positive_rewards(self):
        mdp = one_state_mdp(reward=0.0)
        with pytest.raises(PositivityError):
            run_rwr(mdp, uniform_policy(mdp))

    def test_rejects_invalid_initial_policy(self):
        mdp = two_action_mdp()
        with pytest.raises(ValueError):
            run_rwr(mdp, TabularPolicy.from_probs([[0.5, 0.6], [0.5, 0.5]]))

    def test_zero_probability_stays_zero(self):
        mdp = two_action_mdp()
        init = TabularPolicy.from_probs([[0.0, 1.0], [0.5, 0.5]])
        trace = run_rwr(mdp, init, max_iters=10, stop_eps=-1.0, keep_policies=True)
        assert all(p.probs[0, 0] == 0.0 for p in trace.policies)
        assert trace.records[-1].sup_error == pytest.approx(1.0, rel=1e-12)

    def test_iterative_mode_matches_direct(self):
        mdp = random_mdp(10, 3, seed=4)
        init = random_policy(mdp, 4)
        a = run_rwr(mdp, init, max_iters=50, stop_eps=-1.0)
        b = run_rwr(mdp, init, max_iters=50, stop_eps=-1.0, eval_method="iterative",
                    eval_tol=1e-11)
        np.testing.assert_allclose(a.sup_errors, b.sup_errors, rtol=0, atol=1e-9)

    def test_decrease_is_reported(self, monkeypatch):
        class Inverted:
            """Divides by Q instead of multiplying: a deliberately wrong update."""

            def __init__(self, inner):
                self.inner = inner

            def __getattr__(self, name):
                return getattr(self.inner, name)

            def rwr_step(self, log_pi, q, v, greedy):
                new, var, lhs, ng = self.inner.rwr_step(log_pi, 1.0 / q, 1.0 / v, greedy)
                return new, var, lhs, ng

        monkeypatch.setattr(kernels, "active", Inverted(kernels.active))
        mdp = two_action_mdp()
        with pytest.raises(ConsistencyError):
            run_rwr(mdp, uniform_policy(mdp), max_iters=5, stop_eps=-1.0)

    def test_csv_round_trip(self, tmp_path):
        mdp = two_action_mdp()
        trace = run_rwr(mdp, uniform_policy(mdp), max_iters=8, stop_eps=-1.0)
        path = tmp_path / "trace.csv"
        trace.to_csv(path, header={"seed": 3})
        lines = path.read_text().splitlines()
        assert lines[0] == "# seed=3"
        assert lines[1].split(",") == CSV_COLUMNS
        back = IterationTrace.from_csv(path)
        np.testing.assert_array_equal(back.sup_errors, trace.sup_errors)
        np.testing.assert_array_equal(back.column("return"), trace.column("return"))


def _check_invariants(mdp, init, max_iters=10_000):
    trace = run_rwr(mdp, init, max_iters=max_iters, stop_eps=1e-7, keep_policies=True)
    vals = trace.values
    for n in range(1, len(vals)):
        assert np.all(vals[n].v >= vals[n - 1].v - 1e-9)
        assert np.all(vals[n].q >= vals[n - 1].q - 1e-9)
        var = variance_of_q(trace.policies[n - 1], vals[n - 1])
        strict = var > 1e-6
        assert np.all(vals[n].v[strict] - vals[n - 1].v[strict] > 0)
    for pi, vf in zip(trace.policies, vals):
        assert pi.violations() == []
        lhs, rhs = one_step_improvement_identity(pi, vf)
        assert np.all(identity_relative_error(lhs, rhs, vf.v) <= 1e-9)
    assert max(r.identity_error for r in trace.records) <= 1e-9
    g = trace.column("min_greedy_mass")
    assert np.all((g >= 0) & (g <= 1 + 1e-10))
    return trace


@pytest.mark.slow
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), n_s=st.integers(1, 12), n_a=st.integers(1, 4))
def test_engine_invariants_random(seed, n_s, n_a):
    mdp = random_mdp(n_s, n_a, seed)
    _check_invariants(mdp, random_policy(mdp, seed))


def convergence_corpus(count=100, max_lambda=0.998):
    """Random MDPs (<= 50 states) whose worst non-greedy ratio leaves room to converge.

    The asymptotic error ratio is max Q*(s,a)/V*(s) over non-greedy actions;
    near-ties push it to 1 and no fixed iteration budget suffices.
    """
    out = []
    seed = 0
    while len(out) < count:
        rng = np.random.default_rng(seed)
        n_s, n_a = int(rng.integers(2, 51)), int(rng.integers(2, 5))
        mdp = random_mdp(n_s, n_a, seed)
        optimal = value_iteration(mdp)
        vf, greedy = optimal
        ratios = np.where(greedy.mask, 0.0, vf.q / vf.v[:, None])
        if ratios.max() <= max_lambda:
            out.append((seed, mdp, optimal))
        seed += 1
    return out


CORPUS = convergence_corpus()


@pytest.mark.slow
@pytest.mark.parametrize("seed,mdp,optimal", CORPUS, ids=[str(c[0]) for c in CORPUS])
def test_convergence_random(seed, mdp, optimal):
    trace = run_rwr(mdp, random_policy(mdp, seed), max_iters=10_000, stop_eps=1e-8,
                    optimal=optimal)
    assert trace.records[-1].sup_error < 1e-6
    if optimal[1].unique:
        assert trace.records[-1].min_greedy_mass > 1 - 1e-6
    sup = trace.sup_errors
    rm = trace.column("rmsve")
    assert np.all(np.diff(sup) <= 1e-12)
    assert np.all(np.diff(rm) <= 1e-12)
    assert np.all(np.nan_to_num(trace.column("min_improvement"), nan=0.0) >= -1e-9)
