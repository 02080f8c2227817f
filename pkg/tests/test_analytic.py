from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from tabular_rwr.analytic import (
    cell_midpoints,
    continuous_bl_distance,
    continuous_bl_quadrature,
    continuous_error,
    continuous_policy_density,
    continuous_value,
    discretize_continuous_bandit,
    scalar_b_map,
    scalar_distorted_metric,
    scalar_iterates,
)
from tabular_rwr.envs import two_action_mdp
from tabular_rwr.evaluation import policy_evaluation
from tabular_rwr.mdp import TabularPolicy, uniform_policy
from tabular_rwr.rwr import run_rwr


class TestScalarMap:
    def test_values(self):
        assert scalar_b_map(0.5) == pytest.approx(2 / 3, rel=1e-15)
        assert scalar_b_map(0.0) == 0.0
        assert scalar_b_map(1.0) == 1.0
        assert scalar_b_map(2 / 3) == pytest.approx(0.8, rel=1e-15)

    @pytest.mark.parametrize("p", [-0.1, 1.1])
    def test_domain(self, p):
        with pytest.raises(ValueError):
            scalar_b_map(p)

    def test_improves(self):
        grid = np.linspace(0, 1, 1001)
        out = np.array([scalar_b_map(p) for p in grid])
        assert np.all((out >= 0) & (out <= 1))
        assert np.all(out[1:-1] > grid[1:-1])

    @pytest.mark.parametrize("p0", [0.01, 0.3, 0.5, 0.99])
    def test_q_linear_half(self, p0):
        ps = scalar_iterates(p0, 60)
        assert ps[-1] == pytest.approx(1.0, abs=1e-12)
        # use 1 - p = f(p) p with f halving each step, to avoid cancellation
        odds = [(1 - p0) / p0 / 2**n for n in range(42)]
        gaps = [o / (1 + o) for o in odds]
        for n in range(42):
            assert ps[n] == pytest.approx(1 / (1 + odds[n]), rel=1e-13)
        assert gaps[41] / gaps[40] == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.parametrize("c", [0.0, 0.25, 0.5])
    def test_lipschitz_on_interval(self, c):
        grid = np.linspace(c, 1, 200_001)[:-1]
        ratio = max((1 - scalar_b_map(p)) / (1 - p) for p in grid)
        assert ratio == pytest.approx(1 / (1 + c), abs=1e-9)

    def test_value_gap_equals_policy_gap(self):
        mdp = two_action_mdp()
        for p in (0.1, 0.5, 0.9):
            vf = policy_evaluation(mdp, TabularPolicy.from_probs([[p, 1 - p], [0.5, 0.5]]))
            assert 2.0 - vf.v[0] == pytest.approx(1 - p, abs=1e-12)


class TestDistortedMetric:
    def test_half_contraction(self):
        for p in (0.3, 0.05, 0.77):
            assert scalar_distorted_metric(1, scalar_b_map(p)) / scalar_distorted_metric(1, p) \
                == pytest.approx(0.5, rel=1e-12)

    def test_basic(self):
        assert scalar_distorted_metric(0.4, 0.4) == 0.0
        assert scalar_distorted_metric(1, 0.5) == 1.0

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            scalar_distorted_metric(0.0, 0.5)


class TestContinuousClosedForms:
    def test_density(self):
        assert continuous_policy_density(0, 0.3) == 1.0
        assert continuous_policy_density(1, 1.0) == pytest.approx(4 / 3, rel=1e-15)

    @pytest.mark.parametrize("n", range(21))
    def test_density_normalized(self, n):
        val, _ = integrate.quad(lambda a: continuous_policy_density(n, a), 0, 1,
                                epsabs=1e-13, epsrel=1e-13)
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_density_domain(self):
        with pytest.raises(ValueError):
            continuous_policy_density(2, 1.5)
        with pytest.raises(ValueError):
            continuous_policy_density(-1, 0.5)

    def test_values(self):
        assert continuous_value(0) == 1.5
        assert continuous_value(1, exact=True) == Fraction(14, 9)
        assert continuous_bl_distance(0) == 0.5

    def test_value_by_quadrature(self):
        for n in (0, 3, 10):
            val, _ = integrate.quad(lambda a: (a + 1) * continuous_policy_density(n, a), 0, 1,
                                    epsabs=1e-13, epsrel=1e-13)
            assert val == pytest.approx(continuous_value(n), abs=1e-12)

    def test_exact_identities(self):
        for n in range(41):
            err = continuous_error(n, exact=True)
            assert err == 2 - continuous_value(n, exact=True)
            assert err == Fraction(2 ** (n + 2) - n - 3, (n + 2) * (2 ** (n + 1) - 1))
            assert continuous_bl_distance(n, exact=True) == err

    @pytest.mark.parametrize("n", [51, 100, 500, 2000, 10_000])
    def test_rearranged_form(self, n):
        # exact rational arithmetic is the oracle for the overflow-safe branch
        assert continuous_value(n) == pytest.approx(float(continuous_value(n, exact=True)),
                                                    rel=1e-14)
        assert continuous_error(n) == pytest.approx(float(continuous_error(n, exact=True)),
                                                    rel=1e-13)

    def test_n_times_error(self):
        for n in range(200, 401):
            assert abs(n * continuous_error(n) - 2) <= 0.05 * 2

    @pytest.mark.parametrize("n", range(21))
    def test_bl_quadrature(self, n):
        assert continuous_bl_quadrature(n) == pytest.approx(continuous_bl_distance(n), abs=1e-9)


class TestDiscretization:
    def test_two_cells(self):
        mdp = discretize_continuous_bandit(2)
        vf = policy_evaluation(mdp, uniform_policy(mdp))
        np.testing.assert_allclose(vf.q[0], [1.25, 1.75], rtol=1e-14)

    def test_rejects_one_cell(self):
        with pytest.raises(ValueError):
            discretize_continuous_bandit(1)

    def test_engine_matches_closed_form(self):
        mdp = discretize_continuous_bandit(1000)
        trace = run_rwr(mdp, uniform_policy(mdp), max_iters=50, stop_eps=-1.0,
                        keep_policies=True)
        for n, vf in enumerate(trace.values):
            assert abs(vf.v[0] - continuous_value(n)) <= 2 / 1000

    def test_policy_matches_density(self):
        cells = 1000
        mdp = discretize_continuous_bandit(cells)
        trace = run_rwr(mdp, uniform_policy(mdp), max_iters=20, stop_eps=-1.0,
                        keep_policies=True)
        mids = cell_midpoints(cells)
        for n in (1, 5, 20):
            mass = trace.policies[n].probs[0]
            np.testing.assert_allclose(mass * cells, continuous_policy_density(n, mids),
                                       rtol=0.05)

    def test_sublinear_before_floor(self):
        mdp = discretize_continuous_bandit(1000)
        trace = run_rwr(mdp, uniform_policy(mdp), max_iters=100, stop_eps=-1.0,
                        keep_policies=True)
        n = 100
        assert n * (2.0 - trace.values[n].v[0]) == pytest.approx(2.0, rel=0.05)
