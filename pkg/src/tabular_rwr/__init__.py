"""Exact tabular reward-weighted regression.

The policy update multiplies each action probability by its action value and
renormalizes per state; evaluation is exact, so the iteration can be checked
against value iteration and against closed-form examples.
"""

from .analytic import (
    continuous_bl_distance,
    continuous_error,
    continuous_policy_density,
    continuous_value,
    discretize_continuous_bandit,
    scalar_b_map,
    scalar_distorted_metric,
)
from .envs import GridSpec, four_room, two_action_mdp, random_mdp
from .evaluation import (
    GreedySet,
    StateWeighting,
    ValueFunctions,
    apply_t,
    apply_w,
    discounted_state_weighting,
    expected_return,
    policy_evaluation,
    value_iteration,
)
from .kernels import BACKEND
from .mdp import (
    FiniteMdp,
    InvalidMdpError,
    TabularPolicy,
    load_mdp,
    random_policy,
    save_mdp,
    shift_rewards_linear,
    uniform_policy,
    validate,
)
from .rates import RateReport, bound_constants, empirical_rate, verify_envelope
from .rwr import (
    IterationTrace,
    b_operator,
    one_step_improvement_identity,
    run_rwr,
    variance_of_q,
)
from .transforms import (
    RewardTransform,
    StochasticRewardBandit,
    action_values,
    optimal_action_shift,
)

__version__ = "0.1.0"
