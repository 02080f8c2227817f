"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from tabular_rwr import kernels
from tabular_rwr.envs import four_room, random_mdp
from tabular_rwr.evaluation import policy_evaluation, value_iteration
from tabular_rwr.mdp import random_policy
from tabular_rwr.rwr import run_rwr


def kernel_cases(mdp, seed=0):
    pol = random_policy(mdp, seed)
    vf = policy_evaluation(mdp, pol)
    greedy = value_iteration(mdp)[1].mask
    lw, probs = pol.log_weights, pol.probs
    p, r, g = mdp.transition, mdp.reward, mdp.discount
    p_pi, r_pi = kernels.active.policy_average(probs, p, r)
    return {
        "policy_average": lambda b: b.policy_average(probs, p, r),
        "bellman_w": lambda b: b.bellman_w(p, r, g, vf.v),
        "b_update": lambda b: b.b_update(lw, vf.q, vf.v),
        "q_moments": lambda b: b.q_moments(lw, vf.q),
        "rwr_step": lambda b: b.rwr_step(lw, vf.q, vf.v, greedy),
        "evaluate_sweeps": lambda b: b.evaluate_sweeps(p_pi, r_pi, g, np.zeros(mdp.n_states),
                                                       1e-10, 50),
    }


def best_time(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    names = ["pure"] + (["compiled"] if kernels.compiled_available() else [])
    if len(names) == 1:
        print("compiled backend not built; timing the pure backend only")
    backends = {n: kernels.get_backend(n) for n in names}

    mdps = [four_room(), random_mdp(50, 4, 3), random_mdp(500, 8, 3)]
    print(f"{'mdp':<16} {'kernel':<16} " + " ".join(f"{n + ' us':>12}" for n in names)
          + ("   speedup" if len(names) == 2 else ""))
    for mdp in mdps:
        label = f"{mdp.name}" if mdp.n_states < 200 else f"random-{mdp.n_states}"
        for kname, fn in kernel_cases(mdp).items():
            times = [best_time(lambda: fn(backends[n]), args.repeat, 200) * 1e6 for n in names]
            row = f"{label:<16} {kname:<16} " + " ".join(f"{t:>12.2f}" for t in times)
            if len(times) == 2:
                row += f"   {times[0] / times[1]:>7.2f}x"
            print(row)

    print()
    print(f"{'mdp':<16} {'run_rwr':<16} " + " ".join(f"{n + ' ms':>12}" for n in names))
    saved = kernels.active
    try:
        for mdp in mdps[:2]:
            optimal = value_iteration(mdp)
            init = random_policy(mdp, 0)
            times = []
            for n in names:
                kernels.active = backends[n]
                t = best_time(lambda: run_rwr(mdp, init, max_iters=200, stop_eps=-1.0,
                                              optimal=optimal), args.repeat, 1)
                times.append(t * 1e3)
            row = f"{mdp.name:<16} {'200 iterations':<16} " + " ".join(f"{t:>12.2f}" for t in times)
            if len(times) == 2:
                row += f"   {times[0] / times[1]:>7.2f}x"
            print(row)
    finally:
        kernels.active = saved


if __name__ == "__main__":
    main()
