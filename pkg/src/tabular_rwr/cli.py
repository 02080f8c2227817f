"""Command-line experiment runner.

Exit status: 0 when every check passes, 1 when a check fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analytic, envs, rates
from .evaluation import value_iteration
from .mdp import (
    InvalidMdpError,
    deterministic_policy,
    load_mdp,
    random_policy,
    save_mdp,
    uniform_policy,
)
from .rwr import ConsistencyError, PositivityError, run_rwr
from .transforms import (
    RewardTransform,
    StochasticRewardBandit,
    action_values,
    counterexample_bandit,
    optimal_action_shift,
)

ENV_NAMES = ("four-room", "two-action", "counterexample", "continuous-bandit", "random", "trivial")


class BadInput(Exception):
    pass


class Checks:
    """Named pass/fail checks; a command fails if any check fails."""

    def __init__(self):
        self.results = []

    def __call__(self, name, ok, detail=""):
        self.results.append((name, bool(ok), detail))
        return ok

    @property
    def ok(self):
        return all(ok for _, ok, _ in self.results)

    def report(self, stream=None):
        stream = stream if stream is not None else sys.stderr
        for name, ok, detail in self.results:
            if not ok:
                print(f"FAIL {name}: {detail}", file=stream)
        return 0 if self.ok else 1


def build_env(args):
    if getattr(args, "mdp", None):
        try:
            return load_mdp(args.mdp)
        except FileNotFoundError as exc:
            raise BadInput(f"no such file: {args.mdp}") from exc
    name = args.env
    if name == "four-room":
        return envs.four_room()
    if name == "two-action":
        return envs.two_action_mdp()
    if name == "counterexample":
        return envs.counterexample_mdp()
    if name == "continuous-bandit":
        return analytic.discretize_continuous_bandit(args.cells)
    if name == "random":
        return envs.random_mdp(args.states, args.actions, args.seed)
    if name == "trivial":
        return envs.single_action_mdp()
    raise BadInput(f"unknown env {name!r}; choose from {', '.join(ENV_NAMES)}")


def initial_policy(mdp, kind, seed, optimal=None):
    if kind == "uniform":
        return uniform_policy(mdp)
    if kind == "random":
        return random_policy(mdp, seed)
    if kind == "greedy":
        values, _ = optimal if optimal is not None else value_iteration(mdp)
        return deterministic_policy(mdp, np.argmax(values.q, axis=1))
    raise BadInput(f"unknown initial policy {kind!r}")


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _gridworld_run(job):
    seed, init, iters, tol, stop_eps, optimal = job
    mdp = envs.four_room()
    policy = initial_policy(mdp, init, seed, optimal)
    return run_rwr(mdp, policy, max_iters=iters, stop_eps=stop_eps, eval_tol=tol,
                   optimal=optimal)


def padded_columns(traces, name, length):
    """Stack one column of every trace, carrying each trace's last value forward."""
    out = np.empty((len(traces), length))
    for i, tr in enumerate(traces):
        col = tr.column(name)
        out[i, : col.size] = col
        out[i, col.size:] = col[-1]
    return out


def cmd_gridworld(args) -> int:
    out = _out_dir(args)
    mdp = envs.four_room()
    optimal = value_iteration(mdp, tol=args.tol)
    jobs = [(args.seed + i, args.init, args.iters, args.tol, args.stop_eps, optimal)
            for i in range(args.runs)]
    checks = Checks()
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                traces = list(pool.map(_gridworld_run, jobs))
        else:
            traces = [_gridworld_run(j) for j in jobs]
    except ConsistencyError as exc:
        checks("monotone_improvement", False, str(exc))
        return checks.report()

    for (seed, *_), tr in zip(jobs, traces):
        tr.to_csv(out / f"run_{seed:05d}.csv", header={"env": "four-room", "seed": seed})
        rm = tr.column("rmsve")
        checks(f"rmsve_nonincreasing[seed={seed}]", np.all(np.diff(rm) <= 1e-12),
               f"max increase {np.max(np.diff(rm), initial=0):.3g}")

    length = max(len(t) for t in traces)
    rmsve = padded_columns(traces, "rmsve", length)
    ret = padded_columns(traces, "return", length)
    agg = out / "aggregate.csv"
    with agg.open("w", newline="") as fh:
        fh.write(f"# env=four-room\n# base_seed={args.seed}\n# runs={args.runs}\n"
                 f"# init={args.init}\n")
        w = csv.writer(fh)
        w.writerow(["iter", "rmsve_mean", "rmsve_std", "return_mean", "return_std"])
        for n in range(length):
            stats = (rmsve[:, n].mean(), rmsve[:, n].std(), ret[:, n].mean(), ret[:, n].std())
            w.writerow([n] + [repr(float(x)) for x in stats])

    final = float(rmsve[:, -1].mean())
    if args.init != "greedy":
        checks("final_mean_rmsve_below_0.01", final < 0.01, f"{final:.3g}")
        checks("mean_return_nondecreasing", np.all(np.diff(ret.mean(axis=0)) >= -1e-9),
               "mean return decreased")
    print(f"four-room: {args.runs} runs, {length} iterations, "
          f"final mean RMSVE {final:.3e}, J* {optimal[0].v @ mdp.initial_dist:.6f}")
    print(f"wrote {agg}")
    return checks.report()


def cmd_rates(args) -> int:
    mdp = build_env(args)
    if not mdp.rewards_strictly_positive:
        raise PositivityError(f"{mdp.name}: rewards must be strictly positive")
    optimal = value_iteration(mdp)
    values, greedy = optimal
    report = rates.bound_constants(values.q, values.v, greedy)
    trace = run_rwr(mdp, uniform_policy(mdp), max_iters=args.iters, stop_eps=args.stop_eps,
                    eval_tol=args.tol, optimal=optimal)
    checks = Checks()
    try:
        rates.empirical_rate(trace, args.tail_k, report)
    except rates.InsufficientTraceError:
        report.order = "converged"
    holds, c = rates.verify_envelope(trace, report.alpha_m)
    report.envelope_holds, report.envelope_c = holds, c
    if report.tail_ratio is not None:
        checks("tail_ratio_within_bound", report.tail_ratio <= report.alpha_m + 0.02,
               f"tail {report.tail_ratio:.6f} > alpha_m {report.alpha_m:.6f} + 0.02")
    checks("envelope_holds", holds, f"alpha_m={report.alpha_m:.6f}, C={c:.3g}")

    payload = report.to_dict()
    payload["env"] = mdp.name
    payload["iterations"] = len(trace)
    payload["final_sup_error"] = float(trace.sup_errors[-1])
    if not args.full:
        payload["empirical_ratios"] = payload["empirical_ratios"][-args.tail_k:]
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        path = _out_dir(args) / f"rates_{mdp.name}.json"
        full = report.to_dict() | {"env": mdp.name}
        path.write_text(json.dumps(full, indent=2))
    return checks.report()


def _parse_bandit(args):
    if args.bandit:
        try:
            return StochasticRewardBandit.from_json(args.bandit)
        except FileNotFoundError as exc:
            raise BadInput(f"no such file: {args.bandit}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise BadInput(f"malformed bandit file {args.bandit}: {exc}") from exc
    return counterexample_bandit()


def cmd_counterexample(args) -> int:
    bandit = _parse_bandit(args)
    try:
        if args.linear is not None:
            transform = RewardTransform.linear(*args.linear)
        else:
            transform = RewardTransform.exponential(
                int(args.base) if float(args.base).is_integer() else args.base
            )
    except ValueError as exc:
        raise BadInput(str(exc)) from exc
    before_q = action_values(bandit)
    after_q = action_values(bandit, transform)
    before, after, shifted = optimal_action_shift(bandit, transform)

    print(f"transform: {transform.describe()}")
    print(f"{'action':>6}  {'q':>12}  {'q_transformed':>14}")
    for a, (q0, q1) in enumerate(zip(before_q, after_q)):
        print(f"{a:>6}  {str(q0):>12}  {str(q1):>14}")
    print(f"argmax before {sorted(before)}, after {sorted(after)}, shifted={shifted}")

    payload = {
        "transform": transform.describe(),
        "q": [float(x) for x in before_q],
        "q_transformed": [float(x) for x in after_q],
        "q_exact": [str(x) for x in before_q],
        "q_transformed_exact": [str(x) for x in after_q],
        "argmax_before": sorted(before),
        "argmax_after": sorted(after),
        "shifted": shifted,
    }
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    if args.out:
        (_out_dir(args) / "counterexample.json").write_text(json.dumps(payload, indent=2))
    return 0


def cmd_continuous_check(args) -> int:
    mdp = analytic.discretize_continuous_bandit(args.cells)
    trace = run_rwr(mdp, uniform_policy(mdp), max_iters=args.max_n, stop_eps=-1.0,
                    keep_policies=True)
    checks = Checks()
    tol = 2.0 / args.cells
    rows = []
    for n, values in enumerate(trace.values):
        v_disc = float(values.v[0])
        v_closed = analytic.continuous_value(n)
        err_exact = analytic.continuous_error(n, exact=True)
        bl = analytic.continuous_bl_distance(n)
        checks(f"error_equals_2_minus_value[n={n}]",
               2 - analytic.continuous_value(n, exact=True) == err_exact, "")
        checks(f"bl_equals_error[n={n}]",
               analytic.continuous_bl_distance(n, exact=True) == err_exact, "")
        checks(f"discretized_matches_closed_form[n={n}]", abs(v_disc - v_closed) <= tol,
               f"|{v_disc} - {v_closed}| > {tol}")
        if n <= 20:
            quad = analytic.continuous_bl_quadrature(n)
            checks(f"bl_quadrature[n={n}]", abs(quad - bl) <= 1e-9, f"{quad} vs {bl}")
        rows.append({
            "n": n, "v_closed": v_closed, "v_discrete": v_disc,
            "error_closed": float(err_exact), "bl_distance": bl,
            "n_error": n * float(err_exact),
        })
    checks("v0_is_1.5", rows[0]["v_closed"] == 1.5, str(rows[0]["v_closed"]))

    cols = ["n", "v_closed", "v_discrete", "error_closed", "bl_distance", "n_error"]
    stream = sys.stdout
    fh = None
    if args.out:
        fh = (_out_dir(args) / "continuous_check.csv").open("w", newline="")
        stream = fh
    try:
        w = csv.DictWriter(stream, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    finally:
        if fh is not None:
            fh.close()
    return checks.report()


def cmd_run(args) -> int:
    mdp = build_env(args)
    optimal = value_iteration(mdp)
    policy = initial_policy(mdp, args.init, args.seed, optimal)
    trace = run_rwr(mdp, policy, max_iters=args.iters, stop_eps=args.stop_eps,
                    eval_tol=args.tol, optimal=optimal, keep_policies=True)
    out = _out_dir(args)
    trace.to_csv(out / "trace.csv", header={"env": mdp.name, "seed": args.seed,
                                            "init": args.init})
    final = trace.values[-1]
    with (out / "values.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "v_final", "v_star"] +
                   [f"q_{a}" for a in range(mdp.n_actions)])
        for s in range(mdp.n_states):
            w.writerow([s, repr(float(final.v[s])), repr(float(optimal[0].v[s]))] +
                       [repr(float(x)) for x in final.q[s]])
    last = trace.records[-1]
    print(f"{mdp.name}: {len(trace)} records, stop={trace.stop_reason}, "
          f"sup_error={last.sup_error:.3e}, return={last.ret:.6f}")
    return 0


def cmd_export(args) -> int:
    mdp = build_env(args)
    path = Path(args.out)
    try:
        save_mdp(mdp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    print(f"wrote {path}")
    return 0


def _common(p, iters=10_000, stop_eps=1e-10):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=iters, help="maximum B-updates")
    p.add_argument("--tol", type=float, default=1e-10, help="evaluation tolerance")
    p.add_argument("--stop-eps", type=float, default=stop_eps)


def _env_args(p, default="two-action"):
    p.add_argument("--env", default=default, choices=ENV_NAMES)
    p.add_argument("--mdp", help="MDP JSON file (overrides --env)")
    p.add_argument("--cells", type=int, default=1000)
    p.add_argument("--states", type=int, default=10)
    p.add_argument("--actions", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabular-rwr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gridworld", help="four-room experiment over seeded initial policies")
    _common(p, iters=2000, stop_eps=1e-9)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--init", default="random", choices=("random", "uniform", "greedy"))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="runs/gridworld")
    p.add_argument("--format", default="csv", choices=("csv",))
    p.set_defaults(func=cmd_gridworld)

    p = sub.add_parser("rates", help="rate constants and empirical rate for one env")
    _common(p, stop_eps=1e-9)
    _env_args(p)
    p.add_argument("--tail-k", type=int, default=10)
    p.add_argument("--full", action="store_true", help="print every error ratio")
    p.add_argument("--out")
    p.add_argument("--format", default="json", choices=("json",))
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("counterexample", help="optimal-arm shift under a reward transform")
    p.add_argument("--base", type=float, default=3.0)
    p.add_argument("--linear", type=float, nargs=2, metavar=("SCALE", "OFFSET"))
    p.add_argument("--bandit", help="bandit JSON file")
    p.add_argument("--out")
    p.add_argument("--format", default="table", choices=("table", "json"))
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("continuous-check", help="closed forms vs discretized engine")
    p.add_argument("--max-n", type=int, default=50)
    p.add_argument("--cells", type=int, default=1000)
    p.add_argument("--out")
    p.add_argument("--format", default="csv", choices=("csv",))
    p.set_defaults(func=cmd_continuous_check)

    p = sub.add_parser("run", help="run RWR on one environment or MDP file")
    _common(p)
    _env_args(p, default="four-room")
    p.add_argument("--init", default="uniform", choices=("random", "uniform", "greedy"))
    p.add_argument("--out", default="runs/run")
    p.add_argument("--format", default="csv", choices=("csv",))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("export", help="write a built-in environment as MDP JSON")
    _env_args(p, default="four-room")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "runs", 1) < 1:
            raise BadInput("--runs must be at least 1")
        if getattr(args, "cells", 2) < 2:
            raise BadInput("--cells must be at least 2")
        return args.func(args)
    except (BadInput, InvalidMdpError, PositivityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
