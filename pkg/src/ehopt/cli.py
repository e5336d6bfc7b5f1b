"""Command-line interface.

Subcommands: solve, learn, offline, evaluate, experiment. Exit codes:
0 success, 2 validation/parse error, 3 a method failed during a run.
"""
import argparse
import csv
import json
import sys

import numpy as np

from .dp import DpConfig, policy_evaluation, policy_iteration, relative_value_iteration
from .errors import EhoptError, ParseError, ScenarioInvalid
from .experiments import (PRESETS, ExperimentSpec, preset_spec,
                          run_experiment, write_csv)
from .learn import LearningConfig, q_learning_run, r_learning_run
from .model import Model, greedy_policy, with_battery_capacity, with_harvest_persistence
from .offline import BabConfig, OfflineInstance, bab_solve, exhaustive_solve, lp_relaxation_bound
from .scenario_io import load_scenario
from .sim import (EvalConfig, discounted_batch, estimate, expected_value_from_v,
                  realization_to_instance, rollout_rewards_batch,
                  sample_realization, sample_realizations, truncation_error)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_METHOD_FAILURE = 3


def _add_scenario_args(p):
    p.add_argument("--scenario", default="default",
                   help="scenario JSON path, or 'default' for the bundled one")
    p.add_argument("--p-h", type=float, default=None,
                   help="override the harvest-on self-transition probability")
    p.add_argument("--b-max", type=int, default=None, help="override battery capacity")
    p.add_argument("--discount", type=float, default=None, help="override discount")


def _scenario_from(args):
    sc = load_scenario(args.scenario)
    if getattr(args, "p_h", None) is not None:
        sc = with_harvest_persistence(sc, args.p_h)
    if getattr(args, "b_max", None) is not None:
        sc = with_battery_capacity(sc, args.b_max)
    if getattr(args, "discount", None) is not None:
        from dataclasses import replace
        sc = replace(sc, discount=args.discount)
    return sc


def _emit(doc, out):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def _cmd_solve(args) -> int:
    sc = _scenario_from(args)
    model = Model(sc)
    if args.problem == "dsp":
        policy, table, rounds = policy_iteration(model, DpConfig())
        doc = {
            "problem": "dsp",
            "expected_value_bits": expected_value_from_v(table, model, args.b0),
            "improvement_rounds": rounds,
            "policy": policy.actions.tolist(),
            "values": table.v.tolist(),
        }
    else:
        policy, gain, bias = relative_value_iteration(model, DpConfig())
        doc = {
            "problem": "tp",
            "gain_bits_per_slot": gain,
            "policy": policy.actions.tolist(),
            "bias": bias.v.tolist(),
        }
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_learn(args) -> int:
    sc = _scenario_from(args)
    model = Model(sc)
    cfg = LearningConfig(
        epsilon=args.epsilon,
        alpha=None if args.alpha is not None and args.alpha <= 0 else args.alpha,
        learning_slots=args.slots,
        seed=args.seed,
        beta=args.beta,
        q_init=args.q_init,
    )
    if args.problem == "dsp":
        qt, policy, _ = q_learning_run(model, cfg, args.env_seed)
        value = expected_value_from_v(policy_evaluation(policy, model), model, args.b0)
        doc = {"problem": "dsp", "expected_value_bits": value,
               "policy": policy.actions.tolist()}
    else:
        qt, rho, policy, _ = r_learning_run(model, cfg, args.env_seed)
        doc = {"problem": "tp", "rho_bits_per_slot": rho,
               "policy": policy.actions.tolist()}
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_offline(args) -> int:
    if args.instance:
        with open(args.instance) as f:
            inst = OfflineInstance.from_json(f.read())
    else:
        sc = _scenario_from(args)
        model = Model(sc)
        cfg = EvalConfig(n_slots=args.n_slots, n_realizations=max(2, args.index + 1),
                         base_seed=args.seed, b0=args.b0)
        real = sample_realization(model, cfg, args.index)
        gamma = args.gamma if args.gamma is not None else sc.discount
        inst = realization_to_instance(real, model, b0=args.b0, gamma=gamma)
    if args.method == "lp":
        sol = lp_relaxation_bound(inst)
        doc = {"method": "lp", "status": sol.status, "value": sol.value,
               "integral": sol.integral, "x": sol.x.tolist()}
    elif args.method == "exhaustive":
        res = exhaustive_solve(inst)
        doc = {"method": "exhaustive", "value": res.value, "x": res.x.tolist()}
    else:
        res = bab_solve(inst, BabConfig(timeout_s=args.timeout))
        doc = {"method": "bab", "value": res.value, "x": res.x.tolist(),
               "proved_optimal": res.proved_optimal,
               "nodes_explored": res.nodes_explored}
    _emit(doc, args.out)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    sc = _scenario_from(args)
    model = Model(sc)
    if args.policy == "pi":
        policy, _, _ = policy_iteration(model, DpConfig())
    elif args.policy == "rvi":
        policy, _, _ = relative_value_iteration(model, DpConfig())
    else:
        policy = greedy_policy(model)
    cfg = EvalConfig(n_slots=args.n_slots, n_realizations=args.n_realizations,
                     base_seed=args.seed, b0=args.b0)
    reals = sample_realizations(model, cfg)
    e = np.stack([r.e_idx for r in reals])
    d = np.stack([r.d_idx for r in reals])
    h = np.stack([r.h_idx for r in reals])
    rewards = rollout_rewards_batch(policy, model, e, d, h, b0=args.b0)
    if args.problem == "dsp":
        values = discounted_batch(rewards, sc.discount)
        eps_n = truncation_error(model.d_max, sc.discount, cfg.n_slots)
    else:
        values = discounted_batch(rewards, 1.0) / cfg.n_slots
        eps_n = 0.0
    rep = estimate(values, cfg, eps_n)
    if args.per_realization:
        with open(args.per_realization, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["t", "seed", "metric", "value"])
            metric = "discounted_bits" if args.problem == "dsp" else "throughput_bits_per_slot"
            for t, (real, v) in enumerate(zip(reals, rep.values)):
                w.writerow([t, real.seed, metric, repr(float(v))])
    _emit({
        "policy": args.policy, "problem": args.problem,
        "estimate": rep.estimate, "sigma_hat": rep.sigma_hat,
        "eps_T": rep.eps_t, "eps_N": rep.eps_n, "lo": rep.lo, "hi": rep.hi,
        "confidence": rep.confidence, "n_realizations": rep.n_realizations,
    }, args.out)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    sc = load_scenario(args.scenario)
    if args.preset == "custom":
        if not args.spec:
            raise ScenarioInvalid("custom experiments need --spec FILE")
        with open(args.spec) as f:
            doc = json.load(f)
        from .scenario_io import scenario_from_dict
        if "scenario" in doc:
            sc = scenario_from_dict(doc["scenario"])
        spec = ExperimentSpec(
            scenario=sc,
            problem=doc.get("problem", "dsp"),
            methods=tuple(doc.get("methods", ("pi", "greedy"))),
            grid_param=doc.get("grid_param", "none"),
            grid_values=tuple(doc.get("grid_values", ())),
            eval=EvalConfig(
                n_slots=doc.get("n_slots", args.n_slots),
                n_realizations=doc.get("n_realizations", args.n_realizations),
                base_seed=args.seed,
                b0=doc.get("b0", 0),
            ),
            learning=LearningConfig(
                learning_slots=doc.get("learning_slots", 10_000),
                alpha=doc.get("alpha"),
                epsilon=doc.get("epsilon", 0.07),
                beta=doc.get("beta", 0.1),
            ),
            learn_seeds=doc.get("learn_seeds", args.learn_seeds or 10),
            experiment="custom",
            bab_timeout_s=doc.get("bab_timeout_s", 20.0),
        )
    else:
        spec = preset_spec(args.preset, sc, args.seed,
                           n_realizations=args.n_realizations,
                           n_slots=args.n_slots, learn_seeds=args.learn_seeds)
    rows, failures = run_experiment(spec)
    write_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    if failures:
        for gv, method, msg in failures:
            print(f"method failure: grid={gv} method={method}: {msg}", file=sys.stderr)
        return EXIT_METHOD_FAILURE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ehopt",
        description="Energy-harvesting transmitter scheduling: solvers and experiments",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="exact DP solution of a scenario")
    _add_scenario_args(p)
    p.add_argument("--problem", choices=("dsp", "tp"), default="dsp")
    p.add_argument("--b0", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("learn", help="model-free learning run")
    _add_scenario_args(p)
    p.add_argument("--problem", choices=("dsp", "tp"), default="dsp")
    p.add_argument("--slots", type=int, default=10_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--env-seed", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=0.07)
    p.add_argument("--alpha", type=float, default=None,
                   help="constant learning rate; omit or <=0 for the per-visit schedule")
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--q-init", type=float, default=None)
    p.add_argument("--b0", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_learn)

    p = sub.add_parser("offline", help="solve one realized window non-causally")
    _add_scenario_args(p)
    p.add_argument("--instance", default=None, help="OfflineInstance JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--index", type=int, default=0, help="realization index")
    p.add_argument("--n-slots", type=int, default=100)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--b0", type=int, default=0)
    p.add_argument("--method", choices=("bab", "lp", "exhaustive"), default="bab")
    p.add_argument("--timeout", type=float, default=20.0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_offline)

    p = sub.add_parser("evaluate", help="Monte Carlo estimate for a policy")
    _add_scenario_args(p)
    p.add_argument("--problem", choices=("dsp", "tp"), default="dsp")
    p.add_argument("--policy", choices=("pi", "rvi", "greedy"), default="pi")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-realizations", type=int, default=2000)
    p.add_argument("--n-slots", type=int, default=100)
    p.add_argument("--b0", type=int, default=0)
    p.add_argument("--per-realization", default=None,
                   help="write per-realization values CSV (t,seed,metric,value)")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("experiment", help="run a figure preset or custom sweep")
    p.add_argument("preset", choices=PRESETS + ("custom",))
    p.add_argument("--scenario", default="default")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-realizations", type=int, default=2000)
    p.add_argument("--n-slots", type=int, default=100)
    p.add_argument("--learn-seeds", type=int, default=None)
    p.add_argument("--spec", default=None, help="custom ExperimentSpec JSON")
    p.set_defaults(fn=_cmd_experiment)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "env_seed", None) is None and args.command == "learn":
        args.env_seed = args.seed
    try:
        return args.fn(args)
    except (ParseError, ScenarioInvalid, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except EhoptError as exc:
        print(f"method failure: {exc}", file=sys.stderr)
        return EXIT_METHOD_FAILURE


if __name__ == "__main__":
    sys.exit(main())
