"""Experiment orchestration for the bundled comparison presets.

Each preset sweeps one scenario parameter and evaluates a set of
methods on identical seeded realizations (paired comparisons), then
emits one CSV row per (grid point, method) under the frozen schema

    experiment,grid_param,grid_value,method,metric,estimate,sigma_hat,
    eps_T,eps_N,lo,hi,seed,n_realizations

Method failures are recorded and leave NaN rows; the run continues.
EHOPT_THREADS caps the process fan-out used for the per-realization
offline solves (results are assembled by index, so the output is
identical at any thread count).
"""
import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dp import DpConfig, policy_iteration, relative_value_iteration
from .errors import ScenarioInvalid
from .learn import LearningConfig, q_learning_run, r_learning_run
from .model import (Model, Scenario, greedy_policy, with_battery_capacity,
                    with_harvest_persistence)
from .offline import BabConfig, bab_solve, exhaustive_solve, lp_relaxation_bound
from .sim import (EvalConfig, derive_seed, discounted_batch, estimate,
                  realization_to_instance, rollout_rewards_batch,
                  sample_realizations, truncation_error)

CSV_COLUMNS = (
    "experiment", "grid_param", "grid_value", "method", "metric", "estimate",
    "sigma_hat", "eps_T", "eps_N", "lo", "hi", "seed", "n_realizations",
)

DSP_METHODS = ("lp", "bab", "pi", "qlearn", "greedy", "exhaustive")
TP_METHODS = ("lp", "bab", "rvi", "rlearn", "greedy")

METRIC_DSP = "discounted_bits"
METRIC_TP = "throughput_bits_per_slot"

# stream offsets keeping learner seeds disjoint from realization indices
_AGENT_STREAM = 1 << 32
_ENV_STREAM = 2 << 32


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: Scenario
    problem: str  # "dsp" or "tp"
    methods: tuple
    grid_param: str  # "p_h" | "battery_capacity" | "learning_slots" | "none"
    grid_values: tuple
    eval: EvalConfig
    learning: LearningConfig = LearningConfig()
    learn_seeds: int = 10
    experiment: str = "custom"
    bab_timeout_s: float = 20.0

    def __post_init__(self):
        if self.problem not in ("dsp", "tp"):
            raise ScenarioInvalid(f"unknown problem {self.problem!r}")
        allowed = DSP_METHODS if self.problem == "dsp" else TP_METHODS
        bad = [m for m in self.methods if m not in allowed]
        if bad:
            raise ScenarioInvalid(f"methods {bad} not valid for {self.problem}")
        if self.problem == "dsp" and not self.scenario.discount < 1.0:
            if {"pi", "qlearn"} & set(self.methods):
                raise ScenarioInvalid("dsp planning/learning methods need discount < 1")
        if self.grid_param not in ("p_h", "battery_capacity", "learning_slots", "none"):
            raise ScenarioInvalid(f"unknown grid parameter {self.grid_param!r}")
        if self.grid_param != "none" and not self.grid_values:
            raise ScenarioInvalid("empty sweep grid")
        if self.learn_seeds < 1:
            raise ScenarioInvalid("need at least one learner replicate")


def _worker_count() -> int:
    raw = os.environ.get("EHOPT_THREADS", "")
    if raw.strip():
        return max(1, int(raw))
    return max(1, min(4, os.cpu_count() or 1))


def _bab_value(args):
    inst, timeout = args
    return bab_solve(inst, BabConfig(timeout_s=timeout)).value


def _lp_value(inst):
    return lp_relaxation_bound(inst).value


def _exhaustive_value(inst):
    return exhaustive_solve(inst).value


def _offline_values(instances, fn, extra=None) -> np.ndarray:
    workers = _worker_count()
    items = [(i, extra) for i in instances] if extra is not None else instances
    if workers == 1:
        return np.array([fn(i) for i in items])
    chunk = max(1, len(items) // (workers * 8))
    with ProcessPoolExecutor(workers) as pool:
        return np.array(list(pool.map(fn, items, chunksize=chunk)))


def _apply_grid(scenario: Scenario, param: str, value) -> Scenario:
    if param == "p_h":
        return with_harvest_persistence(scenario, float(value))
    if param == "battery_capacity":
        return with_battery_capacity(scenario, int(value))
    return scenario  # learning_slots and none leave the scenario untouched


class _GridPoint:
    """Realizations, stacked index arrays, and offline instances for one
    scenario; shared by every method evaluated at that grid point."""

    def __init__(self, scenario: Scenario, spec: ExperimentSpec):
        self.model = Model(scenario)
        self.spec = spec
        reals = sample_realizations(self.model, spec.eval)
        self.e = np.stack([r.e_idx for r in reals])
        self.d = np.stack([r.d_idx for r in reals])
        self.h = np.stack([r.h_idx for r in reals])
        gamma_off = scenario.discount if spec.problem == "dsp" else 1.0
        self.instances = [
            realization_to_instance(r, self.model, b0=spec.eval.b0, gamma=gamma_off)
            for r in reals
        ]

    def metric_of_rewards(self, rewards: np.ndarray) -> np.ndarray:
        if self.spec.problem == "dsp":
            return discounted_batch(rewards, self.model.discount)
        return discounted_batch(rewards, 1.0) / self.spec.eval.n_slots

    def metric_of_offline(self, values: np.ndarray) -> np.ndarray:
        if self.spec.problem == "dsp":
            return values
        return values / self.spec.eval.n_slots

    def rollout_metric(self, policy) -> np.ndarray:
        rewards = rollout_rewards_batch(
            policy, self.model, self.e, self.d, self.h, b0=self.spec.eval.b0
        )
        return self.metric_of_rewards(rewards)

    def eps_n(self) -> float:
        if self.spec.problem == "dsp" and self.model.discount < 1.0:
            return truncation_error(
                self.model.d_max, self.model.discount, self.spec.eval.n_slots
            )
        return 0.0


def _learner_policies(point: _GridPoint, spec: ExperimentSpec, slots: int,
                      snapshot_slots=()) -> list:
    """One learner run per replicate; returns final policies, or per-snapshot
    policy lists when snapshot slots are requested."""
    out = []
    base = spec.eval.base_seed
    for rep in range(spec.learn_seeds):
        cfg = replace(
            spec.learning,
            learning_slots=slots,
            seed=derive_seed(base, _AGENT_STREAM + rep),
            snapshot_slots=tuple(snapshot_slots),
        )
        env_seed = derive_seed(base, _ENV_STREAM + rep)
        if spec.problem == "dsp":
            _, policy, trace = q_learning_run(point.model, cfg, env_seed)
        else:
            _, _, policy, trace = r_learning_run(point.model, cfg, env_seed)
        out.append(trace if snapshot_slots else policy)
    return out


def _replicate_mean_metric(point: _GridPoint, policies) -> np.ndarray:
    """Per-realization metric averaged over learner replicates."""
    acc = np.zeros(point.e.shape[0])
    for pol in policies:
        acc += point.rollout_metric(pol)
    return acc / len(policies)


def _method_values(point: _GridPoint, spec: ExperimentSpec, method: str,
                   learned_policies=None) -> np.ndarray:
    if method == "lp":
        return point.metric_of_offline(_offline_values(point.instances, _lp_value))
    if method == "bab":
        vals = _offline_values(point.instances, _bab_value, extra=spec.bab_timeout_s)
        return point.metric_of_offline(vals)
    if method == "exhaustive":
        return point.metric_of_offline(_offline_values(point.instances, _exhaustive_value))
    if method == "pi":
        policy, _, _ = policy_iteration(point.model, DpConfig())
        return point.rollout_metric(policy)
    if method == "rvi":
        policy, _, _ = relative_value_iteration(point.model, DpConfig())
        return point.rollout_metric(policy)
    if method == "greedy":
        return point.rollout_metric(greedy_policy(point.model))
    if method in ("qlearn", "rlearn"):
        return _replicate_mean_metric(point, learned_policies)
    raise ScenarioInvalid(f"unknown method {method!r}")


def _row(spec: ExperimentSpec, grid_value, method: str, report=None) -> dict:
    metric = METRIC_DSP if spec.problem == "dsp" else METRIC_TP
    nan = float("nan")
    return {
        "experiment": spec.experiment,
        "grid_param": spec.grid_param,
        "grid_value": "" if grid_value is None else grid_value,
        "method": method,
        "metric": metric,
        "estimate": report.estimate if report else nan,
        "sigma_hat": report.sigma_hat if report else nan,
        "eps_T": report.eps_t if report else nan,
        "eps_N": report.eps_n if report else nan,
        "lo": report.lo if report else nan,
        "hi": report.hi if report else nan,
        "seed": spec.eval.base_seed,
        "n_realizations": spec.eval.n_realizations,
    }


def run_experiment(spec: ExperimentSpec):
    """Execute the sweep; returns (rows, failures).

    Failures are (grid_value, method, message) triples; their rows carry
    NaN statistics so the CSV row count stays |grid| x |methods|.
    """
    rows = []
    failures = []
    if spec.grid_param == "learning_slots":
        _run_learning_sweep(spec, rows, failures)
        return rows, failures

    grid = spec.grid_values if spec.grid_param != "none" else (None,)
    for gv in grid:
        point = _GridPoint(_apply_grid(spec.scenario, spec.grid_param, gv), spec)
        learned = None
        if "qlearn" in spec.methods or "rlearn" in spec.methods:
            try:
                learned = _learner_policies(point, spec, spec.learning.learning_slots)
            except Exception as exc:  # recorded per learner-method row below
                failures.append((gv, "learner", repr(exc)))
        for method in spec.methods:
            try:
                if method in ("qlearn", "rlearn") and learned is None:
                    raise ScenarioInvalid("learner run failed")
                values = _method_values(point, spec, method, learned)
                report = estimate(values, spec.eval, point.eps_n())
                rows.append(_row(spec, gv, method, report))
            except Exception as exc:
                failures.append((gv, method, repr(exc)))
                rows.append(_row(spec, gv, method, None))
    return rows, failures


def _run_learning_sweep(spec: ExperimentSpec, rows, failures):
    """Learning-time sweep: one scenario, learner snapshots at each grid L,
    reference methods computed once and repeated per row."""
    point = _GridPoint(spec.scenario, spec)
    marks = tuple(int(v) for v in spec.grid_values)
    ordered = sorted(set(marks))
    total = max(marks)

    reference: dict = {}
    for method in spec.methods:
        if method in ("qlearn", "rlearn"):
            continue
        try:
            values = _method_values(point, spec, method)
            reference[method] = estimate(values, spec.eval, point.eps_n())
        except Exception as exc:
            failures.append((None, method, repr(exc)))
            reference[method] = None

    snap_metric: dict = {}
    learner = "qlearn" if spec.problem == "dsp" else "rlearn"
    if learner in spec.methods:
        try:
            traces = _learner_policies(point, spec, total, snapshot_slots=ordered)
            for idx, slot in enumerate(ordered):
                policies = [trace[idx].policy for trace in traces]
                snap_metric[slot] = _replicate_mean_metric(point, policies)
        except Exception as exc:
            failures.append((None, learner, repr(exc)))

    for gv in marks:
        for method in spec.methods:
            if method in ("qlearn", "rlearn"):
                if gv in snap_metric:
                    report = estimate(snap_metric[gv], spec.eval, point.eps_n())
                    rows.append(_row(spec, gv, method, report))
                else:
                    rows.append(_row(spec, gv, method, None))
            elif reference.get(method) is not None:
                rows.append(_row(spec, gv, method, reference[method]))
            else:
                rows.append(_row(spec, gv, method, None))


FIG2_GRID = (100, 200, 500, 1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000, 200_000)
FIG_PH_GRID = (0.5, 0.6, 0.7, 0.8, 0.9)
FIG4_GRID = (5, 6, 7, 8, 9)
PRESETS = ("fig2", "fig3", "fig4", "fig5")


def preset_spec(name: str, scenario: Scenario, base_seed: int,
                n_realizations: int = 2000, n_slots: int = 100,
                learn_seeds: int | None = None) -> ExperimentSpec:
    ev = EvalConfig(n_slots=n_slots, n_realizations=n_realizations,
                    base_seed=base_seed)
    if name == "fig2":
        return ExperimentSpec(
            scenario, "dsp", ("lp", "bab", "pi", "qlearn", "greedy"),
            "learning_slots", FIG2_GRID, ev,
            learn_seeds=learn_seeds or 50, experiment="fig2",
        )
    if name == "fig3":
        return ExperimentSpec(
            scenario, "dsp", ("lp", "bab", "pi", "qlearn", "greedy"),
            "p_h", FIG_PH_GRID, ev,
            learning=LearningConfig(learning_slots=10_000),
            learn_seeds=learn_seeds or 16, experiment="fig3",
        )
    if name == "fig4":
        return ExperimentSpec(
            scenario, "dsp", ("lp", "bab", "pi", "qlearn", "greedy"),
            "battery_capacity", FIG4_GRID, ev,
            learning=LearningConfig(learning_slots=10_000),
            learn_seeds=learn_seeds or 16, experiment="fig4",
        )
    if name == "fig5":
        return ExperimentSpec(
            scenario, "tp", ("lp", "bab", "rvi", "rlearn", "greedy"),
            "p_h", FIG_PH_GRID, ev,
            learning=LearningConfig(learning_slots=200_000),
            learn_seeds=learn_seeds or 8, experiment="fig5",
            bab_timeout_s=0.5,
        )
    raise ScenarioInvalid(f"unknown preset {name!r}")


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
