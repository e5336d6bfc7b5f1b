"""Seeded Monte Carlo evaluation of transmission policies.

One *realization* is a window of exogenous draws (harvest, packet,
channel indices). All evaluation methods (causal rollouts and the
offline optimizers alike) consume identical realizations derived from
(base_seed, realization index) through a frozen 64-bit mix, so method
comparisons are paired sample by sample.

The confidence machinery estimates the expected metric from T
realizations: biased sample variance, Student-t half-width, plus an
explicit bound on the discounted tail the finite window never saw.
"""
import math
from dataclasses import dataclass

import numpy as np

from .dp import ValueTable
from .errors import DivergentHorizon, ScenarioInvalid
from .model import Policy, as_model, validate_policy
from .offline import OfflineInstance

_MASK64 = (1 << 64) - 1

# Stream tags for deriving independent seeds from one base seed.
STREAM_REALIZATION = 0
STREAM_LEARN_AGENT = 0x1A9E27B1
STREAM_LEARN_ENV = 0x2B8D35C7


def mix64(z: int) -> int:
    """splitmix64 finalizer; the frozen scrambler behind every derived seed."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(base_seed: int, stream: int) -> int:
    return mix64((base_seed & _MASK64) ^ (stream & _MASK64))


@dataclass(frozen=True)
class EvalConfig:
    n_slots: int = 100
    n_realizations: int = 2000
    confidence: float = 0.9
    base_seed: int = 0
    b0: int = 0  # battery level every rollout starts from

    def __post_init__(self):
        if self.n_slots < 1:
            raise ScenarioInvalid("need at least one slot")
        if self.n_realizations < 2:
            raise ScenarioInvalid("need at least two realizations")
        if not 0.0 < self.confidence < 1.0:
            raise ScenarioInvalid("confidence must lie strictly inside (0, 1)")


@dataclass(frozen=True, eq=False)
class Realization:
    """Exogenous index sequences of one window, plus the seed that made them."""

    seed: int
    e_idx: np.ndarray
    d_idx: np.ndarray
    h_idx: np.ndarray

    @property
    def n_slots(self) -> int:
        return int(self.e_idx.shape[0])

    @property
    def initial_state(self) -> tuple:
        return int(self.e_idx[0]), int(self.d_idx[0]), int(self.h_idx[0])


def sample_realization(scenario_or_model, config: EvalConfig, t: int) -> Realization:
    """Draw realization `t`: uniform initial component states, then
    inverse-CDF steps through each chain. Bit-reproducible per (seed, t)."""
    model = as_model(scenario_or_model)
    seed = derive_seed(config.base_seed, t)
    rng = np.random.default_rng(seed)
    n = config.n_slots
    u = rng.random(3 * n)

    ce = model.cum_e.tolist()
    cd = model.cum_d.tolist()
    ch = model.cum_h.tolist()

    e = np.empty(n, dtype=np.int64)
    d = np.empty(n, dtype=np.int64)
    h = np.empty(n, dtype=np.int64)
    e[0] = int(u[0] * model.n_e)
    d[0] = int(u[1] * model.n_d)
    h[0] = int(u[2] * model.n_h)

    def scan(row, uu):
        k = 0
        while uu >= row[k]:
            k += 1
        return k

    for i in range(1, n):
        base = 3 * i
        e[i] = scan(ce[e[i - 1]], u[base])
        d[i] = scan(cd[d[i - 1]], u[base + 1])
        h[i] = scan(ch[h[i - 1]], u[base + 2])
    return Realization(seed, e, d, h)


def sample_realizations(scenario_or_model, config: EvalConfig) -> list[Realization]:
    model = as_model(scenario_or_model)
    return [sample_realization(model, config, t) for t in range(config.n_realizations)]


def realization_to_instance(
    realization: Realization, scenario_or_model, b0: int = 0, gamma: float | None = None
) -> OfflineInstance:
    model = as_model(scenario_or_model)
    return OfflineInstance(
        harvests=model.harvest_units[realization.e_idx],
        packet_bits=model.data_bits[realization.d_idx],
        costs=model.cost[realization.d_idx, realization.h_idx],
        b_max=model.b_max,
        b0=b0,
        discount=model.discount if gamma is None else gamma,
    )


def instance_to_realization(instance: OfflineInstance, scenario_or_model) -> Realization:
    """Recover chain indices from an instance's label sequences."""
    model = as_model(scenario_or_model)
    e = np.array([int(np.where(model.harvest_units == v)[0][0]) for v in instance.harvests])
    d = np.array([int(np.where(model.data_bits == v)[0][0]) for v in instance.packet_bits])
    h = np.empty_like(d)
    for i in range(instance.n_slots):
        matches = np.where(model.cost[d[i]] == instance.costs[i])[0]
        if matches.size == 0:
            raise ScenarioInvalid("instance costs do not match the scenario cost table")
        h[i] = int(matches[0])
    return Realization(-1, e, d, h)


@dataclass(frozen=True, eq=False)
class Trajectory:
    actions: np.ndarray  # int8 per slot
    rewards: np.ndarray  # bits per slot
    batteries: np.ndarray  # levels before each slot, length n_slots + 1


def rollout_policy(
    policy: Policy, realization: Realization, scenario_or_model, b0: int = 0
) -> Trajectory:
    """Drive the policy causally through one realization from battery b0."""
    model = as_model(scenario_or_model)
    validate_policy(policy, model)
    n = realization.n_slots
    acts = np.zeros(n, dtype=np.int8)
    rewards = np.zeros(n)
    levels = np.empty(n + 1, dtype=np.int64)
    b = int(b0)
    levels[0] = b
    for i in range(n):
        e, d, h = int(realization.e_idx[i]), int(realization.d_idx[i]), int(realization.h_idx[i])
        s = model.flat_index(e, d, h, b)
        a = int(policy.actions[s])
        if a:
            b -= int(model.cost[d, h])
            rewards[i] = model.data_bits[d]
        acts[i] = a
        b = min(b + int(model.harvest_units[e]), model.b_max)
        levels[i + 1] = b
    return Trajectory(acts, rewards, levels)


def rollout_rewards_batch(
    policy: Policy, scenario_or_model, e_idx, d_idx, h_idx, b0: int = 0
) -> np.ndarray:
    """Vectorized rollouts over stacked realizations; returns (T, N) rewards.

    Same arithmetic as rollout_policy, marched slot by slot across all
    realizations at once.
    """
    model = as_model(scenario_or_model)
    validate_policy(policy, model)
    t_count, n = e_idx.shape
    acts = policy.actions.astype(np.int64)
    rewards = np.zeros((t_count, n))
    b = np.full(t_count, int(b0), dtype=np.int64)
    nb = model.n_battery
    for i in range(n):
        e, d, h = e_idx[:, i], d_idx[:, i], h_idx[:, i]
        flat = ((e * model.n_d + d) * model.n_h + h) * nb + b
        a = acts[flat]
        cost = model.cost[d, h]
        b = b - a * cost
        rewards[:, i] = a * model.data_bits[d]
        b = np.minimum(b + model.harvest_units[e], model.b_max)
    return rewards


def discounted_data(trajectory_or_rewards, gamma: float) -> float:
    """Discount-weighted transmitted bits, accumulated in slot order.

    Matches offline.schedule_value double for double on the same
    schedule, which keeps causal-vs-offline comparisons exact.
    """
    rewards = (
        trajectory_or_rewards.rewards
        if isinstance(trajectory_or_rewards, Trajectory)
        else np.asarray(trajectory_or_rewards, dtype=float)
    )
    total = 0.0
    g = gamma ** np.arange(rewards.shape[0])
    for n in range(rewards.shape[0]):
        if rewards[n]:
            total += g[n] * rewards[n]
    return total


def discounted_batch(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """Row-wise discounted_data over a (T, N) reward matrix, same doubles."""
    t_count, n = rewards.shape
    g = gamma ** np.arange(n)
    total = np.zeros(t_count)
    for i in range(n):
        total += g[i] * rewards[:, i]
    return total


def throughput(trajectory_or_rewards) -> float:
    """Average transmitted bits per slot over the window."""
    rewards = (
        trajectory_or_rewards.rewards
        if isinstance(trajectory_or_rewards, Trajectory)
        else np.asarray(trajectory_or_rewards, dtype=float)
    )
    return discounted_data(rewards, 1.0) / rewards.shape[0]


def truncation_error(d_max: float, gamma: float, n_slots: int) -> float:
    """Bound on the discounted reward beyond an n_slots window."""
    if gamma >= 1.0:
        raise DivergentHorizon("no finite tail bound at discount 1")
    return d_max * gamma**n_slots / (1.0 - gamma)


# --- Student-t quantile ---------------------------------------------------
# Normal-quantile rational approximation (relative error ~1.2e-9) for large
# sample counts; bisection on the incomplete-beta CDF below that.

_NQ_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_NQ_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
_NQ_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_NQ_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("quantile defined on (0, 1)")
    a, b, c, d = _NQ_A, _NQ_B, _NQ_C, _NQ_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    if p > 1.0 - p_low:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
        ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
    )


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def regularized_betainc(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _t_cdf(t: float, df: float) -> float:
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_betainc(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0.0 else tail


def student_t_quantile(p: float, df: int) -> float:
    """Inverse CDF of Student's t with df degrees of freedom."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile defined on (0, 1)")
    if df >= 200:
        return normal_quantile(p)
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -student_t_quantile(1.0 - p, df)
    hi = 1.0
    for _ in range(80):
        if _t_cdf(hi, df) >= p:
            break
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class EstimateReport:
    """Sample-mean estimate with half-width and tail-truncation allowance."""

    estimate: float
    sigma_hat: float
    eps_t: float
    eps_n: float
    lo: float
    hi: float
    confidence: float
    n_realizations: int
    values: np.ndarray


def estimate(values, config: EvalConfig, eps_n: float = 0.0) -> EstimateReport:
    """Mean of per-realization values with a (1+confidence)/2 Student-t
    half-width; sigma uses the biased 1/T normalizer. The upper edge is
    widened by eps_n to cover the truncated tail.

    The reduction is numpy's pairwise summation over the value vector in
    index order, so results do not depend on how the values were computed
    (serially or fanned out) as long as they land at their own index."""
    v = np.asarray(values, dtype=float)
    t_count = v.shape[0]
    if t_count < 2:
        raise ScenarioInvalid("estimate needs at least two values")
    mean = float(np.mean(v))
    sigma = float(math.sqrt(np.mean((v - mean) ** 2)))
    quant = student_t_quantile((1.0 + config.confidence) / 2.0, t_count - 1)
    eps_t = quant * sigma / math.sqrt(t_count)
    return EstimateReport(
        estimate=mean,
        sigma_hat=sigma,
        eps_t=eps_t,
        eps_n=eps_n,
        lo=mean - eps_t,
        hi=mean + eps_t + eps_n,
        confidence=config.confidence,
        n_realizations=t_count,
        values=v,
    )


def expected_value_from_v(v: ValueTable, scenario_or_model, b0: int = 0) -> float:
    """Average value over all exogenous states at the rollout's start battery."""
    model = as_model(scenario_or_model)
    sel = model.state_b == b0
    return float(np.mean(v.v[sel]))
