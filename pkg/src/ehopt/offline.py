"""Non-causal scheduling over one realized horizon.

Given the realized harvests, packet sizes and per-packet energy costs
of a finite window, picking the transmit slots is a small mixed-integer
linear program: binary transmit fractions coupled to battery levels by
the storage recursion (written as inequalities, which is equivalent to
the equality recursion because any slack battery can be topped up
without hurting feasibility). The LP relaxation upper-bounds the
integer optimum and is often integral outright; when it is not, an
LP-based branch-and-bound finishes the job. An exhaustive enumerator
is kept as the correctness oracle for small windows.
"""
import heapq
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NoFeasibleSolution, TooLarge
from .simplex import STATUS_OPTIMAL, LpProblem, LpSolution, simplex_solve

INTEGRALITY_TOL = 1e-6
# A node whose relaxation bound clears the incumbent by less than this is
# discarded; keeps equal-value renumberings from being re-explored.
PRUNE_EPS = 1e-9
EXHAUSTIVE_GUARD = 20


@dataclass(frozen=True, eq=False)
class OfflineInstance:
    """One realized window: per-slot harvests, packet sizes and costs."""

    harvests: np.ndarray  # energy units credited during each slot
    packet_bits: np.ndarray
    costs: np.ndarray  # energy units to transmit that slot's packet
    b_max: int
    b0: int
    discount: float

    def __post_init__(self):
        harv = np.asarray(self.harvests, dtype=np.int64)
        bits = np.asarray(self.packet_bits, dtype=float)
        costs = np.asarray(self.costs, dtype=np.int64)
        object.__setattr__(self, "harvests", harv)
        object.__setattr__(self, "packet_bits", bits)
        object.__setattr__(self, "costs", costs)
        n = harv.shape[0]
        if n == 0 or bits.shape != (n,) or costs.shape != (n,):
            raise ValueError("per-slot sequences must be nonempty and equal length")
        if np.any(costs < 1):
            raise ValueError("energy costs must be positive")
        if np.any(harv < 0):
            raise ValueError("harvests must be nonnegative")
        if not 0 <= self.b0 <= self.b_max:
            raise ValueError("initial battery outside [0, b_max]")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount outside [0, 1]")

    @property
    def n_slots(self) -> int:
        return int(self.harvests.shape[0])

    def weights(self) -> np.ndarray:
        """Per-slot objective weights: discount^n * packet bits."""
        return self.discount ** np.arange(self.n_slots) * self.packet_bits

    def to_json(self) -> str:
        return json.dumps(
            {
                "harvests": self.harvests.tolist(),
                "packet_bits": self.packet_bits.tolist(),
                "costs": self.costs.tolist(),
                "b_max": self.b_max,
                "b0": self.b0,
                "discount": self.discount,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "OfflineInstance":
        doc = json.loads(text)
        return cls(
            np.array(doc["harvests"]),
            np.array(doc["packet_bits"]),
            np.array(doc["costs"]),
            int(doc["b_max"]),
            int(doc["b0"]),
            float(doc["discount"]),
        )


def schedule_value(x, instance: OfflineInstance) -> float:
    """Objective of a transmit schedule; the single evaluator shared by
    every offline solver so equal schedules score bit-identically."""
    total = 0.0
    w = instance.weights()
    for n in range(instance.n_slots):
        if x[n]:
            total += w[n]
    return total


def simulate_schedule(x, instance: OfflineInstance):
    """Run the equality battery recursion; None if the schedule overdraws."""
    b = instance.b0
    levels = np.empty(instance.n_slots + 1, dtype=np.int64)
    levels[0] = b
    for n in range(instance.n_slots):
        if x[n]:
            if instance.costs[n] > b:
                return None
            b -= int(instance.costs[n])
        b = min(b + int(instance.harvests[n]), instance.b_max)
        levels[n + 1] = b
    return levels


def build_milp(instance: OfflineInstance) -> LpProblem:
    """Relaxed program over [x_0..x_N, B_0..B_N] with box bounds.

    Rows: per-slot coupling cost_n * x_n <= B_n, and the battery
    recursion B_{n+1} - B_n + cost_n * x_n <= harvest_n. B_0 is pinned
    to the initial level through its bounds.
    """
    n = instance.n_slots
    nv = 2 * n
    c = np.zeros(nv)
    c[:n] = instance.weights()

    rows = np.zeros((2 * n - 1, nv))
    rhs = np.zeros(2 * n - 1)
    for k in range(n):  # coupling: cost_k x_k - B_k <= 0
        rows[k, k] = instance.costs[k]
        rows[k, n + k] = -1.0
    for k in range(n - 1):  # recursion: B_{k+1} - B_k + cost_k x_k <= harvest_k
        rows[n + k, n + k + 1] = 1.0
        rows[n + k, n + k] = -1.0
        rows[n + k, k] = instance.costs[k]
        rhs[n + k] = instance.harvests[k]

    lo = np.zeros(nv)
    up = np.ones(nv)
    up[n:] = instance.b_max
    lo[n] = up[n] = instance.b0
    return LpProblem(c, rows, rhs, lo, up, n_slots=n)


def lp_relaxation_bound(instance: OfflineInstance) -> LpSolution:
    """Optimal value of the relaxation; flags schedules that landed integral."""
    sol = simplex_solve(build_milp(instance))
    if sol.status != STATUS_OPTIMAL:
        return sol
    integral = bool(np.all(np.abs(sol.x - np.round(sol.x)) <= INTEGRALITY_TOL))
    return LpSolution(sol.status, sol.x, sol.b, sol.value, sol.variables,
                      sol.iterations, integral)


@dataclass(order=True)
class BabNode:
    """Search node: bound inherited from the parent relaxation plus the
    partial schedule fixed so far. Ordered for the best-bound heap."""

    sort_key: tuple = field(compare=True)
    upper_bound: float = field(compare=False, default=np.inf)
    fixed: dict = field(compare=False, default_factory=dict)


@dataclass(frozen=True, eq=False)
class MilpSolution:
    x: np.ndarray  # int8 schedule
    value: float
    proved_optimal: bool
    nodes_explored: int


@dataclass(frozen=True)
class BabConfig:
    timeout_s: float = 20.0
    node_selection: str = "best"  # or "depth" (LIFO tie order)
    # Seed the incumbent with the exact window optimum from the battery
    # recursion; the LP search then only has to certify (or match) it.
    # False starts from the all-drop incumbent only.
    warm_start: bool = True


def _value_granularity(instance: OfflineInstance) -> float:
    """Spacing of the lattice all integral schedule values live on.

    Undiscounted windows with integer packet sizes score in multiples of
    gcd(packet bits); relaxation bounds can be snapped down to that grid
    before pruning without ever discarding a strictly better schedule.
    Returns 0 when no such grid exists (any discounting breaks it).
    """
    if instance.discount != 1.0:
        return 0.0
    bits = instance.packet_bits
    if not np.all(bits == np.round(bits)):
        return 0.0
    g = 0
    for v in np.round(bits).astype(np.int64):
        g = math.gcd(g, int(v))
    return float(g)


def _greedy_schedule(instance: OfflineInstance) -> np.ndarray:
    """Transmit-when-affordable schedule; cheap feasible warm start."""
    x = np.zeros(instance.n_slots, dtype=np.int8)
    b = instance.b0
    for k in range(instance.n_slots):
        if instance.costs[k] <= b:
            x[k] = 1
            b -= int(instance.costs[k])
        b = min(b + int(instance.harvests[k]), instance.b_max)
    return x


def optimal_schedule_dp(instance: OfflineInstance) -> np.ndarray:
    """Exact optimum of one realized window by recursion over battery levels.

    The battery is the only coupling between slots, so value-to-go per
    (slot, level) solves the window in O(n_slots * b_max). Used to seed
    the branch-and-bound incumbent; ties prefer dropping.
    """
    n = instance.n_slots
    nb = instance.b_max + 1
    w = instance.weights()
    levels = np.arange(nb)
    value_to_go = np.zeros(nb)
    take = np.zeros((n, nb), dtype=bool)
    for k in range(n - 1, -1, -1):
        b_drop = np.minimum(levels + instance.harvests[k], instance.b_max)
        drop_val = value_to_go[b_drop]
        can = levels >= instance.costs[k]
        b_tx = np.minimum(levels - np.where(can, instance.costs[k], 0) + instance.harvests[k],
                          instance.b_max)
        tx_val = np.where(can, w[k] + value_to_go[b_tx], -np.inf)
        take[k] = can & (tx_val > drop_val)
        value_to_go = np.where(take[k], tx_val, drop_val)
    x = np.zeros(n, dtype=np.int8)
    b = instance.b0
    for k in range(n):
        if take[k, b]:
            x[k] = 1
            b -= int(instance.costs[k])
        b = min(b + int(instance.harvests[k]), instance.b_max)
    return x


def _node_lp(base: LpProblem, fixed: dict) -> LpSolution:
    if not fixed:
        return simplex_solve(base)
    lo = base.lower.copy()
    up = base.upper.copy()
    for slot, val in fixed.items():
        lo[slot] = up[slot] = float(val)
    return simplex_solve(LpProblem(base.objective, base.rows, base.rhs, lo, up,
                                   n_slots=base.n_slots))


def bab_solve(instance: OfflineInstance, config: BabConfig = BabConfig()) -> MilpSolution:
    """LP-based branch-and-bound on the transmit schedule.

    Integral relaxations update the incumbent (value recomputed with the
    shared evaluator after rebuilding the battery path); fractional ones
    branch on their lowest-index fractional slot. Nodes whose inherited
    bound cannot beat the incumbent are dropped without a solve. On
    timeout the incumbent is returned unproved.
    """
    base = build_milp(instance)
    deadline = time.monotonic() + config.timeout_s
    n = instance.n_slots
    grain = _value_granularity(instance)

    def snap(bound: float) -> float:
        # tightest integral-schedule value a relaxation bound still allows
        if grain > 0.0 and math.isfinite(bound):
            return grain * math.floor(bound / grain + 1e-9)
        return bound

    incumbent_x = np.zeros(n, dtype=np.int8)  # all-drop is always feasible
    incumbent_val = schedule_value(incumbent_x, instance)
    if config.warm_start:
        warm = optimal_schedule_dp(instance)
        warm_val = schedule_value(warm, instance)
        if warm_val > incumbent_val:
            incumbent_x, incumbent_val = warm, warm_val

    counter = 0
    heap: list[BabNode] = []

    def push(bound: float, fixed: dict):
        nonlocal counter
        counter += 1
        if config.node_selection == "depth":
            key = (-len(fixed), -counter)
        else:
            # best bound first; equal bounds resolve toward deeper nodes so
            # tie plateaus get dived for an incumbent instead of flooded
            key = (-bound, -len(fixed), counter)
        heapq.heappush(heap, BabNode(key, bound, fixed))

    push(np.inf, {})
    nodes = 0
    proved = True
    while heap:
        if time.monotonic() > deadline:
            proved = False
            break
        node = heapq.heappop(heap)
        bound, fixed = node.upper_bound, node.fixed
        # Plunge: explore this subtree depth-first along the x=1 branches,
        # queueing the x=0 siblings. Reaches an integral leaf (or a prune)
        # quickly even on wide bound plateaus, where pure best-first keeps
        # hopping between subtrees before any incumbent exists.
        while True:
            if snap(bound) <= incumbent_val + PRUNE_EPS:
                break
            sol = _node_lp(base, fixed)
            nodes += 1
            if sol.status != STATUS_OPTIMAL:
                if not fixed:
                    raise NoFeasibleSolution("root relaxation is infeasible")
                break
            if snap(sol.value) <= incumbent_val + PRUNE_EPS:
                break
            frac = np.where(np.abs(sol.x - np.round(sol.x)) > INTEGRALITY_TOL)[0]
            if frac.size == 0:
                x_int = np.round(sol.x).astype(np.int8)
                if simulate_schedule(x_int, instance) is None:
                    # relaxation said feasible but the integral rebuild
                    # failed; only reachable through float dust
                    break
                val = schedule_value(x_int, instance)
                if val > incumbent_val:
                    incumbent_val = val
                    incumbent_x = x_int
                break
            slot = int(frac[0])
            sibling = dict(fixed)
            sibling[slot] = 0
            push(sol.value, sibling)
            fixed = dict(fixed)
            fixed[slot] = 1
            bound = sol.value

    return MilpSolution(incumbent_x, incumbent_val, proved, nodes)


def exhaustive_solve(instance: OfflineInstance) -> MilpSolution:
    """Enumerate every schedule; the oracle branch-and-bound is held to.

    Vectorized over all 2^n schedules, but the objective is accumulated
    slot by slot in the same order as `schedule_value`, so the returned
    value is the identical double.
    """
    n = instance.n_slots
    if n > EXHAUSTIVE_GUARD:
        raise TooLarge(f"{n} slots exceeds the {EXHAUSTIVE_GUARD}-slot enumeration guard")
    codes = np.arange(1 << n, dtype=np.int64)
    w = instance.weights()
    battery = np.full(codes.shape, instance.b0, dtype=np.int64)
    feasible = np.ones(codes.shape, dtype=bool)
    value = np.zeros(codes.shape)
    for k in range(n):
        want = ((codes >> k) & 1) == 1
        feasible &= ~want | (battery >= instance.costs[k])
        battery = np.minimum(
            battery - want * instance.costs[k] + instance.harvests[k], instance.b_max
        )
        value += np.where(want, w[k], 0.0)

    value[~feasible] = -1.0
    best = int(np.argmax(value))
    best_x = ((best >> np.arange(n)) & 1).astype(np.int8)
    return MilpSolution(best_x, schedule_value(best_x, instance), True, 1 << n)
