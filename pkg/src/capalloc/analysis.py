"""Closed-form expected costs, competitive ratios and the Monte Carlo harness
that confronts them with simulation and the offline optimum."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

from .model import AllocationError, Instance, RequestStream, check_feasibility, ensure_valid
from .offline import solve_lp_optimal
from .online import SEED_MASK, Policy, replay, simulate


class AbortRateError(RuntimeError):
    """Too many trials hit a dead end; the summary is attached."""

    def __init__(self, message: str, summary: "ExperimentSummary"):
        super().__init__(message)
        self.summary = summary


class InvariantError(RuntimeError):
    pass


def mean_distance(inst: Instance) -> Fraction:
    ensure_valid(inst)
    return sum((d for row in inst.distances for d in row), Fraction(0)) / (inst.m * inst.n)


def capacity_weighted_mean(inst: Instance) -> Fraction:
    """``sum_j (sum_i d_ij) c_j / (m sum_j c_j)``: the expected distance of a
    block placed with probability proportional to capacity."""
    ensure_valid(inst)
    total = inst.total_capacity
    if total == 0:
        raise ValueError("capacity-weighted mean needs positive total capacity")
    weighted = sum((sum(inst.column(j)) * c for j, c in enumerate(inst.capacities)), Fraction(0))
    return weighted / (inst.m * total)


def _row_mean(inst: Instance, i: int) -> Fraction:
    return sum(inst.distances[i], Fraction(0)) / inst.n


def _row_capacity_mean(inst: Instance, i: int) -> Fraction:
    return sum((d * c for d, c in zip(inst.distances[i], inst.capacities)), Fraction(0)) / inst.total_capacity


def predict_cost(policy, inst: Instance, stream: RequestStream) -> Optional[Fraction]:
    """Expected total cost of a randomized policy, ``None`` for greedy.

    Requests with a random producer use the instance-wide mean; a request pinned
    to producer ``i`` uses that producer's row (the conditional expectation the
    instance-wide mean averages over).
    """
    policy = Policy.parse(policy)
    if policy is Policy.GREEDY:
        return None
    if policy is Policy.CAPACITY_PROPORTIONAL:
        overall, per_row = capacity_weighted_mean, _row_capacity_mean
    else:
        overall, per_row = mean_distance, _row_mean
    if stream.r == 0:
        return Fraction(0)
    cache = {}
    total = Fraction(0)
    for q in stream:
        key = q.producer
        if key not in cache:
            cache[key] = overall(inst) if key is None else per_row(inst, key)
        total += q.size * cache[key]
    return total


@dataclass(frozen=True)
class Predictions:
    mean_distance: Fraction
    cap_weighted_distance: Fraction
    min_distance: Fraction
    max_distance: Fraction
    avg_ratio_uniform: Fraction
    avg_ratio_capprop: Fraction
    worst_ratio: Fraction

    def to_dict(self) -> dict:
        return asdict(self)


def competitive_ratios(inst: Instance) -> Predictions:
    ensure_valid(inst)
    lo = inst.min_distance
    if lo <= 0:
        raise ValueError("competitive ratios need strictly positive distances")
    mean = mean_distance(inst)
    weighted = capacity_weighted_mean(inst)
    hi = inst.max_distance
    return Predictions(mean, weighted, lo, hi, mean / lo, weighted / lo, hi / lo)


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    cost: Optional[Fraction]
    placed_units: int
    aborted: bool
    opt_cost: Optional[Fraction] = None
    diagnostic: str = ""


@dataclass
class ExperimentSummary:
    policy: str
    trials: int
    completed: int
    aborted: int
    empirical_mean_cost: Optional[float]
    std_error: Optional[float]
    predicted_cost: Optional[Fraction]
    opt_cost: Optional[Fraction]
    empirical_avg_ratio: Optional[float]
    fill_fraction: float
    min_trial_ratio: Optional[float] = None
    max_trial_ratio: Optional[float] = None
    max_prefix_ratio: Optional[float] = None
    mean_cost_exact: Optional[Fraction] = None
    results: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "results"}
        return out

    def csv_rows(self) -> list:
        """``trial,seed,cost,placed_units,aborted`` rows."""
        return [
            [r.trial, r.seed, "" if r.cost is None else _fmt(r.cost), r.placed_units, int(r.aborted)]
            for r in self.results
        ]


def _fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


Workload = Union[RequestStream, Callable[[int], RequestStream]]


def monte_carlo(
    policy,
    inst: Instance,
    workload: Workload,
    trials: int,
    base_seed: int = 0,
    *,
    prefix_ratios: bool = False,
    verify: bool = False,
    max_abort_rate: float = 0.01,
    with_opt: bool = True,
) -> ExperimentSummary:
    """Run ``trials`` seeded simulations (trial k uses seed ``base_seed + k``).

    ``workload`` is a fixed stream or a callable mapping the trial seed to a
    stream.  OPT is the offline optimum on each trial's realized demands, so a
    random-producer stream gets a per-trial OPT; ``opt_cost`` is their mean.
    Aborted trials are counted and excluded.  More than ``max_abort_rate``
    aborts raises :class:`AbortRateError`.
    """
    policy = Policy.parse(policy)
    if trials < 2:
        raise ValueError("monte_carlo needs at least 2 trials")
    ensure_valid(inst)
    opt_cache = {}
    predictions = []
    results = []
    placed_total = 0
    prefix_costs = {}
    prefix_opts = {}

    for k in range(trials):
        seed = (base_seed + k) & SEED_MASK
        stream = workload(seed) if callable(workload) else workload
        try:
            trace = simulate(policy, inst, stream, seed)
        except (AllocationError, ValueError) as exc:
            results.append(TrialResult(k, seed, None, 0, True, diagnostic=str(exc)))
            continue
        if verify:
            _verify(trace, inst)
        placed_total += trace.placed_units
        if trace.aborted:
            results.append(TrialResult(k, seed, None, trace.placed_units, True, diagnostic=trace.diagnostic))
            continue
        opt = None
        if with_opt:
            demands = trace.realized_demands(inst.m)
            if demands not in opt_cache:
                opt_cache[demands] = solve_lp_optimal(inst, demands)[1]
            opt = opt_cache[demands]
            if opt > trace.final_cost:
                raise InvariantError(f"trial {k}: cost {trace.final_cost} below OPT {opt}")
        results.append(TrialResult(k, seed, trace.final_cost, trace.placed_units, False, opt))
        if policy.randomized:
            if callable(workload):
                predictions.append(predict_cost(policy, inst, stream))
            elif not predictions:
                predictions.append(predict_cost(policy, inst, stream))
        if prefix_ratios:
            _accumulate_prefix(trace, inst, prefix_costs, prefix_opts, opt_cache)

    done = [r for r in results if not r.aborted]
    aborted = len(results) - len(done)
    costs = [r.cost for r in done]
    mean = sum(costs, Fraction(0)) / len(costs) if costs else None
    se = None
    if len(costs) >= 2:
        fmean = float(mean)
        var = sum((float(c) - fmean) ** 2 for c in costs) / (len(costs) - 1)
        se = math.sqrt(var) / math.sqrt(len(costs))
    predicted = None
    if predictions:
        predicted = sum(predictions, Fraction(0)) / len(predictions)
    opt_mean = None
    ratio = min_ratio = max_ratio = None
    if with_opt and done:
        opts = [r.opt_cost for r in done]
        opt_mean = sum(opts, Fraction(0)) / len(opts)
        if opt_mean > 0:
            ratio = float(mean / opt_mean)
        trial_ratios = [float(r.cost / r.opt_cost) for r in done if r.opt_cost > 0]
        if trial_ratios:
            min_ratio, max_ratio = min(trial_ratios), max(trial_ratios)
    max_prefix = None
    if prefix_ratios and prefix_costs:
        ratios = [
            float(sum(prefix_costs[t], Fraction(0)) / sum(prefix_opts[t], Fraction(0)))
            for t in prefix_costs
            if sum(prefix_opts[t], Fraction(0)) > 0
        ]
        max_prefix = max(ratios) if ratios else None

    total_cap = inst.total_capacity
    summary = ExperimentSummary(
        policy=policy.value,
        trials=trials,
        completed=len(done),
        aborted=aborted,
        empirical_mean_cost=None if mean is None else float(mean),
        std_error=se,
        predicted_cost=predicted,
        opt_cost=opt_mean,
        empirical_avg_ratio=ratio,
        fill_fraction=(placed_total / trials / total_cap) if total_cap else 0.0,
        min_trial_ratio=min_ratio,
        max_trial_ratio=max_ratio,
        max_prefix_ratio=max_prefix,
        mean_cost_exact=mean,
        results=results,
    )
    if aborted > max_abort_rate * trials:
        raise AbortRateError(f"{aborted} of {trials} trials aborted", summary)
    return summary


def _accumulate_prefix(trace, inst, prefix_costs, prefix_opts, opt_cache) -> None:
    demands = [0] * inst.m
    cost = Fraction(0)
    by_round = {}
    for s in trace.steps:
        by_round.setdefault(s.round, []).append(s)
    for t in sorted(by_round):
        for s in by_round[t]:
            demands[s.producer] += s.amount
            cost += s.amount * s.distance
        key = tuple(demands)
        if key not in opt_cache:
            opt_cache[key] = solve_lp_optimal(inst, key)[1]
        prefix_costs.setdefault(t, []).append(cost)
        prefix_opts.setdefault(t, []).append(opt_cache[key])


def _verify(trace, inst) -> None:
    report = replay(trace, inst)
    if not report:
        raise InvariantError("; ".join(v.message for v in report.violations))
    alloc = trace.allocation(inst.m, inst.n)
    feasible = check_feasibility(alloc, inst, trace.realized_demands(inst.m))
    if not feasible:
        raise InvariantError("; ".join(v.message for v in feasible.violations))
