"""Random instance/stream generation and the multi-instance sweep."""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

from .analysis import monte_carlo
from .model import Instance, Request, RequestStream
from .offline import solve_lp_optimal, solve_primal_dual
from .online import SEED_MASK, Policy


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    """Inclusive integer ranges for every drawn quantity.

    Producers are drawn uniformly per request at generation time, so the
    stream is a fixed workload with explicit producers.  Set
    ``random_producers`` to leave them for the engine to draw instead.
    """

    m_range: tuple = (1, 100)
    n_range: tuple = (1, 100)
    capacity_range: tuple = (1, 20)
    size_range: tuple = (1, 10)
    distance_range: tuple = (1, 100)
    fill_target: float = 0.5
    seed: int = 0
    equal_capacities: bool = False
    random_producers: bool = False

    def validate(self) -> None:
        for name in ("m_range", "n_range", "capacity_range", "size_range", "distance_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise GeneratorError(f"{name} is empty: {lo} > {hi}")
        if self.m_range[0] < 1 or self.n_range[0] < 1:
            raise GeneratorError("need at least one producer and one consumer")
        if self.capacity_range[0] < 0:
            raise GeneratorError("capacities must be nonnegative")
        if self.distance_range[0] <= 0:
            raise GeneratorError("distances must be positive")
        if self.size_range[0] < 1:
            raise GeneratorError("request sizes must be >= 1")
        if not 0 < self.fill_target <= 1:
            raise GeneratorError("fill_target must be in (0, 1]")


def generate(config: GeneratorConfig) -> tuple:
    """Draw an instance and a stream filling at most ``fill_target`` of the
    total capacity.  The stream stops at the first drawn request that would
    overshoot the target.  Deterministic per ``config.seed``."""
    config.validate()
    rng = random.Random(config.seed & SEED_MASK)
    m = rng.randint(*config.m_range)
    n = rng.randint(*config.n_range)
    if config.equal_capacities:
        capacities = [rng.randint(*config.capacity_range)] * n
    else:
        capacities = [rng.randint(*config.capacity_range) for _ in range(n)]
    distances = [[rng.randint(*config.distance_range) for _ in range(n)] for _ in range(m)]
    inst = Instance.build(capacities, distances)

    budget = int(Fraction(str(config.fill_target)) * inst.total_capacity)
    if config.size_range[0] > budget:
        raise GeneratorError(
            f"minimum request size {config.size_range[0]} exceeds fill budget {budget}"
            f" (total capacity {inst.total_capacity}, fill {config.fill_target})"
        )
    requests = []
    used = 0
    while True:
        size = rng.randint(*config.size_range)
        if used + size > budget:
            break
        producer = None if config.random_producers else rng.randrange(m)
        requests.append(Request(len(requests) + 1, producer, size))
        used += size
    return inst, RequestStream(tuple(requests))


SWEEP_COLUMNS = (
    "instance_id", "m", "n", "total_capacity", "total_demand", "policy", "mean_cost",
    "std_error", "predicted_cost", "opt_cost", "pd_cost", "ratio", "status",
)


@dataclass
class SweepRow:
    instance_id: int
    m: Optional[int] = None
    n: Optional[int] = None
    total_capacity: Optional[int] = None
    total_demand: Optional[int] = None
    policy: str = ""
    mean_cost: Optional[Fraction] = None
    std_error: Optional[float] = None
    predicted_cost: Optional[Fraction] = None
    opt_cost: Optional[Fraction] = None
    pd_cost: Optional[Fraction] = None
    ratio: Optional[Fraction] = None
    status: str = "ok"
    summary: object = field(default=None, repr=False)

    def cells(self) -> list:
        return [_cell(getattr(self, c)) for c in SWEEP_COLUMNS]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return f"{float(value):.6f}"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def instance_seed(base_seed: int, instance_id: int) -> int:
    return (base_seed ^ instance_id) & SEED_MASK


def sweep(
    config: GeneratorConfig,
    policies: Sequence = ("uniform-split", "cap-prop", "greedy"),
    trials: int = 100,
    base_seed: int = 0,
    instances: int = 50,
    verify: bool = False,
) -> list:
    """One row per (instance, policy), ordered by instance then policy.

    Instance ``k`` is generated with seed ``base_seed XOR k``; its trials use
    seeds ``instance_seed + t``.  Failures become rows with a non-``ok``
    status instead of stopping the sweep.
    """
    policies = [Policy.parse(p) for p in policies]
    if not policies:
        raise ValueError("need at least one policy")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = []
    for k in range(instances):
        seed = instance_seed(base_seed, k)
        try:
            inst, stream = generate(replace(config, seed=seed))
            demands = stream.demands(inst.m) if not stream.has_random_producers else None
            opt = solve_lp_optimal(inst, demands)[1] if demands else None
            pd = solve_primal_dual(inst, stream)[2].final_cost if demands else None
        except Exception as exc:  # noqa: BLE001 - flagged row, sweep continues
            rows.append(SweepRow(k, status=f"error: {type(exc).__name__}: {exc}"))
            continue
        base = dict(
            instance_id=k, m=inst.m, n=inst.n, total_capacity=inst.total_capacity,
            total_demand=stream.total_size, pd_cost=pd,
        )
        for policy in policies:
            try:
                summary = monte_carlo(
                    policy, inst, stream, max(trials, 2), seed, verify=verify
                )
            except Exception as exc:  # noqa: BLE001
                rows.append(SweepRow(**base, policy=policy.value, opt_cost=opt,
                                     status=f"error: {type(exc).__name__}: {exc}"))
                continue
            mean = summary.mean_cost_exact
            row_opt = opt if opt is not None else summary.opt_cost
            ratio = mean / row_opt if mean is not None and row_opt else None
            rows.append(SweepRow(
                **base, policy=policy.value, mean_cost=mean, std_error=summary.std_error,
                predicted_cost=summary.predicted_cost, opt_cost=row_opt, ratio=ratio,
                summary=summary,
            ))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()
