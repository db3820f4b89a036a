"""Randomized online allocation engines and the greedy baseline.

Reproducibility contract: every engine draws from a ``random.Random``
(CPython MT19937, identifier :data:`GENERATOR`) seeded with a 64-bit value.
Draws happen in a fixed order: for each round, the producer (only when the
request leaves it unspecified), then one consumer draw per unit block.
Uniform draws use ``randrange(k)``; capacity-proportional draws use
``randrange(total available capacity)`` against cumulative capacities, so no
floating point enters a placement decision.
"""

from __future__ import annotations

import bisect
import enum
import random
import warnings
from fractions import Fraction
from typing import Optional, Union

from .model import (
    Instance,
    OnlineState,
    Report,
    RequestStream,
    RunTrace,
    TraceStep,
    Violation,
    ensure_valid,
    validate_stream,
)

GENERATOR = "python-mt19937"
SEED_MASK = (1 << 64) - 1


class Policy(str, enum.Enum):
    UNIFORM = "uniform"
    UNIFORM_SPLIT = "uniform-split"
    CAPACITY_PROPORTIONAL = "capacity-proportional"
    GREEDY = "greedy"

    @classmethod
    def parse(cls, value) -> "Policy":
        if isinstance(value, cls):
            return value
        value = str(value).strip().lower()
        if value in ("cap-prop", "capprop"):
            return cls.CAPACITY_PROPORTIONAL
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown policy {value!r}") from None

    @property
    def randomized(self) -> bool:
        return self is not Policy.GREEDY

    def __str__(self):
        return self.value


RngLike = Union[int, random.Random, None]


def make_rng(seed: RngLike) -> random.Random:
    if isinstance(seed, random.Random):
        return seed
    return random.Random((seed or 0) & SEED_MASK)


def available_consumers(state: OnlineState, inst: Instance, amount: int) -> list:
    """Consumers that can take ``amount`` more units."""
    if amount < 1:
        raise ValueError("amount must be >= 1")
    return [j for j, (l, c) in enumerate(zip(state.consumer_loads, inst.capacities)) if l + amount <= c]


class _Engine:
    """Integer-cost bookkeeping shared by the engines.

    Costs accumulate as integers over a common denominator; the final cost
    is converted back to an exact Fraction.
    """

    def __init__(self, inst: Instance, policy: Policy, seed: Optional[int]):
        ensure_valid(inst)
        self.inst = inst
        self.loads = [0] * inst.n
        self.icost, self.scale = inst.scaled_distances
        self.cost = 0
        self.trace = RunTrace(policy=policy.value, seed=seed)

    def commit_round(self, t: int, producer: int, placed: dict) -> None:
        dist = self.inst.distances[producer]
        row = self.icost[producer]
        for j in sorted(placed):
            amount = placed[j]
            self.loads[j] += amount
            self.cost += amount * row[j]
            self.trace.steps.append(TraceStep(t, producer, j, amount, dist[j]))

    def abort(self, message: str) -> RunTrace:
        self.trace.aborted = True
        self.trace.diagnostic = message
        return self.finish()

    def finish(self) -> RunTrace:
        self.trace.final_cost = Fraction(self.cost, self.scale)
        return self.trace


def _seed_of(rng: RngLike) -> Optional[int]:
    return None if isinstance(rng, random.Random) else (rng or 0) & SEED_MASK


def _check_stream(stream: RequestStream, inst: Instance) -> None:
    report = validate_stream(stream, inst)
    structural = [v for v in report.violations if v.kind != "capacity"]
    if structural:
        raise ValueError("; ".join(v.message for v in structural))


def _draw_producer(q, inst, rng) -> int:
    return rng.randrange(inst.m) if q.producer is None else q.producer


def run_uniform(inst: Instance, rounds: int, size: int, rng: RngLike = None, producers=None) -> RunTrace:
    """Fixed-size requests, each placed whole on a consumer drawn uniformly
    from those with room for it.

    ``producers`` optionally pins the producer of each round; by default it is
    drawn uniformly.  A round with no consumer able to take ``size`` units ends
    the run with ``aborted`` set.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    if producers is not None and len(producers) != rounds:
        raise ValueError("producers must have one entry per round")
    if len(set(inst.capacities)) > 1:
        warnings.warn("uniform policy assumes equal consumer capacities", stacklevel=2)
    engine = _Engine(inst, Policy.UNIFORM, _seed_of(rng))
    rng = make_rng(rng)
    caps = inst.capacities
    loads = engine.loads
    for t in range(1, rounds + 1):
        fixed = None if producers is None else producers[t - 1]
        i = rng.randrange(inst.m) if fixed is None else fixed
        fits = [j for j in range(inst.n) if loads[j] + size <= caps[j]]
        if not fits:
            return engine.abort(f"round {t}: no consumer can take a request of size {size}")
        j = fits[rng.randrange(len(fits))]
        engine.commit_round(t, i, {j: size})
    return engine.finish()


def _run_blocks(inst: Instance, stream: RequestStream, rng: RngLike, policy: Policy) -> RunTrace:
    _check_stream(stream, inst)
    engine = _Engine(inst, policy, _seed_of(rng))
    rng = make_rng(rng)
    caps = inst.capacities
    loads = engine.loads
    proportional = policy is Policy.CAPACITY_PROPORTIONAL
    # Available consumers in ascending index order; rebuilt only when one fills.
    avail = [j for j in range(inst.n) if caps[j] > 0]
    cumulative = _cumulative(avail, caps)
    remaining = sum(caps)

    for q in stream:
        i = _draw_producer(q, inst, rng)
        if q.size > remaining:
            return engine.abort(
                f"round {q.t}: request of size {q.size} exceeds remaining capacity {remaining}"
            )
        placed = {}
        for _ in range(q.size):
            if proportional:
                k = bisect.bisect_right(cumulative, rng.randrange(cumulative[-1]))
            else:
                k = rng.randrange(len(avail))
            j = avail[k]
            placed[j] = placed.get(j, 0) + 1
            if loads[j] + placed[j] == caps[j]:
                del avail[k]
                cumulative = _cumulative(avail, caps)
        remaining -= q.size
        engine.commit_round(q.t, i, placed)
    return engine.finish()


def _cumulative(avail, caps) -> list:
    out, acc = [], 0
    for j in avail:
        acc += caps[j]
        out.append(acc)
    return out


def run_uniform_split(inst: Instance, stream: RequestStream, rng: RngLike = None) -> RunTrace:
    """Split every request into unit blocks; each block goes to a consumer
    drawn uniformly among those with room left."""
    return _run_blocks(inst, stream, rng, Policy.UNIFORM_SPLIT)


def run_capacity_proportional(inst: Instance, stream: RequestStream, rng: RngLike = None) -> RunTrace:
    """Unit blocks placed with probability ``c_j / sum of available c``."""
    return _run_blocks(inst, stream, rng, Policy.CAPACITY_PROPORTIONAL)


def run_greedy(inst: Instance, stream: RequestStream, rng: RngLike = None) -> RunTrace:
    """Fill the cheapest available consumer first (lowest index on ties).

    Deterministic given the producers; ``rng`` is only consulted for requests
    without an explicit producer.
    """
    _check_stream(stream, inst)
    engine = _Engine(inst, Policy.GREEDY, _seed_of(rng))
    rng = make_rng(rng)
    caps = inst.capacities
    loads = engine.loads
    order = [sorted(range(inst.n), key=lambda j: (row[j], j)) for row in engine.icost]
    remaining = sum(caps)
    for q in stream:
        i = _draw_producer(q, inst, rng)
        if q.size > remaining:
            return engine.abort(
                f"round {q.t}: request of size {q.size} exceeds remaining capacity {remaining}"
            )
        need = q.size
        placed = {}
        for j in order[i]:
            room = caps[j] - loads[j]
            if room > 0:
                take = min(room, need)
                placed[j] = take
                need -= take
                if not need:
                    break
        remaining -= q.size
        engine.commit_round(q.t, i, placed)
    return engine.finish()


def simulate(policy, inst: Instance, stream: RequestStream, rng: RngLike = None) -> RunTrace:
    """Run ``policy`` on ``stream``.

    The uniform policy needs every request to have the same size; its
    producers come from the stream (drawn when unspecified).
    """
    policy = Policy.parse(policy)
    if policy is Policy.UNIFORM:
        sizes = {q.size for q in stream}
        if len(sizes) > 1:
            raise ValueError("uniform policy needs equal request sizes")
        _check_stream(stream, inst)
        size = sizes.pop() if sizes else 1
        producers = [q.producer for q in stream]
        return run_uniform(inst, len(producers), size, rng, producers=producers)
    if policy is Policy.UNIFORM_SPLIT:
        return run_uniform_split(inst, stream, rng)
    if policy is Policy.CAPACITY_PROPORTIONAL:
        return run_capacity_proportional(inst, stream, rng)
    return run_greedy(inst, stream, rng)


def replay(trace: RunTrace, inst: Instance) -> Report:
    """Re-apply a trace from empty loads, checking capacities, distances and
    the recorded final cost."""
    violations = []
    loads = [0] * inst.n
    cost = Fraction(0)
    last_round = 0
    for k, s in enumerate(trace.steps):
        if not (0 <= s.producer < inst.m and 0 <= s.consumer < inst.n):
            violations.append(Violation("index", (k,), f"step {k}: edge ({s.producer},{s.consumer}) out of range"))
            continue
        if s.amount < 1:
            violations.append(Violation("amount", (k,), f"step {k}: amount {s.amount} < 1"))
        if s.round < last_round:
            violations.append(Violation("order", (k,), f"step {k}: round {s.round} after {last_round}"))
        last_round = s.round
        if s.distance != inst.distances[s.producer][s.consumer]:
            violations.append(
                Violation("distance", (k,), f"step {k}: distance {s.distance} != instance value")
            )
        loads[s.consumer] += s.amount
        if loads[s.consumer] > inst.capacities[s.consumer]:
            violations.append(
                Violation(
                    "capacity", (k,),
                    f"step {k} (round {s.round}): consumer {s.consumer} at {loads[s.consumer]}"
                    f" > {inst.capacities[s.consumer]}",
                )
            )
        cost += s.amount * inst.distances[s.producer][s.consumer]
    if cost != trace.final_cost:
        violations.append(Violation("cost", (), f"recomputed cost {cost} != recorded {trace.final_cost}"))
    return Report(tuple(violations), {"cost": cost, "consumer_loads": tuple(loads)})
