"""Domain types and exact cost/feasibility accounting.

Loads, sizes and capacities are integer units; distances are
:class:`fractions.Fraction`.  Nothing in this module uses floating point, so
feasibility decisions are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

Number = Union[int, Fraction, str]


class AllocationError(ValueError):
    """Base class for errors raised by solvers and engines."""


class DimensionError(AllocationError):
    pass


class InfeasibleError(AllocationError):
    """Total demand cannot be placed within the consumer capacities."""


def as_fraction(value: Number) -> Fraction:
    if isinstance(value, bool):
        raise TypeError("booleans are not distances")
    if isinstance(value, float):
        # Shortest repr, so 0.1 means 1/10 and not its binary expansion.
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class Violation:
    kind: str
    index: tuple
    message: str


@dataclass(frozen=True)
class Report:
    """Outcome of a report-style check.  Truthy when nothing was violated."""

    violations: tuple = ()
    details: dict = field(default_factory=dict, compare=False)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def kinds(self) -> set:
        return {v.kind for v in self.violations}


@dataclass(frozen=True)
class Instance:
    """Static bipartite graph: ``m`` producers, ``n`` capacitated consumers.

    ``m`` and ``n`` are stored explicitly so malformed inputs can be built and
    then diagnosed by :func:`validate_instance`.  Use :meth:`build` to derive
    them from the matrix.
    """

    m: int
    n: int
    capacities: tuple
    distances: tuple

    def __post_init__(self):
        object.__setattr__(self, "capacities", tuple(int(c) for c in self.capacities))
        object.__setattr__(
            self,
            "distances",
            tuple(tuple(as_fraction(d) for d in row) for row in self.distances),
        )

    @classmethod
    def build(cls, capacities: Sequence[int], distances: Sequence[Sequence[Number]]) -> "Instance":
        return cls(len(distances), len(capacities), capacities, distances)

    @property
    def total_capacity(self) -> int:
        return sum(self.capacities)

    @property
    def min_distance(self) -> Fraction:
        return min(min(row) for row in self.distances)

    @property
    def max_distance(self) -> Fraction:
        return max(max(row) for row in self.distances)

    @property
    def positive_distances(self) -> bool:
        """Whether ratio computations are defined (``min d > 0``)."""
        return self.min_distance > 0

    def column(self, j: int) -> tuple:
        return tuple(row[j] for row in self.distances)

    @cached_property
    def scaled_distances(self) -> tuple:
        """``(costs, scale)``: integer matrix with ``costs[i][j] == d_ij * scale``."""
        scale = 1
        for row in self.distances:
            for d in row:
                scale = scale * d.denominator // math.gcd(scale, d.denominator)
        return tuple(tuple(int(d * scale) for d in row) for row in self.distances), scale

    @cached_property
    def report(self) -> "Report":
        return validate_instance(self)


@dataclass(frozen=True)
class Request:
    """One online request.  ``producer`` is ``None`` when the engine should
    draw it uniformly at random."""

    t: int
    producer: Optional[int]
    size: int


@dataclass(frozen=True)
class RequestStream:
    requests: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "requests", tuple(self.requests))

    @classmethod
    def from_sizes(cls, sizes: Iterable[int], producers: Optional[Iterable[Optional[int]]] = None):
        sizes = list(sizes)
        producers = [None] * len(sizes) if producers is None else list(producers)
        if len(producers) != len(sizes):
            raise ValueError("producers and sizes differ in length")
        return cls(tuple(Request(t, p, s) for t, (p, s) in enumerate(zip(producers, sizes), start=1)))

    @property
    def r(self) -> int:
        return len(self.requests)

    def __len__(self) -> int:
        return len(self.requests)

    def __iter__(self):
        return iter(self.requests)

    @property
    def total_size(self) -> int:
        return sum(q.size for q in self.requests)

    @property
    def has_random_producers(self) -> bool:
        return any(q.producer is None for q in self.requests)

    def demands(self, m: int) -> tuple:
        """Aggregate per-producer demand.  Requires explicit producers."""
        out = [0] * m
        for q in self.requests:
            if q.producer is None:
                raise ValueError(f"request t={q.t} has no producer; demands are undefined")
            out[q.producer] += q.size
        return tuple(out)

    def prefix(self, t: int) -> "RequestStream":
        return RequestStream(self.requests[:t])


@dataclass(frozen=True)
class Allocation:
    """Edge loads ``loads[i][j]`` (units routed from producer i to consumer j)."""

    loads: tuple

    def __post_init__(self):
        object.__setattr__(self, "loads", tuple(tuple(int(x) for x in row) for row in self.loads))

    @classmethod
    def zeros(cls, m: int, n: int) -> "Allocation":
        return cls(tuple((0,) * n for _ in range(m)))

    @property
    def shape(self) -> tuple:
        return (len(self.loads), len(self.loads[0]) if self.loads else 0)

    def row_sums(self) -> tuple:
        return tuple(sum(row) for row in self.loads)

    def col_sums(self) -> tuple:
        return tuple(sum(col) for col in zip(*self.loads)) if self.loads else ()

    def __add__(self, other: "Allocation") -> "Allocation":
        if self.shape != other.shape:
            raise DimensionError(f"shapes differ: {self.shape} vs {other.shape}")
        return Allocation(
            tuple(tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.loads, other.loads))
        )

    def to_lists(self) -> list:
        return [list(row) for row in self.loads]


@dataclass
class OnlineState:
    """Mutable, single-owner state of an online run."""

    consumer_loads: list
    accumulated_cost: Fraction = Fraction(0)
    round: int = 0

    @classmethod
    def initial(cls, inst: Instance) -> "OnlineState":
        return cls([0] * inst.n)

    def place(self, inst: Instance, producer: int, consumer: int, amount: int) -> None:
        if self.consumer_loads[consumer] + amount > inst.capacities[consumer]:
            raise AllocationError(f"consumer {consumer} would exceed capacity")
        self.consumer_loads[consumer] += amount
        self.accumulated_cost += amount * inst.distances[producer][consumer]


@dataclass(frozen=True)
class TraceStep:
    round: int
    producer: int
    consumer: int
    amount: int
    distance: Fraction


@dataclass
class RunTrace:
    """Audit trail of a run.

    Steps within one round are aggregated per consumer (ascending consumer
    index), so a split request that sent 3 unit blocks to consumer 2 shows up
    as a single step of amount 3.
    """

    steps: list = field(default_factory=list)
    final_cost: Fraction = Fraction(0)
    aborted: bool = False
    diagnostic: str = ""
    policy: str = ""
    seed: Optional[int] = None

    @property
    def placed_units(self) -> int:
        return sum(s.amount for s in self.steps)

    def allocation(self, m: int, n: int) -> Allocation:
        loads = [[0] * n for _ in range(m)]
        for s in self.steps:
            loads[s.producer][s.consumer] += s.amount
        return Allocation(loads)

    def consumer_loads(self, n: int) -> list:
        out = [0] * n
        for s in self.steps:
            out[s.consumer] += s.amount
        return out

    def realized_demands(self, m: int) -> tuple:
        out = [0] * m
        for s in self.steps:
            out[s.producer] += s.amount
        return tuple(out)

    def cost_by_round(self) -> list:
        """Cumulative cost after each round that placed something, as
        ``(round, cost)`` pairs."""
        out = []
        acc = Fraction(0)
        for s in self.steps:
            acc += s.amount * s.distance
            if out and out[-1][0] == s.round:
                out[-1] = (s.round, acc)
            else:
                out.append((s.round, acc))
        return out


def validate_instance(inst: Instance) -> Report:
    violations = []
    if inst.m < 1:
        violations.append(Violation("dimension", (), f"m={inst.m} must be >= 1"))
    if inst.n < 1:
        violations.append(Violation("dimension", (), f"n={inst.n} must be >= 1"))
    if len(inst.capacities) != inst.n:
        violations.append(
            Violation("dimension", (), f"{len(inst.capacities)} capacities for n={inst.n}")
        )
    if len(inst.distances) != inst.m:
        violations.append(
            Violation("dimension", (), f"distance matrix has {len(inst.distances)} rows, m={inst.m}")
        )
    for i, row in enumerate(inst.distances):
        if len(row) != inst.n:
            violations.append(
                Violation("dimension", (i,), f"distance row {i} has {len(row)} columns, n={inst.n}")
            )
        for j, d in enumerate(row):
            if d < 0:
                violations.append(Violation("negative", (i, j), f"distance[{i}][{j}] = {d}"))
    for j, c in enumerate(inst.capacities):
        if c < 0:
            violations.append(Violation("negative", (j,), f"capacity[{j}] = {c}"))
    details = {}
    if not violations:
        details["positive_distances"] = inst.positive_distances
    return Report(tuple(violations), details)


def ensure_valid(inst: Instance) -> None:
    report = inst.report
    if not report:
        raise DimensionError("; ".join(v.message for v in report.violations))


def validate_stream(stream: RequestStream, inst: Instance) -> Report:
    """Round numbering, producer range, positive sizes and prefix feasibility."""
    violations = []
    total_capacity = inst.total_capacity
    cumulative = 0
    for k, q in enumerate(stream.requests, start=1):
        if q.t != k:
            violations.append(Violation("round", (k,), f"request {k} has t={q.t}"))
        if q.producer is not None and not 0 <= q.producer < inst.m:
            violations.append(Violation("producer", (k,), f"producer {q.producer} out of range"))
        if q.size < 1:
            violations.append(Violation("size", (k,), f"size {q.size} < 1"))
        cumulative += q.size
        if cumulative > total_capacity:
            violations.append(
                Violation(
                    "capacity", (k,),
                    f"cumulative size {cumulative} exceeds total capacity {total_capacity} at t={k}",
                )
            )
    return Report(tuple(violations))


def _check_shape(alloc: Allocation, inst: Instance) -> None:
    if len(alloc.loads) != inst.m or any(len(row) != inst.n for row in alloc.loads):
        raise DimensionError(f"allocation shape {alloc.shape} != ({inst.m}, {inst.n})")


def total_cost(alloc: Allocation, inst: Instance) -> Fraction:
    """Weighted sum of edge loads, exact."""
    _check_shape(alloc, inst)
    return sum(
        (l * d for lrow, drow in zip(alloc.loads, inst.distances) for l, d in zip(lrow, drow)),
        Fraction(0),
    )


def check_feasibility(alloc: Allocation, inst: Instance, demands: Sequence[int]) -> Report:
    """Producer request equalities and consumer capacity bounds.

    ``details`` carries ``consumer_slack`` (c_j minus column load, negative on
    violation) and ``demand_gap`` (demand minus row load).
    """
    _check_shape(alloc, inst)
    if len(demands) != inst.m:
        raise DimensionError(f"{len(demands)} demands for m={inst.m}")
    violations = []
    for (i, j), l in _enumerate_loads(alloc):
        if l < 0:
            violations.append(Violation("negative", (i, j), f"load[{i}][{j}] = {l}"))
    rows = alloc.row_sums()
    gaps = tuple(int(d) - r for d, r in zip(demands, rows))
    for i, gap in enumerate(gaps):
        if gap > 0:
            violations.append(Violation("demand", (i,), f"producer {i} short by {gap}"))
        elif gap < 0:
            violations.append(Violation("demand", (i,), f"producer {i} over-served by {-gap}"))
    slack = tuple(c - s for c, s in zip(inst.capacities, alloc.col_sums()))
    for j, sl in enumerate(slack):
        if sl < 0:
            violations.append(Violation("capacity", (j,), f"consumer {j} over capacity by {-sl}"))
    return Report(tuple(violations), {"consumer_slack": slack, "demand_gap": gaps})


def _enumerate_loads(alloc: Allocation):
    for i, row in enumerate(alloc.loads):
        for j, l in enumerate(row):
            yield (i, j), l


def remaining_capacity(state: OnlineState, inst: Instance) -> list:
    return [c - l for c, l in zip(inst.capacities, state.consumer_loads)]
