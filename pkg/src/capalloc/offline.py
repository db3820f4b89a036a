"""Offline solvers: exact optimum, exhaustive oracle, and the primal-dual
assignment heuristic with its dual certificate checks."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .model import (
    Allocation,
    AllocationError,
    DimensionError,
    InfeasibleError,
    Instance,
    Report,
    RequestStream,
    RunTrace,
    TraceStep,
    Violation,
    ensure_valid,
    total_cost,
    validate_stream,
)


class InstanceTooLargeError(AllocationError):
    pass


class NonTerminationError(AllocationError):
    pass


def _check_demands(inst: Instance, demands: Sequence[int]) -> tuple:
    ensure_valid(inst)
    if len(demands) != inst.m:
        raise DimensionError(f"{len(demands)} demands for m={inst.m}")
    demands = tuple(int(d) for d in demands)
    if any(d < 0 for d in demands):
        raise ValueError("demands must be nonnegative")
    if sum(demands) > inst.total_capacity:
        raise InfeasibleError(
            f"total demand {sum(demands)} exceeds total capacity {inst.total_capacity}"
        )
    return demands


def _integer_costs(inst: Instance) -> tuple:
    costs, scale = inst.scaled_distances
    return [list(row) for row in costs], scale


# ---------------------------------------------------------------------------
# exact optimum


def _min_cost_transport(costs, supplies, capacities) -> list:
    """Successive shortest paths on the bipartite network
    source -> producer -> consumer -> sink, with integer costs.

    Returns the m x n flow matrix.  Caller guarantees feasibility.
    """
    m, n = len(supplies), len(capacities)
    flow = [[0] * n for _ in range(m)]
    supply_left = list(supplies)
    cap_left = list(capacities)
    # Node ids: producers 0..m-1, consumers m..m+n-1, sink m+n.  The source is
    # implicit: every producer with supply left starts at distance 0.
    sink = m + n
    potential = [0] * (m + n + 1)
    inf = float("inf")
    remaining = sum(supplies)

    while remaining > 0:
        dist = [inf] * (m + n + 1)
        parent = [-1] * (m + n + 1)
        heap = []
        for i in range(m):
            if supply_left[i] > 0:
                dist[i] = 0 - potential[i]
                heapq.heappush(heap, (dist[i], i))
        # dist holds reduced distances relative to potentials.
        done = [False] * (m + n + 1)
        while heap:
            du, u = heapq.heappop(heap)
            if done[u] or du > dist[u]:
                continue
            done[u] = True
            if u == sink:
                break
            pu = potential[u]
            if u < m:
                row = costs[u]
                for j in range(n):
                    v = m + j
                    nd = du + row[j] + pu - potential[v]
                    if nd < dist[v]:
                        dist[v] = nd
                        parent[v] = u
                        heapq.heappush(heap, (nd, v))
            else:
                j = u - m
                if cap_left[j] > 0:
                    nd = du + pu - potential[sink]
                    if nd < dist[sink]:
                        dist[sink] = nd
                        parent[sink] = u
                        heapq.heappush(heap, (nd, sink))
                for i in range(m):
                    if flow[i][j] > 0:
                        nd = du - costs[i][j] + pu - potential[i]
                        if nd < dist[i]:
                            dist[i] = nd
                            parent[i] = u
                            heapq.heappush(heap, (nd, i))
        if dist[sink] == inf:
            raise InfeasibleError("no augmenting path; demand exceeds reachable capacity")

        # Walk back from the sink to the originating producer.
        path = []
        v = sink
        while parent[v] != -1:
            path.append((parent[v], v))
            v = parent[v]
        origin = v
        push = supply_left[origin]
        for u, v in path:
            if v == sink:
                push = min(push, cap_left[u - m])
            elif u >= m:  # consumer -> producer: cancel flow
                push = min(push, flow[v][u - m])
        for u, v in path:
            if v == sink:
                cap_left[u - m] -= push
            elif u < m:
                flow[u][v - m] += push
            else:
                flow[v][u - m] -= push
        supply_left[origin] -= push
        remaining -= push

        # Capping at the sink distance keeps every residual reduced cost
        # nonnegative for nodes that were never finalized.
        cutoff = dist[sink]
        for v in range(m + n + 1):
            potential[v] += min(dist[v], cutoff) if done[v] else cutoff
    return flow


def solve_lp_optimal(
    inst: Instance,
    demands: Sequence[int],
    lower_bounds: Optional[Allocation] = None,
) -> tuple:
    """Minimum-cost allocation serving ``demands`` exactly.

    ``lower_bounds`` fixes loads already committed (assignment without
    reallocation); the residual problem is solved on top of them.

    Returns ``(Allocation, cost)`` with an exact rational cost.
    """
    demands = _check_demands(inst, demands)
    caps = list(inst.capacities)
    supplies = list(demands)
    fixed = None
    if lower_bounds is not None:
        if lower_bounds.shape != (inst.m, inst.n):
            raise DimensionError("lower bounds do not match the instance")
        fixed = lower_bounds
        for i, row in enumerate(fixed.loads):
            supplies[i] -= sum(row)
            if supplies[i] < 0:
                raise InfeasibleError(f"producer {i}: fixed loads exceed demand")
        for j, used in enumerate(fixed.col_sums()):
            caps[j] -= used
            if caps[j] < 0:
                raise InfeasibleError(f"consumer {j}: fixed loads exceed capacity")
        if sum(supplies) > sum(caps):
            raise InfeasibleError("residual demand exceeds residual capacity")
    costs, _ = _integer_costs(inst)
    alloc = Allocation(_min_cost_transport(costs, supplies, caps))
    if fixed is not None:
        alloc = alloc + fixed
    return alloc, total_cost(alloc, inst)


def prefix_opt_costs(inst: Instance, stream: RequestStream) -> list:
    """Full-horizon optimum on every prefix ``(0, t]`` of an explicit-producer
    stream (``OPT(t)`` for t = 1..r)."""
    demands = [0] * inst.m
    out = []
    for q in stream:
        if q.producer is None:
            raise ValueError("prefix optima need explicit producers")
        demands[q.producer] += q.size
        out.append(solve_lp_optimal(inst, demands)[1])
    return out


def solve_lp_rolling(inst: Instance, stream: RequestStream) -> tuple:
    """Re-solve after every request keeping earlier loads fixed."""
    alloc = Allocation.zeros(inst.m, inst.n)
    demands = [0] * inst.m
    for q in stream:
        if q.producer is None:
            raise ValueError("rolling solve needs explicit producers")
        demands[q.producer] += q.size
        alloc, _ = solve_lp_optimal(inst, demands, lower_bounds=alloc)
    return alloc, total_cost(alloc, inst)


# ---------------------------------------------------------------------------
# exhaustive oracle


def brute_force_optimal(inst: Instance, demands: Sequence[int], limit: int = 10**7) -> Fraction:
    """Enumerate every integer allocation and return the minimum cost.

    Independent of :func:`solve_lp_optimal`; meant for tiny instances only.
    """
    demands = _check_demands(inst, demands)
    space = 1
    for i in range(inst.m):
        for j in range(inst.n):
            space *= min(demands[i], inst.capacities[j]) + 1
    if space > limit:
        raise InstanceTooLargeError(f"search space {space} exceeds limit {limit}")

    best = [None]
    resid = list(inst.capacities)
    d = inst.distances

    def splits(amount, j):
        # All ways to place ``amount`` units on consumers j.. within resid.
        if j == inst.n:
            if amount == 0:
                yield ()
            return
        for x in range(min(amount, resid[j]) + 1):
            for rest in splits(amount - x, j + 1):
                yield (x,) + rest

    def visit(i, cost):
        if i == inst.m:
            if best[0] is None or cost < best[0]:
                best[0] = cost
            return
        for row in list(splits(demands[i], 0)):
            for j, x in enumerate(row):
                resid[j] -= x
            visit(i + 1, cost + sum(x * d[i][j] for j, x in enumerate(row)))
            for j, x in enumerate(row):
                resid[j] += x

    visit(0, Fraction(0))
    if best[0] is None:
        raise InfeasibleError("no feasible allocation")
    return best[0]


# ---------------------------------------------------------------------------
# primal-dual


@dataclass(frozen=True)
class DualSolution:
    y: tuple
    z: tuple

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(Fraction(v) for v in self.y))
        object.__setattr__(self, "z", tuple(Fraction(v) for v in self.z))

    @classmethod
    def zeros(cls, m: int, n: int) -> "DualSolution":
        return cls((0,) * m, (0,) * n)

    def to_dict(self) -> dict:
        return {"y": list(self.y), "z": list(self.z)}


@dataclass(frozen=True)
class PrimalDualStep:
    iteration: int
    producer: int
    consumer: int
    benefit: Fraction
    delta1: Fraction
    delta2: int
    # Duals after this step, as integers over ``scale``.
    scaled_y: tuple
    scaled_z: tuple
    scale: int

    @property
    def duals(self) -> DualSolution:
        return DualSolution(
            tuple(Fraction(v, self.scale) for v in self.scaled_y),
            tuple(Fraction(v, self.scale) for v in self.scaled_z),
        )


@dataclass
class PrimalDualTrace(RunTrace):
    """RunTrace plus per-iteration dual moves.  ``operations`` counts slack
    evaluations, the unit of work behind the running-time bound."""

    pd_steps: list = field(default_factory=list)
    operations: int = 0

    @property
    def iterations(self) -> int:
        return len(self.pd_steps)


def solve_primal_dual(inst: Instance, stream: RequestStream) -> tuple:
    """Primal-dual offline assignment.

    Each iteration: every producer with pending demand computes the smallest
    slack ``d_ij - (y_i - z_j)`` over consumers with residual capacity, and
    its benefit ``delta * (pending_i - sum of c_j over full consumers)``.  The
    producer with the largest benefit (lowest index on ties) raises ``y_i`` by
    its slack, every full or zero-capacity consumer raises ``z_j`` by the same
    amount, the chosen edge becomes tight and receives
    ``min(residual capacity, pending demand)`` units.

    Every iteration places at least one unit and either exhausts a producer or
    fills a consumer.  The loop runs until all demand is placed, whatever the
    sign of the benefit.

    Returns ``(Allocation, DualSolution, PrimalDualTrace)``.
    """
    ensure_valid(inst)
    report = validate_stream(stream, inst)
    if not report:
        first = report.violations[0]
        if first.kind == "capacity":
            raise InfeasibleError(first.message)
        raise ValueError(first.message)
    pending = list(stream.demands(inst.m))
    m, n = inst.m, inst.n
    d, scale = _integer_costs(inst)
    caps = inst.capacities
    resid = list(caps)
    y = [0] * m
    z = [0] * n
    loads = [[0] * n for _ in range(m)]
    trace = PrimalDualTrace(policy="primal-dual")
    cap = max(stream.r * n * m, stream.r + n)

    while any(pending):
        if trace.iterations >= cap:
            raise NonTerminationError(
                f"primal-dual exceeded {cap} iterations with pending demand {pending}"
            )
        avail = [j for j in range(n) if resid[j] > 0]
        if not avail:
            raise InfeasibleError(f"all consumers full with pending demand {pending}")
        full = [j for j in range(n) if resid[j] == 0]
        full_capacity = sum(caps[j] for j in full)

        best = None
        for i in range(m):
            if pending[i] == 0:
                continue
            row, yi = d[i], y[i]
            jstar = min(avail, key=lambda j: (row[j] - yi + z[j], j))
            delta = row[jstar] - yi + z[jstar]
            trace.operations += len(avail)
            benefit = delta * (pending[i] - full_capacity)
            if best is None or benefit > best[0]:
                best = (benefit, i, jstar, delta)
        benefit, i, j, delta1 = best

        if delta1:
            y[i] += delta1
            for k in full:
                z[k] += delta1
        delta2 = min(resid[j], pending[i])
        loads[i][j] += delta2
        resid[j] -= delta2
        pending[i] -= delta2

        it = trace.iterations + 1
        trace.steps.append(TraceStep(it, i, j, delta2, inst.distances[i][j]))
        trace.pd_steps.append(
            PrimalDualStep(
                it, i, j, Fraction(benefit, scale), Fraction(delta1, scale), delta2,
                tuple(y), tuple(z), scale,
            )
        )

    alloc = Allocation(loads)
    trace.final_cost = total_cost(alloc, inst)
    duals = DualSolution(tuple(Fraction(v, scale) for v in y), tuple(Fraction(v, scale) for v in z))
    return alloc, duals, trace


def dual_objective(duals: DualSolution, demands: Sequence[int], capacities: Sequence[int]) -> Fraction:
    if len(duals.y) != len(demands) or len(duals.z) != len(capacities):
        raise DimensionError("dual vector lengths do not match demands/capacities")
    return sum((yi * r for yi, r in zip(duals.y, demands)), Fraction(0)) - sum(
        (zj * c for zj, c in zip(duals.z, capacities)), Fraction(0)
    )


def check_dual_certificate(
    alloc: Allocation,
    duals: DualSolution,
    inst: Instance,
    tol: Fraction = Fraction(0),
    demands: Optional[Sequence[int]] = None,
) -> Report:
    """Dual feasibility, complementary slackness and weak duality.

    ``demands`` default to the allocation's row sums.
    """
    if alloc.shape != (inst.m, inst.n) or len(duals.y) != inst.m or len(duals.z) != inst.n:
        raise DimensionError("certificate dimensions do not match the instance")
    tol = Fraction(tol)
    demands = alloc.row_sums() if demands is None else tuple(demands)
    violations = []
    for i, yi in enumerate(duals.y):
        if yi < -tol:
            violations.append(Violation("sign", (i,), f"y[{i}] = {yi} < 0"))
    for j, zj in enumerate(duals.z):
        if zj < -tol:
            violations.append(Violation("sign", (j,), f"z[{j}] = {zj} < 0"))
    for i in range(inst.m):
        for j in range(inst.n):
            gap = duals.y[i] - duals.z[j] - inst.distances[i][j]
            if gap > tol:
                violations.append(
                    Violation("dual_feasibility", (i, j), f"y[{i}] - z[{j}] exceeds d by {gap}")
                )
            if alloc.loads[i][j] > 0 and abs(gap) > tol:
                violations.append(
                    Violation(
                        "slackness", (i, j),
                        f"load {alloc.loads[i][j]} on edge ({i},{j}) with slack {-gap}",
                    )
                )
    primal = total_cost(alloc, inst)
    dual = dual_objective(duals, demands, inst.capacities)
    if dual > primal + tol:
        violations.append(Violation("weak_duality", (), f"dual {dual} > primal {primal}"))
    return Report(tuple(violations), {"primal": primal, "dual": dual, "gap": primal - dual})
