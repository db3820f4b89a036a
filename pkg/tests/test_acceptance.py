"""Acceptance criteria.  Each test logs one PASS/FAIL line via ``acceptance_log``
and then asserts the same condition."""

import math
import random
import statistics
import time
from collections import Counter
from dataclasses import replace
from fractions import Fraction

import pytest
from scipy.stats import chisquare

from capalloc.analysis import competitive_ratios, monte_carlo
from capalloc.model import Instance, RequestStream, check_feasibility
from capalloc.offline import (
    brute_force_optimal,
    check_dual_certificate,
    solve_lp_optimal,
    solve_primal_dual,
)
from capalloc.online import simulate
from capalloc.workload import GeneratorConfig, GeneratorError, generate, sweep, sweep_csv
from oracles import expected_cost_random_producer_blocks, expected_cost_whole_requests


def tiny_corpus(count=300, seed=2024):
    """Instances with m, n <= 3, c_j <= 4 and a stream whose total demand fits."""
    rng = random.Random(seed)
    corpus = []
    for _ in range(count):
        m, n = rng.randint(1, 3), rng.randint(1, 3)
        caps = [rng.randint(0, 4) for _ in range(n)]
        dists = [[rng.randint(0, 9) for _ in range(n)] for _ in range(m)]
        inst = Instance.build(caps, dists)
        budget = rng.randint(0, inst.total_capacity)
        sizes = []
        while budget:
            sizes.append(rng.randint(1, budget))
            budget -= sizes[-1]
        stream = RequestStream.from_sizes(sizes, [rng.randrange(m) for _ in sizes])
        corpus.append((inst, stream))
    return corpus


@pytest.fixture(scope="module")
def corpus():
    return tiny_corpus()


def test_oracle_equivalence(corpus, acceptance_log):
    start = time.perf_counter()
    mismatches = 0
    for inst, stream in corpus:
        demands = stream.demands(inst.m)
        if solve_lp_optimal(inst, demands)[1] != brute_force_optimal(inst, demands):
            mismatches += 1
    elapsed = time.perf_counter() - start
    ok = len(corpus) >= 200 and mismatches == 0 and elapsed < 60
    acceptance_log("1 oracle equivalence", ok,
                   f"{len(corpus)} instances, {mismatches} mismatches, {elapsed:.2f}s")
    assert ok


def test_primal_dual_soundness(corpus, acceptance_log):
    infeasible = dual_bad = below_opt = 0
    gaps = []
    for inst, stream in corpus:
        demands = stream.demands(inst.m)
        opt = solve_lp_optimal(inst, demands)[1]
        alloc, duals, trace = solve_primal_dual(inst, stream)
        if not check_feasibility(alloc, inst, demands):
            infeasible += 1
        kinds = check_dual_certificate(alloc, duals, inst, tol=0, demands=demands).kinds()
        if {"sign", "dual_feasibility", "weak_duality"} & set(kinds):
            dual_bad += 1
        if trace.final_cost < opt:
            below_opt += 1
        gaps.append(trace.final_cost - opt)
    zero = sum(1 for g in gaps if g == 0) / len(gaps)
    positive = sorted(g for g in gaps if g > 0)
    dist = (f"zero-gap fraction {zero:.3f}; positive gaps n={len(positive)}"
            + (f" median {float(statistics.median(positive)):.2f} max {float(positive[-1]):.2f}" if positive else ""))
    ok = infeasible == dual_bad == below_opt == 0
    acceptance_log("2 primal-dual soundness", ok,
                   f"infeasible {infeasible}, dual-infeasible {dual_bad}, below LP {below_opt}; {dist}")
    assert ok


def test_uniform_equal_capacity_expected_cost(acceptance_log):
    inst = Instance.build([4, 4], [[1, 2], [3, 4]])
    exact, dead = expected_cost_whole_requests(inst.capacities, inst.distances, 4, 1)
    start = time.perf_counter()
    s = monte_carlo("uniform", inst, RequestStream.from_sizes([1] * 4), 10**5, 0)
    elapsed = time.perf_counter() - start
    z = (s.empirical_mean_cost - 10) / s.std_error
    ok = exact == 10 and dead == 0 and s.predicted_cost == 10 and abs(z) <= 3 and elapsed < 30
    acceptance_log("3 uniform expected cost", ok,
                   f"mean {s.empirical_mean_cost:.4f} SE {s.std_error:.4f} z={z:+.2f}, "
                   f"enumeration {exact}, {elapsed:.1f}s")
    assert ok


def _capprop_run(units, trials, seed=0):
    inst = Instance.build([10, 30], [[1, 3]])
    stream = RequestStream.from_sizes([1] * units, [0] * units)
    costs, shares = [], []
    for k in range(trials):
        trace = simulate("cap-prop", inst, stream, seed + k)
        assert not trace.aborted
        costs.append(float(trace.final_cost))
        shares.append(trace.consumer_loads(2)[0] / units)
    return inst, costs, shares


def _mean_se(xs):
    return statistics.fmean(xs), statistics.stdev(xs) / math.sqrt(len(xs))


def test_capacity_proportional_low_fill(acceptance_log):
    inst, costs, shares = _capprop_run(8, 20_000)
    target = 8 * Fraction(5, 2)
    mean, se = _mean_se(costs)
    share, share_se = _mean_se(shares)
    exact = expected_cost_random_producer_blocks(inst.capacities, inst.distances, 8, True)
    # share of consumer 1 is 1 - share of consumer 0, so its SE is the same
    ok = (abs(mean - target) <= 3 * se and abs(share - 0.25) <= 3 * share_se
          and abs((1 - share) - 0.75) <= 3 * share_se)

    # high fill: reported only
    hi_inst, hi_costs, hi_shares = _capprop_run(36, 5_000)
    hi_mean, hi_se = _mean_se(hi_costs)
    hi_exact = expected_cost_random_producer_blocks(hi_inst.capacities, hi_inst.distances, 36, True)
    acceptance_log(
        "4 capacity-proportional at 20% fill", ok,
        f"mean {mean:.3f} vs {float(target)} (SE {se:.3f}, exact {float(exact):.3f}); "
        f"shares [{share:.4f}, {1 - share:.4f}] SE {share_se:.4f}; "
        f"at 90% fill mean {hi_mean:.3f} vs formula 90 (deviation {hi_mean - 90:+.3f}, "
        f"{(hi_mean - 90) / hi_se:+.1f} SE, exact {float(hi_exact):.3f}) [no bound]",
    )
    assert ok


def test_exchangeability_chi_square(acceptance_log):
    inst = Instance.build([3, 3, 3], [[1, 5, 9], [2, 4, 8]])
    rounds, trials = 6, 10_000
    stream = RequestStream.from_sizes([1] * rounds)
    counts = [Counter() for _ in range(rounds)]
    for k in range(trials):
        trace = simulate("uniform", inst, stream, k)
        for step in trace.steps:
            counts[step.round - 1][step.consumer] += 1
    alpha = 0.01 / rounds  # Bonferroni over rounds, family-wise 99%
    pvalues = [float(chisquare([c[j] for j in range(inst.n)]).pvalue) for c in counts]
    ok = min(pvalues) > alpha
    acceptance_log("5 exchangeability", ok,
                   f"{trials} trials, per-round p-values {[round(p, 3) for p in pvalues]}, "
                   f"threshold {alpha:.4f}")
    assert ok


def test_bound_adherence(acceptance_log):
    rng = random.Random(7)
    policies = ("uniform-split", "cap-prop", "greedy")
    checked = violations = 0
    worst_seen = 0.0
    while checked < 1000:
        cfg = GeneratorConfig(
            m_range=(1, 6), n_range=(1, 6), capacity_range=(1, 8), size_range=(1, 4),
            distance_range=(1, 50), fill_target=rng.choice([0.3, 0.6, 1.0]),
            seed=rng.getrandbits(64), random_producers=rng.random() < 0.3,
        )
        try:
            inst, stream = generate(cfg)
        except GeneratorError:
            continue
        trace = simulate(policies[checked % 3], inst, stream, rng.getrandbits(64))
        checked += 1
        if trace.aborted:
            violations += 1
            continue
        opt = solve_lp_optimal(inst, trace.realized_demands(inst.m))[1]
        upper = stream.total_size * inst.max_distance
        bound = competitive_ratios(inst).worst_ratio
        if not opt <= trace.final_cost <= upper:
            violations += 1
        elif opt > 0:
            ratio = trace.final_cost / opt
            worst_seen = max(worst_seen, float(ratio / bound))
            if ratio > bound:
                violations += 1
    ok = violations == 0
    acceptance_log("6 bound adherence", ok,
                   f"{checked} fuzzed traces, {violations} violations, "
                   f"largest ratio/worst_ratio {worst_seen:.3f}")
    assert ok


def test_sweep(acceptance_log):
    config = GeneratorConfig()
    start = time.perf_counter()
    rows = sweep(config, trials=100, instances=50, base_seed=11)
    elapsed = time.perf_counter() - start
    text = sweep_csv(rows)
    rerun = sweep_csv(sweep(config, trials=100, instances=3, base_seed=11))
    deterministic = text.startswith(rerun)

    ok_rows = [r for r in rows if r.status == "ok"]
    bad_order = [r.instance_id for r in ok_rows if r.mean_cost < r.opt_cost]
    single = [r for r in ok_rows if r.m == 1 and r.policy == "greedy"]
    extra = sweep(replace(config, m_range=(1, 1)), policies=["greedy"], trials=2, instances=20)
    single += [r for r in extra if r.status == "ok"]
    greedy_off = [r.instance_id for r in single if r.mean_cost != r.opt_cost]

    ok = (len(ok_rows) == len(rows) and len({r.instance_id for r in rows}) >= 50
          and not bad_order and not greedy_off and single and deterministic and elapsed < 600)
    acceptance_log("7 sweep", ok,
                   f"{len(rows)} rows ({len(ok_rows)} ok) in {elapsed:.1f}s, deterministic={deterministic}, "
                   f"OPT violations {bad_order}, single-producer greedy rows {len(single)} "
                   f"(mismatches {greedy_off})")
    assert ok


def test_primal_dual_iteration_trend(acceptance_log):
    rng = random.Random(5)
    m, n = 6, 8
    instances = [
        Instance.build([rng.randint(15, 25) for _ in range(n)],
                       [[rng.randint(1, 100) for _ in range(n)] for _ in range(m)])
        for _ in range(20)
    ]
    iterations, operations = [], []
    for r in (10, 20, 40, 80):
        it = ops = 0
        for inst in instances:
            stream = RequestStream.from_sizes([1] * r, [rng.randrange(m) for _ in range(r)])
            trace = solve_primal_dual(inst, stream)[2]
            it += trace.iterations
            ops += trace.operations
        iterations.append(it)
        operations.append(ops)
    it_ratios = [b / a for a, b in zip(iterations, iterations[1:])]
    op_ratios = [b / a for a, b in zip(operations, operations[1:])]
    ok = max(it_ratios) <= 2.5 and max(op_ratios) <= 2.5
    acceptance_log("8 primal-dual iteration trend", ok,
                   f"iterations {iterations} ratios {[round(x, 2) for x in it_ratios]}; "
                   f"slack evaluations {operations} ratios {[round(x, 2) for x in op_ratios]}")
    assert ok
