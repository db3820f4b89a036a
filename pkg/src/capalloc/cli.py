"""Command line interface.

Exit codes: 0 success, 1 invalid input, 2 infeasible workload, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import __version__, formats
from .analysis import (
    AbortRateError,
    InvariantError,
    competitive_ratios,
    monte_carlo,
    predict_cost,
)
from .model import InfeasibleError, RequestStream, check_feasibility, validate_stream
from .offline import (
    InstanceTooLargeError,
    NonTerminationError,
    brute_force_optimal,
    check_dual_certificate,
    solve_lp_optimal,
    solve_lp_rolling,
    solve_primal_dual,
)
from .online import Policy, replay, simulate
from .workload import SWEEP_COLUMNS, GeneratorConfig, GeneratorError, generate, sweep, sweep_csv

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INVARIANT = 0, 1, 2, 3

ALGOS = ("uniform", "uniform-split", "cap-prop", "greedy")


def _common(parser):
    parser.add_argument("--seed", type=int, default=0, help="base seed (64-bit)")
    parser.add_argument("--out", help="write output here instead of stdout")
    parser.add_argument("--format", choices=("csv", "json"), default=None)


def _generator_args(parser):
    parser.add_argument("--producers", nargs=2, type=int, default=(1, 100), metavar=("LO", "HI"))
    parser.add_argument("--consumers", nargs=2, type=int, default=(1, 100), metavar=("LO", "HI"))
    parser.add_argument("--capacity", nargs=2, type=int, default=(1, 20), metavar=("LO", "HI"))
    parser.add_argument("--size", nargs=2, type=int, default=(1, 10), metavar=("LO", "HI"))
    parser.add_argument("--distance", nargs=2, type=int, default=(1, 100), metavar=("LO", "HI"))
    parser.add_argument("--fill", type=float, default=0.5, help="target fraction of total capacity")
    parser.add_argument("--equal-capacities", action="store_true")
    parser.add_argument("--random-producers", action="store_true",
                        help="leave producers for the engine to draw")


def _workload_args(parser):
    parser.add_argument("--instance", required=True)
    parser.add_argument("--stream", help="stream file")
    parser.add_argument("--rounds", type=int, help="with --size: r random-producer requests")
    parser.add_argument("--size", type=int, help="request size for --rounds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capalloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"capalloc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance and a request stream")
    _common(p)
    _generator_args(p)
    p.add_argument("--instance-out")
    p.add_argument("--stream-out")

    p = sub.add_parser("solve", help="offline optimum, primal-dual or brute force")
    _common(p)
    p.add_argument("--instance", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--method", choices=("lp", "pd", "brute"), default="lp")
    p.add_argument("--rolling", action="store_true", help="lp: keep earlier loads fixed per request")
    p.add_argument("--limit", type=int, default=10**7, help="brute: max search space")
    p.add_argument("--trace-csv", help="pd: write the iteration trace as CSV")

    p = sub.add_parser("run", help="simulate an online policy")
    _common(p)
    _workload_args(p)
    p.add_argument("--algo", choices=ALGOS, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--verify", action="store_true", help="replay and check every trial")
    p.add_argument("--summary", help="write the JSON summary here (default: stderr)")

    p = sub.add_parser("predict", help="closed-form expected costs and ratios")
    _common(p)
    p.add_argument("--instance", required=True)
    p.add_argument("--stream")
    p.add_argument("--algo", choices=ALGOS)

    p = sub.add_parser("experiment", help="Monte Carlo batch against the offline optimum")
    _common(p)
    _workload_args(p)
    p.add_argument("--algo", choices=ALGOS, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--prefix", action="store_true", help="also report the max ratio over prefixes")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--trials-csv", help="write per-trial CSV here")

    p = sub.add_parser("sweep", help="randomized multi-instance comparison")
    _common(p)
    _generator_args(p)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--policies", nargs="+", choices=ALGOS, default=["uniform-split", "cap-prop", "greedy"])
    p.add_argument("--verify", action="store_true")
    return parser


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args) -> GeneratorConfig:
    return GeneratorConfig(
        m_range=tuple(args.producers), n_range=tuple(args.consumers),
        capacity_range=tuple(args.capacity), size_range=tuple(args.size),
        distance_range=tuple(args.distance), fill_target=args.fill, seed=args.seed,
        equal_capacities=args.equal_capacities, random_producers=args.random_producers,
    )


def _load_workload(args):
    inst = formats.read_instance(args.instance)
    if args.stream:
        stream = formats.read_stream(args.stream)
    elif args.rounds is not None and args.size is not None:
        stream = RequestStream.from_sizes([args.size] * args.rounds)
    else:
        raise ValueError("give --stream or both --rounds and --size")
    report = validate_stream(stream, inst)
    structural = [v.message for v in report.violations if v.kind != "capacity"]
    if structural:
        raise ValueError("; ".join(structural))
    return inst, stream


def _csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_gen(args) -> int:
    inst, stream = generate(_config(args))
    if args.instance_out:
        formats.write_instance(inst, args.instance_out)
    if args.stream_out:
        formats.write_stream(stream, args.stream_out)
    if not (args.instance_out and args.stream_out) or args.out:
        _emit(args, formats.dumps({
            "instance": formats.instance_to_dict(inst),
            "stream": formats.stream_to_dict(stream),
        }))
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = formats.read_instance(args.instance)
    stream = formats.read_stream(args.stream)
    demands = stream.demands(inst.m)
    if args.method == "brute":
        out = {"cost": brute_force_optimal(inst, demands, limit=args.limit)}
    elif args.method == "lp":
        if args.rolling:
            alloc, cost = solve_lp_rolling(inst, stream)
        else:
            alloc, cost = solve_lp_optimal(inst, demands)
        _assert_feasible(alloc, inst, demands)
        out = {"cost": cost, "loads": alloc.to_lists()}
    else:
        alloc, duals, trace = solve_primal_dual(inst, stream)
        _assert_feasible(alloc, inst, demands)
        cert = check_dual_certificate(alloc, duals, inst, demands=demands)
        if "dual_feasibility" in cert.kinds() or "weak_duality" in cert.kinds():
            raise InvariantError("; ".join(v.message for v in cert.violations))
        out = {"cost": trace.final_cost, "loads": alloc.to_lists(), "duals": duals.to_dict()}
        if args.trace_csv:
            rows = [
                [s.iteration, s.producer, s.consumer, s.delta2,
                 formats.encode_number(inst.distances[s.producer][s.consumer]),
                 formats.encode_number(s.delta1), s.delta2]
                for s in trace.pd_steps
            ]
            with open(args.trace_csv, "w") as fh:
                fh.write(_csv(rows, ["step", "producer", "consumer", "amount", "distance", "delta1", "delta2"]))
    _emit(args, formats.dumps(out))
    return EXIT_OK


def _assert_feasible(alloc, inst, demands):
    report = check_feasibility(alloc, inst, demands)
    if not report:
        raise InvariantError("; ".join(v.message for v in report.violations))


def _summary_json(summary) -> dict:
    return json.loads(formats.dumps(summary.to_dict()))


def cmd_run(args) -> int:
    inst, stream = _load_workload(args)
    if args.trials < 1:
        raise ValueError("--trials must be >= 1")
    header = ["trial", "seed", "cost", "placed_units", "aborted"]
    if args.trials == 1:
        trace = simulate(args.algo, inst, stream, args.seed)
        if args.verify:
            report = replay(trace, inst)
            if not report:
                raise InvariantError("; ".join(v.message for v in report.violations))
        rows = [[0, args.seed, formats.encode_number(trace.final_cost), trace.placed_units, int(trace.aborted)]]
        summary = {
            "policy": Policy.parse(args.algo).value, "trials": 1, "cost": trace.final_cost,
            "placed_units": trace.placed_units, "aborted": trace.aborted,
            "diagnostic": trace.diagnostic,
        }
        code = EXIT_INFEASIBLE if trace.aborted else EXIT_OK
    else:
        result = monte_carlo(args.algo, inst, stream, args.trials, args.seed, verify=args.verify)
        rows = result.csv_rows()
        summary = _summary_json(result)
        code = EXIT_OK
    if args.format == "json":
        _emit(args, formats.dumps({"summary": summary, "trials": [dict(zip(header, r)) for r in rows]}))
    else:
        _emit(args, _csv(rows, header))
        text = formats.dumps(summary)
        if args.summary:
            with open(args.summary, "w") as fh:
                fh.write(text)
        else:
            sys.stderr.write(text)
    return code


def cmd_predict(args) -> int:
    inst = formats.read_instance(args.instance)
    out = {k: v for k, v in competitive_ratios(inst).to_dict().items()}
    if args.stream:
        stream = formats.read_stream(args.stream)
        algos = [args.algo] if args.algo else ["uniform-split", "cap-prop"]
        out["predicted_cost"] = {Policy.parse(a).value: predict_cost(a, inst, stream) for a in algos}
    _emit(args, formats.dumps(out))
    return EXIT_OK


def cmd_experiment(args) -> int:
    inst, stream = _load_workload(args)
    summary = monte_carlo(
        args.algo, inst, stream, args.trials, args.seed,
        prefix_ratios=args.prefix, verify=args.verify,
    )
    rows = summary.csv_rows()
    header = ["trial", "seed", "cost", "placed_units", "aborted"]
    if args.trials_csv:
        with open(args.trials_csv, "w") as fh:
            fh.write(_csv(rows, header))
    if args.format == "csv":
        _emit(args, _csv(rows, header))
    else:
        _emit(args, formats.dumps(summary.to_dict()))
    return EXIT_OK


def cmd_sweep(args) -> int:
    rows = sweep(_config(args), args.policies, args.trials, args.seed, args.instances, verify=args.verify)
    if args.format == "json":
        data = [{c: getattr(r, c) for c in SWEEP_COLUMNS} for r in rows]
        _emit(args, formats.dumps(data))
    else:
        _emit(args, sweep_csv(rows))
    if any(r.status.startswith("error: InvariantError") for r in rows):
        return EXIT_INVARIANT
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen, "solve": cmd_solve, "run": cmd_run, "predict": cmd_predict,
    "experiment": cmd_experiment, "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InvariantError, NonTerminationError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InfeasibleError, AbortRateError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, InstanceTooLargeError, GeneratorError, OSError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
