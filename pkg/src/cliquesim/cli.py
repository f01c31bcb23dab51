"""Command-line front end: one-shot realization, single simulations with
trace capture, parameter sweeps with CSV reports, exhaustive small-instance
verification, and trace replay.

Exit codes: 0 success (realizable / identical / verified), 1 for a negative
result (unrealizable, divergence, violations found), 2 for bad input or
configuration.
"""

from __future__ import annotations

import argparse
import csv
import random
import sys
from pathlib import Path

import numpy as np

from .adversary import (
    none_adversary,
    parse_plan_file,
    random_adversary,
    scripted,
    worst_case_heuristic,
)
from .degseq import DegreeSequence, erdos_gallai, havel_hakimi
from .engine import ConfigError, SimConfig, run_simulation
from .harness import check_execution, verify_exhaustive
from .trace import TraceError, read_trace, replay_trace, write_trace

REPORT_COLUMNS = [
    "n",
    "f",
    "model",
    "adversary",
    "seed",
    "rounds",
    "messages",
    "agreement_ok",
    "validity_ok",
    "verdict",
]


def random_graphic_degrees(n: int, rng: random.Random) -> tuple[int, ...]:
    """Sample degrees uniformly from [0, n-1] until the sequence is graphic."""
    while True:
        degrees = tuple(rng.randrange(n) for _ in range(n))
        if erdos_gallai(degrees):
            return degrees


def _parse_degree_list(text: str) -> tuple[int, ...]:
    parts = text.replace(",", " ").split()
    return tuple(int(p) for p in parts)


def _resolve_degrees(args, n: int) -> tuple[int, ...]:
    if args.degrees is not None:
        degrees = _parse_degree_list(args.degrees)
    elif args.degree_file is not None:
        degrees = _parse_degree_list(Path(args.degree_file).read_text())
    elif args.degree_uniform is not None:
        degrees = (args.degree_uniform,) * n
    else:
        degrees = random_graphic_degrees(n, random.Random(f"{args.seed}-degrees"))
    if len(degrees) != n:
        raise ConfigError(f"{len(degrees)} degrees given for n={n}")
    return degrees


def _build_adversary(name: str, f: int, seed: int, args) -> object:
    if name == "none":
        return none_adversary()
    if name == "random":
        return random_adversary(seed, f, args.crash_prob)
    if name == "worst":
        return worst_case_heuristic(f)
    if name == "scripted":
        if args.plan_file is None:
            raise ConfigError("--adversary scripted requires --plan-file")
        return scripted(parse_plan_file(Path(args.plan_file).read_text()))
    raise ConfigError(f"unknown adversary {name!r}")


def _adversary_desc(name: str, f: int, seed: int, args) -> str:
    if name == "random":
        return f"random:f={f}:seed={seed}:p={args.crash_prob}"
    if name == "worst":
        return f"worst:f={f}"
    if name == "scripted":
        return f"scripted:{args.plan_file}"
    return "none"


# -- commands ---------------------------------------------------------------


def cmd_realize(args) -> int:
    try:
        degrees = _parse_degree_list(" ".join(args.degree))
        if not degrees:
            raise ValueError("no degrees given")
        if any(d < 0 for d in degrees):
            raise ValueError("degrees must be non-negative")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outcome = havel_hakimi(DegreeSequence.from_degrees(degrees))
    if outcome.graph is None:
        print("unrealizable")
        return 1
    for u, v in outcome.graph.sorted_edges():
        print(f"{u} {v}")
    return 0


def cmd_simulate(args) -> int:
    degrees = _resolve_degrees(args, args.n)
    config = SimConfig(
        n=args.n,
        degrees=degrees,
        model=args.model,
        capacity_c=args.capacity_c,
        strict=args.strict,
        seed=args.seed,
    )
    adversary = _build_adversary(args.adversary, args.f, args.seed, args)
    result = run_simulation(config, adversary, record_trace=args.trace is not None)
    if args.trace is not None:
        write_trace(
            args.trace, result, _adversary_desc(args.adversary, args.f, args.seed, args)
        )
    issues = check_execution(result)
    lines = _summary_lines(result, issues)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _summary_lines(result, issues) -> list[str]:
    m = result.metrics
    lines = [
        f"model={result.config.model} n={result.config.n} "
        f"degrees={','.join(str(d) for d in result.config.degrees)}",
        f"rounds={m.rounds_to_termination} messages={m.messages_sent} "
        f"crashes={len(result.crashes)} allokay_broadcasters={m.allokay_broadcasters}",
    ]
    if result.config.model == "ncc":
        lines.append(
            f"max_send_per_round={m.max_send_per_round} "
            f"max_recv_per_round={m.max_recv_per_round} "
            f"dropped_messages={m.dropped_messages}"
        )
    for rnd, node, delivered in result.crashes:
        shown = ",".join(str(j) for j in delivered) or "-"
        lines.append(f"crash round={rnd} node={node} delivered={shown}")
    for o in result.nodes:
        if o.crashed_round is not None:
            lines.append(f"node {o.index}: crashed (round {o.crashed_round})")
            continue
        view = " ".join(f"{i}:{d}" for i, d in sorted(o.view.items()))
        verdict = o.verdict
        if verdict is None:
            shown = "none"
        elif verdict.graph is None:
            shown = "unrealizable"
        else:
            shown = "edges " + " ".join(
                f"{u}-{v}" for u, v in verdict.graph.sorted_edges()
            )
        lines.append(f"node {o.index}: exit round={o.exit_round} D'=[{view}] {shown}")
    lines.append("checks=ok" if not issues else "checks=FAILED")
    lines.extend(f"  issue: {msg}" for msg in issues)
    return lines


def cmd_sweep(args) -> int:
    f_values = [int(x) for x in args.f_list.split(",")]
    adversaries = args.adversary.split(",")
    rows = []
    for f in f_values:
        for name in adversaries:
            seeds = range(args.seeds) if name == "random" else [args.seed]
            for seed in seeds:
                rows.append(_sweep_row(args, f, name, seed))
    out_stream = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out_stream, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out_stream.close()
    _print_sweep_summary(rows)
    return 0


def _sweep_row(args, f: int, name: str, seed: int) -> dict:
    degrees = random_graphic_degrees(args.n, random.Random(f"{seed}-degrees"))
    config = SimConfig(
        n=args.n,
        degrees=degrees,
        model=args.model,
        capacity_c=args.capacity_c,
        strict=args.strict,
        seed=seed,
    )
    adversary = _build_adversary(name, f, seed, args)
    result = run_simulation(config, adversary)
    issues = check_execution(result)
    agreement_ok = not any(i.startswith("agreement:") for i in issues)
    validity_ok = not any(i.startswith("validity:") for i in issues)
    exited = result.exited()
    if not agreement_ok:
        verdict = "disagree"
    elif exited and exited[0].verdict and exited[0].verdict.graph is not None:
        verdict = "realizable"
    else:
        verdict = "unrealizable"
    return {
        "n": args.n,
        "f": f,
        "model": args.model,
        "adversary": name,
        "seed": seed,
        "rounds": result.metrics.rounds_to_termination,
        "messages": result.metrics.messages_sent,
        "agreement_ok": agreement_ok,
        "validity_ok": validity_ok,
        "verdict": verdict,
    }


def _print_sweep_summary(rows: list[dict]) -> None:
    by_f: dict[int, int] = {}
    for row in rows:
        by_f[row["f"]] = max(by_f.get(row["f"], 0), row["rounds"])
    print("# max rounds per f:", file=sys.stderr)
    for f in sorted(by_f):
        print(f"#   f={f}: {by_f[f]}", file=sys.stderr)
    if len(by_f) >= 2:
        fs = sorted(by_f)
        slope, intercept = np.polyfit(fs, [by_f[f] for f in fs], 1)
        print(
            f"# linear fit of max rounds vs f: slope={slope:.3f} "
            f"intercept={intercept:.3f}",
            file=sys.stderr,
        )


def cmd_verify(args) -> int:
    degrees = _resolve_degrees(args, args.n)
    config = SimConfig(n=args.n, degrees=degrees, model=args.model, seed=args.seed)
    try:
        report = verify_exhaustive(
            config, f=args.f, horizon=args.horizon, workers=args.workers
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    lines = [
        f"plans={report.plans_total} executions={report.executions_run} "
        f"violations={len(report.violations)} max_rounds={report.max_rounds}"
    ]
    if report.ok:
        lines.append("PASS")
    else:
        from .adversary import CrashPlan, format_plan

        events, issues = report.first_counterexample()
        lines.append("FAIL")
        lines.append("first counterexample (re-run with --adversary scripted):")
        lines.extend("  " + ln for ln in format_plan(CrashPlan(events)).splitlines())
        lines.extend(f"  issue: {msg}" for msg in issues)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0 if report.ok else 1


def cmd_replay(args) -> int:
    parsed = read_trace(args.trace)
    outcome = replay_trace(parsed, expect_model=args.model)
    if outcome.identical:
        print("identical")
        return 0
    print(f"divergence: {outcome.divergence}")
    return 1


# -- parser -------------------------------------------------------------------


def _add_common_sim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, required=True, help="clique size")
    p.add_argument("--degrees", help="comma- or space-separated degree list")
    p.add_argument("--degree-file", help="file containing the degree list")
    p.add_argument(
        "--degree-uniform", type=int, help="assign every node this degree"
    )
    p.add_argument(
        "--model", choices=("cc", "ncc"), default="cc", help="communication model"
    )
    p.add_argument("--seed", type=int, default=0, help="base random seed")
    p.add_argument(
        "--capacity-c",
        type=int,
        default=1,
        help="capacity multiplier c (limits are c*ceil(log2 n), ncc only)",
    )
    p.add_argument(
        "--strict",
        action="store_true",
        help="fail the run if any message is dropped (ncc)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cliquesim",
        description="Fault-tolerant degree-sequence realization simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("realize", help="realize a degree sequence directly")
    p.add_argument("degree", nargs="+", help="degree demands")
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("simulate", help="run one execution")
    _add_common_sim_args(p)
    p.add_argument(
        "--adversary",
        choices=("none", "random", "worst", "scripted"),
        default="none",
    )
    p.add_argument("--f", type=int, default=0, help="fault budget")
    p.add_argument("--crash-prob", type=float, default=0.05)
    p.add_argument("--plan-file", help="crash plan for --adversary scripted")
    p.add_argument("--trace", help="write the execution trace to this file")
    p.add_argument("--out", help="write the summary here instead of stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a (f, adversary, seed) grid")
    _add_common_sim_args(p)
    p.add_argument(
        "--f", dest="f_list", default="0", help="comma-separated fault budgets"
    )
    p.add_argument(
        "--adversary",
        default="random",
        help="comma-separated adversaries (none,random,worst)",
    )
    p.add_argument(
        "--seeds", type=int, default=1, help="seeds per point for random runs"
    )
    p.add_argument("--crash-prob", type=float, default=0.05)
    p.add_argument("--plan-file", help=argparse.SUPPRESS)
    p.add_argument("--out", help="CSV report path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="exhaustively enumerate crash schedules")
    _add_common_sim_args(p)
    p.add_argument("--f", type=int, required=True, help="max crashes to enumerate")
    p.add_argument("--horizon", type=int, default=14, help="last crash round")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="also write the report to this file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("replay", help="re-execute a trace and compare")
    p.add_argument("--trace", required=True, help="trace file to replay")
    p.add_argument(
        "--model", choices=("cc", "ncc"), help="require the trace to use this model"
    )
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
