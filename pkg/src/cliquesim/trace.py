"""Execution trace serialization and replay.

A trace is line-delimited JSON: one header record, one record per round
(crash decisions, sends, state transitions), and one end record with final
states and metrics. Records are serialized with sorted keys and fixed
separators, so identical executions produce byte-identical traces and a
replayed run can be compared line by line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .adversary import CrashEvent, CrashPlan, scripted
from .engine import ExecutionResult, SimConfig, run_simulation

__all__ = [
    "TRACE_VERSION",
    "TraceError",
    "ParsedTrace",
    "ReplayOutcome",
    "trace_lines",
    "write_trace",
    "read_trace",
    "replay_trace",
]

TRACE_VERSION = 1


class TraceError(ValueError):
    pass


def _dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def trace_lines(result: ExecutionResult, adversary_desc: str) -> list[str]:
    if result.trace_rounds is None:
        raise TraceError("execution was run without trace recording")
    config = result.config
    header = {
        "record": "header",
        "version": TRACE_VERSION,
        "n": config.n,
        "degrees": list(config.degrees),
        "model": config.model,
        "capacity_c": config.capacity_c,
        "strict": config.strict,
        "seed": config.seed,
        "adversary": adversary_desc,
    }
    nodes = []
    for o in result.nodes:
        verdict = None
        if o.verdict is not None:
            if o.verdict.graph is None:
                verdict = {"realizable": False}
            else:
                verdict = {
                    "realizable": True,
                    "edges": [list(e) for e in o.verdict.graph.sorted_edges()],
                }
        nodes.append(
            {
                "node": o.index,
                "state": o.state,
                "crashed_round": o.crashed_round,
                "exit_round": o.exit_round,
                "view": {str(k): v for k, v in sorted(o.view.items())},
                "verdict": verdict,
            }
        )
    end = {
        "record": "end",
        "rounds": result.metrics.rounds_to_termination,
        "messages": result.metrics.messages_sent,
        "allokay_broadcasters": result.metrics.allokay_broadcasters,
        "dropped_messages": result.metrics.dropped_messages,
        "nodes": nodes,
    }
    lines = [_dumps(header)]
    lines.extend(_dumps(r) for r in result.trace_rounds)
    lines.append(_dumps(end))
    return lines


def write_trace(path: str | Path, result: ExecutionResult, adversary_desc: str) -> None:
    Path(path).write_text("\n".join(trace_lines(result, adversary_desc)) + "\n")


@dataclass
class ParsedTrace:
    header: dict
    rounds: list[dict]
    end: dict
    lines: list[str]

    def config(self) -> SimConfig:
        h = self.header
        return SimConfig(
            n=h["n"],
            degrees=tuple(h["degrees"]),
            model=h["model"],
            capacity_c=h["capacity_c"],
            strict=h["strict"],
            seed=h["seed"],
        )

    def crash_plan(self) -> CrashPlan:
        events = []
        for record in self.rounds:
            for crash in record["crashes"]:
                events.append(
                    CrashEvent(
                        record["round"], crash["node"], tuple(crash["delivered"])
                    )
                )
        return CrashPlan(tuple(events))


def read_trace(path: str | Path) -> ParsedTrace:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise TraceError("empty trace file")
    records = []
    for lineno, line in enumerate(lines, start=1):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise TraceError(f"line {lineno}: not valid JSON ({exc})") from exc
    header, *body = records
    if header.get("record") != "header":
        raise TraceError("first record is not a header")
    if header.get("version") != TRACE_VERSION:
        raise TraceError(
            f"trace version {header.get('version')} unsupported "
            f"(expected {TRACE_VERSION})"
        )
    if not body or body[-1].get("record") != "end":
        raise TraceError("trace has no end record")
    rounds = body[:-1]
    if any(r.get("record") != "round" for r in rounds):
        raise TraceError("malformed round records")
    return ParsedTrace(header=header, rounds=rounds, end=body[-1], lines=lines)


@dataclass
class ReplayOutcome:
    identical: bool
    divergence: str | None
    result: ExecutionResult


def replay_trace(parsed: ParsedTrace, expect_model: str | None = None) -> ReplayOutcome:
    """Re-execute the trace's crash schedule and compare byte-for-byte.

    The header's adversary description is reused verbatim: replay fidelity
    is about the execution (rounds, states, metrics), not about which
    strategy originally produced the schedule.
    """
    if expect_model is not None and parsed.header["model"] != expect_model:
        raise TraceError(
            f"trace was recorded under model {parsed.header['model']!r}, "
            f"replay requested {expect_model!r}"
        )
    config = parsed.config()
    result = run_simulation(config, scripted(parsed.crash_plan()), record_trace=True)
    new_lines = trace_lines(result, parsed.header["adversary"])
    old_lines = parsed.lines
    divergence = None
    if len(new_lines) != len(old_lines):
        divergence = (
            f"trace length differs: {len(old_lines)} recorded vs "
            f"{len(new_lines)} replayed"
        )
    else:
        for old, new in zip(old_lines, new_lines):
            if old != new:
                label = _record_label(old)
                divergence = f"first divergence at {label}"
                break
    return ReplayOutcome(
        identical=divergence is None, divergence=divergence, result=result
    )


def _record_label(line: str) -> str:
    try:
        record = json.loads(line)
    except json.JSONDecodeError:
        return "an unparseable record"
    kind = record.get("record", "?")
    if kind == "round":
        return f"round {record.get('round')}"
    return f"the {kind} record"
