"""Deterministic synchronous round engine with crash-fault injection.

Round structure: every live node computes its sends, the adversary then
picks which nodes crash this round and which subset of each crasher's
outgoing messages still gets delivered, all deliveries land, and finally
every live node processes its inbox. A node that crashes is silent in all
later rounds; a sender that does not crash delivers its full outbox.

The engine also asserts the model-level invariants that the protocol's
correctness argument relies on (at most one active transmitter, the
phase-1 heard-twice/heard-zero exclusion, no smite rebroadcast for a
degree someone accepted) so that rule mutations or harness bugs surface
as explicit violations instead of silent divergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional

from .degseq import RealizationOutcome
from .groups import GroupLayout, enforce_capacity
from .protocol import (
    AllOkay,
    Announce,
    FaultEntry,
    NodeState,
    ProtocolNode,
    ProtocolViolation,
    SMITE,
)

__all__ = [
    "SimConfig",
    "Metrics",
    "NodeOutcome",
    "ExecutionResult",
    "RoundEngine",
    "SimulationError",
    "ConfigError",
    "AdversaryError",
    "RoundLimitExceeded",
    "CapacityViolation",
    "run_simulation",
]


class SimulationError(Exception):
    """Base for engine-level failures."""


class ConfigError(SimulationError):
    pass


class AdversaryError(SimulationError):
    """The adversary broke its contract (budget, double crash, ...)."""


class RoundLimitExceeded(SimulationError):
    """Watchdog tripped; carries the partial trace for diagnosis."""

    def __init__(self, message: str, trace_rounds: list[dict] | None = None):
        super().__init__(message)
        self.trace_rounds = trace_rounds


class CapacityViolation(SimulationError):
    """Strict mode: a message was dropped or a send budget was exceeded."""


@dataclass(frozen=True)
class SimConfig:
    """One execution's parameters. `mutations` injects test-only rule
    changes and must stay empty in real use."""

    n: int
    degrees: tuple[int, ...]
    model: str = "cc"
    capacity_c: int = 1
    strict: bool = False
    seed: int = 0
    mutations: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if len(self.degrees) != self.n:
            raise ConfigError(
                f"degree list has {len(self.degrees)} entries for n={self.n}"
            )
        if any(d < 0 for d in self.degrees):
            raise ConfigError("degrees must be non-negative")
        if self.model not in ("cc", "ncc"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.capacity_c < 1:
            raise ConfigError("capacity constant must be >= 1")


@dataclass
class Metrics:
    rounds_to_termination: int = 0
    messages_sent: int = 0
    per_round_counts: list[int] = field(default_factory=list)
    allokay_broadcasters: int = 0
    max_send_per_round: int = 0
    max_recv_per_round: int = 0
    dropped_messages: int = 0


class NodeOutcome:
    """Final per-node record. The realization verdict is derived lazily from
    the view (it is a deterministic function of it)."""

    def __init__(
        self,
        index: int,
        state: str,
        crashed_round: Optional[int],
        exit_round: Optional[int],
        view: dict[int, int],
    ):
        self.index = index
        self.state = state
        self.crashed_round = crashed_round
        self.exit_round = exit_round
        self.view = view

    @cached_property
    def verdict(self) -> Optional[RealizationOutcome]:
        if self.exit_round is None:
            return None
        from .degseq import DegreeSequence, havel_hakimi

        return havel_hakimi(DegreeSequence(tuple(sorted(self.view.items()))))

    def __repr__(self) -> str:
        return (
            f"NodeOutcome(index={self.index}, state={self.state!r}, "
            f"crashed_round={self.crashed_round}, exit_round={self.exit_round}, "
            f"view={self.view})"
        )


@dataclass
class ExecutionResult:
    config: SimConfig
    metrics: Metrics
    nodes: list[NodeOutcome]
    crashes: list[tuple[int, int, tuple[int, ...]]]  # (round, node, delivered)
    trace_rounds: Optional[list[dict]] = None

    def survivors(self) -> list[NodeOutcome]:
        return [o for o in self.nodes if o.crashed_round is None]

    def exited(self) -> list[NodeOutcome]:
        return [o for o in self.nodes if o.exit_round is not None]


class RoundEngine:
    """Single-use: build, call run() once."""

    def __init__(
        self,
        config: SimConfig,
        adversary,
        record_trace: bool = False,
        layout: GroupLayout | None = None,
    ):
        self.config = config
        self.adversary = adversary
        self.record_trace = record_trace
        budget = getattr(adversary, "budget", 0)
        if budget >= config.n:
            raise ConfigError(f"fault budget {budget} must be < n={config.n}")
        if config.model == "ncc":
            self.layout = layout or GroupLayout.for_clique(config.n)
        else:
            self.layout = None
        self.capacity = (
            config.capacity_c * self.layout.group_size if self.layout else None
        )
        self.nodes = [
            ProtocolNode(
                i + 1, config.degrees[i], config.n, self.layout, config.mutations
            )
            for i in range(config.n)
        ]
        self.budget = budget
        self.round = 0
        self._live = list(self.nodes)
        self.crashed_round: dict[int, int] = {}
        self.crash_log: list[tuple[int, int, tuple[int, ...]]] = []
        self.metrics = Metrics()
        self.trace_rounds: list[dict] = []
        self._phase1_counts: dict[int, list[int]] | None = None
        self._phase1_len = self.nodes[0].phase1_len
        self._unsettled = set(range(1, config.n + 1))
        # Watchdog: every timeout and transmission in capacitated mode is
        # stretched by the group count, so the cap scales with it too.
        scale = self.layout.group_count if self.layout else 1
        self.round_cap = (10 * (config.n + budget) + 20) * scale
        # Current-round scratch, visible to adaptive adversaries.
        self.outboxes: dict[int, list[tuple[Any, list[int]]]] = {}

    # -- helpers ------------------------------------------------------------

    def node(self, index: int) -> ProtocolNode:
        return self.nodes[index - 1]

    def is_crashed(self, index: int) -> bool:
        return index in self.crashed_round

    def remaining_budget(self) -> int:
        return self.budget - len(self.crashed_round)

    # -- main loop -----------------------------------------------------------

    def run(self) -> ExecutionResult:
        while self._unsettled:
            self.round += 1
            if self.round > self.round_cap:
                raise RoundLimitExceeded(
                    f"no termination within {self.round_cap} rounds "
                    f"(n={self.config.n}, model={self.config.model})",
                    self.trace_rounds if self.record_trace else None,
                )
            self._step()
        self.metrics.rounds_to_termination = self._last_exit_round()
        self.metrics.allokay_broadcasters = sum(
            1 for node in self.nodes if node.allokay_broadcast
        )
        return self._result()

    def _step(self) -> None:
        rnd = self.round
        states_before = (
            [node.state for node in self.nodes] if self.record_trace else None
        )

        self.outboxes = {}
        for node in self._live:
            out = node.emit(rnd)
            if out:
                self.outboxes[node.index] = out

        decisions = self._crash_decisions(rnd)
        mailboxes: dict[int, list[Any]] = {}
        delivered_count = 0
        round_crashes: list[tuple[int, tuple[int, ...]]] = []
        for sender, items in self.outboxes.items():
            allowed = decisions.get(sender)
            delivered_to: list[int] = []
            attempted = 0
            for msg, recipients in items:
                self._check_outgoing(msg)
                attempted += len(recipients)
                if allowed is not None:
                    recipients = [j for j in recipients if j in allowed]
                for j in recipients:
                    mailboxes.setdefault(j, []).append(msg)
                delivered_to.extend(recipients)
                delivered_count += len(recipients)
            if self.capacity is not None and attempted:
                self.metrics.max_send_per_round = max(
                    self.metrics.max_send_per_round, attempted
                )
                if attempted > self.capacity:
                    raise ProtocolViolation(
                        f"node {sender} sent {attempted} messages in round "
                        f"{rnd}, capacity {self.capacity}"
                    )
            if allowed is not None:
                round_crashes.append((sender, tuple(sorted(delivered_to))))
        for node_index in decisions:
            if node_index not in self.outboxes:
                round_crashes.append((node_index, ()))
        if round_crashes:
            round_crashes.sort()
            for node_index, delivered in round_crashes:
                self.crashed_round[node_index] = rnd
                self.crash_log.append((rnd, node_index, delivered))
                self._unsettled.discard(node_index)
            self._live = [
                node for node in self._live if node.index not in self.crashed_round
            ]

        self.metrics.messages_sent += delivered_count
        self.metrics.per_round_counts.append(delivered_count)

        for node in self._live:
            inbox = mailboxes.get(node.index, [])
            if self.capacity is not None:
                self.metrics.max_recv_per_round = max(
                    self.metrics.max_recv_per_round, len(inbox)
                )
                if len(inbox) > self.capacity:
                    inbox, dropped = enforce_capacity(inbox, self.capacity)
                    self.metrics.dropped_messages += len(dropped)
                    if self.config.strict:
                        raise CapacityViolation(
                            f"node {node.index} dropped {len(dropped)} messages "
                            f"in round {rnd}"
                        )
            node.receive(rnd, inbox)
            if node.state is NodeState.EXIT:
                self._unsettled.discard(node.index)

        self._check_single_active()
        if rnd == self._phase1_len:
            self._snapshot_phase1()
            self._check_phase1_exclusion()
        if self.record_trace:
            self._record_round(rnd, round_crashes, states_before)

    def _crash_decisions(self, rnd: int) -> dict[int, frozenset[int]]:
        raw = self.adversary.decide(self, rnd)
        if not raw:
            return {}
        decisions: dict[int, frozenset[int]] = {}
        for node_index, recipients in raw.items():
            if not 1 <= node_index <= self.config.n:
                raise AdversaryError(f"crash of unknown node {node_index}")
            if self.is_crashed(node_index):
                raise AdversaryError(f"node {node_index} crashed twice")
            decisions[node_index] = frozenset(recipients)
        if len(self.crashed_round) + len(decisions) > self.budget:
            raise AdversaryError(
                f"fault budget {self.budget} exceeded in round {rnd}"
            )
        return decisions

    # -- invariants ----------------------------------------------------------

    def _check_outgoing(self, msg: Any) -> None:
        if (
            isinstance(msg, FaultEntry)
            and msg.status == SMITE
            and self._phase1_counts is not None
        ):
            for node_index, counts in self._phase1_counts.items():
                if counts[msg.subject] >= 2:
                    raise ProtocolViolation(
                        f"smite rebroadcast for node {msg.subject}, which node "
                        f"{node_index} heard twice in phase 1"
                    )

    def _check_single_active(self) -> None:
        first = 0
        for node in self._live:
            if node.state is NodeState.ACTIVE:
                if first:
                    raise ProtocolViolation(
                        f"nodes {first} and {node.index} are simultaneously "
                        f"active in round {self.round}"
                    )
                first = node.index

    def _snapshot_phase1(self) -> None:
        self._phase1_counts = {
            node.index: list(node.heard_count) for node in self._live
        }

    def _check_phase1_exclusion(self) -> None:
        assert self._phase1_counts is not None
        for subject in range(1, self.config.n + 1):
            twice = [
                i
                for i, counts in self._phase1_counts.items()
                if i != subject and counts[subject] >= 2
            ]
            never = [
                i
                for i, counts in self._phase1_counts.items()
                if i != subject and counts[subject] == 0
            ]
            if twice and never:
                raise ProtocolViolation(
                    f"phase-1 exclusion broken for node {subject}: heard twice "
                    f"by {twice}, never by {never}"
                )

    # -- reporting -----------------------------------------------------------

    def _last_exit_round(self) -> int:
        exits = [
            node.exit_round for node in self.nodes if node.exit_round is not None
        ]
        return max(exits) if exits else self.round

    def _record_round(
        self,
        rnd: int,
        round_crashes: list[tuple[int, tuple[int, ...]]],
        states_before: list[NodeState],
    ) -> None:
        sends = []
        for sender, items in sorted(self.outboxes.items()):
            for msg, recipients in items:
                sends.append(_send_record(sender, msg, recipients))
        transitions = []
        for node, before in zip(self.nodes, states_before):
            crashed_now = self.crashed_round.get(node.index) == rnd
            if crashed_now:
                transitions.append({"node": node.index, "to": "crashed"})
            elif node.state is not before:
                transitions.append({"node": node.index, "to": node.state.value})
        self.trace_rounds.append(
            {
                "record": "round",
                "round": rnd,
                "crashes": [
                    {"node": i, "delivered": list(d)} for i, d in sorted(round_crashes)
                ],
                "sends": sends,
                "transitions": transitions,
            }
        )

    def _result(self) -> ExecutionResult:
        outcomes = []
        for node in self.nodes:
            crashed = self.crashed_round.get(node.index)
            if crashed is not None:
                state = "crashed"
            else:
                state = node.state.value
            outcomes.append(
                NodeOutcome(
                    index=node.index,
                    state=state,
                    crashed_round=crashed,
                    exit_round=node.exit_round,
                    view=dict(node.view),
                )
            )
        return ExecutionResult(
            config=self.config,
            metrics=self.metrics,
            nodes=outcomes,
            crashes=list(self.crash_log),
            trace_rounds=self.trace_rounds if self.record_trace else None,
        )


def _send_record(sender: int, msg: Any, recipients: list[int]) -> dict:
    if isinstance(msg, Announce):
        return {
            "from": sender,
            "kind": "announce",
            "degree": msg.degree,
            "to": list(recipients),
        }
    if isinstance(msg, FaultEntry):
        return {
            "from": sender,
            "kind": "fault",
            "subject": msg.subject,
            "status": msg.status,
            "degree": msg.degree,
            "to": list(recipients),
        }
    if isinstance(msg, AllOkay):
        return {"from": sender, "kind": "allokay", "to": list(recipients)}
    raise TypeError(f"unknown message type {type(msg)!r}")


def run_simulation(
    config: SimConfig, adversary, record_trace: bool = False
) -> ExecutionResult:
    """Build an engine, run one execution, return the result."""
    return RoundEngine(config, adversary, record_trace=record_trace).run()
