"""Crash strategies: benign, scripted, randomized, an adaptive worst-case
heuristic, and an exhaustive small-instance plan enumerator.

An adversary is any object with a `budget` attribute and a
`decide(engine, round) -> dict[node, recipients] | None` method, called once
per round after all sends are computed. Returning a node index crashes that
node this round; the associated recipient collection is the subset of its
current outbox that still gets delivered. Decisions may inspect the full
engine state (the model grants the adversary complete observability).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Iterator, NamedTuple, Sequence

from .protocol import FaultEntry

__all__ = [
    "CrashEvent",
    "CrashPlan",
    "NoneAdversary",
    "ScriptedAdversary",
    "RandomAdversary",
    "WorstCaseAdversary",
    "PlanSpace",
    "none_adversary",
    "scripted",
    "random_adversary",
    "worst_case_heuristic",
    "exhaustive_enumerator",
    "parse_plan_file",
    "format_plan",
]

ENUM_MAX_N = 4
ENUM_MAX_F = 3
ENUM_MAX_HORIZON = 14


class CrashEvent(NamedTuple):
    round: int
    node: int
    recipients: tuple[int, ...]  # delivered subset of that round's outbox


@dataclass(frozen=True)
class CrashPlan:
    """Fully scripted crash schedule: at most one crash per node."""

    events: tuple[CrashEvent, ...]

    def __post_init__(self) -> None:
        nodes = [e.node for e in self.events]
        if len(set(nodes)) != len(nodes):
            raise ValueError("a node may crash at most once")
        if any(e.round < 1 for e in self.events):
            raise ValueError("crash rounds start at 1")

    def __len__(self) -> int:
        return len(self.events)


class NoneAdversary:
    """Crashes nobody, whatever the budget."""

    def __init__(self, budget: int = 0):
        self.budget = budget

    def decide(self, engine, rnd: int):
        return None


class ScriptedAdversary:
    def __init__(self, plan: CrashPlan):
        self.plan = plan
        self.budget = len(plan)
        self._by_round: dict[int, dict[int, tuple[int, ...]]] = {}
        for event in plan.events:
            self._by_round.setdefault(event.round, {})[event.node] = event.recipients

    def decide(self, engine, rnd: int):
        return self._by_round.get(rnd)


class RandomAdversary:
    """Each not-yet-crashed node crashes independently per round with fixed
    probability until the budget runs out; the delivered subset of the
    crash-round outbox is uniform."""

    def __init__(self, seed: int, budget: int, crash_probability: float = 0.05):
        self.budget = budget
        self.crash_probability = crash_probability
        self._rng = random.Random(seed)

    def decide(self, engine, rnd: int):
        decisions: dict[int, tuple[int, ...]] = {}
        for node in engine.nodes:
            if engine.remaining_budget() - len(decisions) <= 0:
                break
            if engine.is_crashed(node.index):
                continue
            if self._rng.random() >= self.crash_probability:
                continue
            recipients = set()
            for _, targets in engine.outboxes.get(node.index, []):
                recipients.update(j for j in targets if self._rng.random() < 0.5)
            decisions[node.index] = tuple(sorted(recipients))
        return decisions or None


class WorstCaseAdversary:
    """Round-stretching heuristic: one phase-1 crash splits the network's
    view of a degree in half, then every successive active node is crashed
    while sending the last copy of an entry, with nothing delivered, so its
    successor must wait out the full silence timeout and retransmit."""

    def __init__(self, budget: int):
        self.budget = budget

    def decide(self, engine, rnd: int):
        if self.budget == 0:
            return None
        if rnd == 1 and not engine.is_crashed(2) and engine.config.n >= 2:
            out = engine.outboxes.get(2, [])
            recipients = sorted({j for _, targets in out for j in targets})
            keep = recipients[: (len(recipients) + 1) // 2]
            return {2: tuple(keep)}
        if rnd <= engine.nodes[0].phase1_len or engine.remaining_budget() == 0:
            return None
        for node in engine.nodes:
            if engine.is_crashed(node.index) or node.index not in engine.outboxes:
                continue
            sends = engine.outboxes[node.index]
            is_fault = any(isinstance(m, FaultEntry) for m, _ in sends)
            finished_entry = (
                node.current_subject is None
                and node.sends_done == node.copies_per_entry
            )
            if is_fault and finished_entry:
                return {node.index: ()}
        return None


def none_adversary(budget: int = 0) -> NoneAdversary:
    return NoneAdversary(budget)


def scripted(plan: CrashPlan) -> ScriptedAdversary:
    return ScriptedAdversary(plan)


def random_adversary(
    seed: int, budget: int, crash_probability: float = 0.05
) -> RandomAdversary:
    return RandomAdversary(seed, budget, crash_probability)


def worst_case_heuristic(budget: int) -> WorstCaseAdversary:
    return WorstCaseAdversary(budget)


class PlanSpace(Sequence):
    """Every crash schedule with up to f crashers, crash rounds in
    [1, horizon], and per-crasher delivery subsets over the other n-1 nodes.

    Index-addressable so that enumeration can be sharded across workers
    without materializing millions of plans.
    """

    def __init__(self, n: int, f: int, horizon: int):
        if n > ENUM_MAX_N or f > ENUM_MAX_F or horizon > ENUM_MAX_HORIZON:
            raise ValueError(
                f"enumeration capped at n<={ENUM_MAX_N}, f<={ENUM_MAX_F}, "
                f"horizon<={ENUM_MAX_HORIZON}; got n={n}, f={f}, horizon={horizon}"
            )
        if f >= n:
            raise ValueError("f must be < n")
        self.n = n
        self.f = f
        self.horizon = horizon
        self.subsets_per_node = 1 << (n - 1)
        self.options = horizon * self.subsets_per_node
        self._node_sets: list[tuple[int, ...]] = []
        for k in range(f + 1):
            self._node_sets.extend(combinations(range(1, n + 1), k))
        self._offsets: list[int] = []
        total = 0
        for nodes in self._node_sets:
            self._offsets.append(total)
            total += self.options ** len(nodes)
        self._total = total

    def __len__(self) -> int:
        return self._total

    def __getitem__(self, index: int) -> CrashPlan:
        if not 0 <= index < self._total:
            raise IndexError(index)
        lo, hi = 0, len(self._node_sets) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._offsets[mid] <= index:
                lo = mid
            else:
                hi = mid - 1
        nodes = self._node_sets[lo]
        rest = index - self._offsets[lo]
        events = []
        for node in reversed(nodes):
            rest, option = divmod(rest, self.options)
            rnd, mask = divmod(option, self.subsets_per_node)
            others = [j for j in range(1, self.n + 1) if j != node]
            recipients = tuple(
                others[b] for b in range(self.n - 1) if mask >> b & 1
            )
            events.append(CrashEvent(rnd + 1, node, recipients))
        return CrashPlan(tuple(reversed(events)))

    def __iter__(self) -> Iterator[CrashPlan]:
        for i in range(self._total):
            yield self[i]


def exhaustive_enumerator(
    n: int, f: int, horizon: int = ENUM_MAX_HORIZON
) -> PlanSpace:
    """All crash plans within the tractability caps (n<=4, f<=3, horizon<=14)."""
    return PlanSpace(n, f, horizon)


def format_plan(plan: CrashPlan) -> str:
    """One crash event per line: round, node index, delivered recipients."""
    lines = ["# round node recipients"]
    for event in sorted(plan.events):
        recips = ",".join(str(j) for j in event.recipients) or "-"
        lines.append(f"{event.round} {event.node} {recips}")
    return "\n".join(lines) + "\n"


def parse_plan_file(text: str) -> CrashPlan:
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"plan line {lineno}: expected 'round node recipients'")
        rnd, node = int(parts[0]), int(parts[1])
        if parts[2] == "-":
            recipients: tuple[int, ...] = ()
        else:
            recipients = tuple(int(x) for x in parts[2].split(","))
        events.append(CrashEvent(rnd, node, recipients))
    return CrashPlan(tuple(events))
