"""The simulated system.

A protocol is a family of deterministic state machines, one per process, that
talk to an m-component multi-writer snapshot ``M``.  Each machine alternates
``Scan`` and ``Update`` steps, starting with a ``Scan``, and announces its
output right after some ``Scan``.  Everything here is purely sequential: the
interleaving is whatever schedule the caller hands to :func:`run_schedule`.

Process ids and component indices are 1-based throughout the package, and the
initial ``⊥`` content of a component is ``None``.
"""

from __future__ import annotations

import random
from collections.abc import Callable, Hashable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any, Union

from .codec import digest, to_jsonable
from .errors import AlternationViolation, BadComponent, StepOnTerminated

BOTTOM = None
"""Initial content of every component (written ``⊥`` in prose)."""


@dataclass(frozen=True)
class Scan:
    """Atomically read all m components."""

    def __repr__(self) -> str:
        return "Scan"


SCAN = Scan()


@dataclass(frozen=True)
class Update:
    """Write ``value`` to ``component`` (1-based)."""

    component: int
    value: Any


@dataclass(frozen=True)
class Output:
    """Terminal marker: the process has decided ``value``."""

    value: Any


StepKind = Union[Scan, Update]
Action = Union[Scan, Update, Output]


def register_op(old: Any, value: Any) -> tuple[Any, Any]:
    """Plain register semantics: overwrite, respond with unit (``None``)."""
    return value, None


@dataclass(frozen=True)
class ProtocolSpec:
    """A protocol for ``n`` processes over ``m`` components.

    ``initial_state(pid, input)`` builds the start state, ``next_step(state)``
    says what the process does next and ``transition(state, response)`` folds
    in the response of that step.  States must be hashable so configurations
    can be deduplicated during exploration.

    ``component_op(old, argument) -> (new, response)`` fixes what an update to
    a component does.  It defaults to register semantics, which is the only
    kind the simulation engine accepts; the transformation module also uses
    max-registers and fetch-and-increment objects.
    """

    name: str
    n: int
    m: int
    initial_state: Callable[[int, Any], Hashable]
    next_step: Callable[[Hashable], Action]
    transition: Callable[[Hashable, Any], Hashable]
    initial_values: tuple | None = None
    component_op: Callable[[Any, Any], tuple[Any, Any]] = register_op

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if self.initial_values is None:
            object.__setattr__(self, "initial_values", (BOTTOM,) * self.m)
        elif len(self.initial_values) != self.m:
            raise ValueError("initial_values must have exactly m entries")

    @property
    def uses_registers(self) -> bool:
        return self.component_op is register_op


@dataclass(frozen=True)
class Configuration:
    """States of all processes plus the contents of ``M``.

    ``last`` remembers the kind of each process's previous step (``None``,
    ``"scan"`` or ``"update"``) so alternation can be enforced step by step.
    """

    states: tuple
    contents: tuple
    last: tuple

    @classmethod
    def initial(cls, protocol: ProtocolSpec, inputs: Sequence[Any]) -> Configuration:
        if len(inputs) != protocol.n:
            raise ValueError(f"expected {protocol.n} inputs, got {len(inputs)}")
        states = tuple(protocol.initial_state(pid, x) for pid, x in enumerate(inputs, start=1))
        return cls(states, tuple(protocol.initial_values), (None,) * protocol.n)

    def state(self, pid: int) -> Hashable:
        return self.states[pid - 1]

    def action(self, pid: int, protocol: ProtocolSpec) -> Action:
        return protocol.next_step(self.states[pid - 1])

    def has_output(self, pid: int, protocol: ProtocolSpec) -> bool:
        return isinstance(protocol.next_step(self.states[pid - 1]), Output)

    def outputs(self, protocol: ProtocolSpec) -> dict[int, Any]:
        res = {}
        for pid, s in enumerate(self.states, start=1):
            act = protocol.next_step(s)
            if isinstance(act, Output):
                res[pid] = act.value
        return res


@dataclass(frozen=True)
class Event:
    """One step: who moved, what they did and what they got back."""

    pid: int
    step: StepKind
    response: Any

    @property
    def kind(self) -> str:
        return "scan" if isinstance(self.step, Scan) else "update"


def check_component(j: int, m: int) -> None:
    if not isinstance(j, int) or not 1 <= j <= m:
        raise BadComponent(f"component {j!r} outside 1..{m}")


def apply_step(config: Configuration, pid: int, protocol: ProtocolSpec) -> tuple[Configuration, Event]:
    """Let ``pid`` take its next step from ``config``."""
    idx = pid - 1
    state = config.states[idx]
    step = protocol.next_step(state)
    if isinstance(step, Output):
        raise StepOnTerminated(f"process {pid} already output {step.value!r}")
    kind = "scan" if isinstance(step, Scan) else "update"
    prev = config.last[idx]
    if prev == kind or (prev is None and kind == "update"):
        raise AlternationViolation(f"process {pid}: {kind} after {prev or 'nothing'}")
    contents = config.contents
    if kind == "scan":
        response = contents
    else:
        check_component(step.component, protocol.m)
        j = step.component - 1
        new, response = protocol.component_op(contents[j], step.value)
        contents = contents[:j] + (new,) + contents[j + 1:]
    states = config.states[:idx] + (protocol.transition(state, response),) + config.states[idx + 1:]
    last = config.last[:idx] + (kind,) + config.last[idx + 1:]
    return Configuration(states, contents, last), Event(pid, step, response)


@dataclass
class ExecutionRecord:
    """An execution: the initial configuration and the events applied to it.

    ``tags`` optionally carries one annotation per event (the reconstruction
    module uses it to say which piece of the decomposition an event came from).
    """

    initial: Configuration
    events: list[Event] = field(default_factory=list)
    final: Configuration | None = None
    exhausted: bool = False
    tags: list[Any] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    def lines(self) -> list[dict]:
        out = []
        for seq, ev in enumerate(self.events):
            rec = {"seq": seq, "pid": ev.pid, "kind": ev.kind}
            if isinstance(ev.step, Update):
                rec["component"] = ev.step.component
                rec["value"] = to_jsonable(ev.step.value)
            else:
                rec["component"] = None
                rec["value"] = None
            rec["response"] = digest(ev.response)
            if self.tags:
                rec["tag"] = to_jsonable(self.tags[seq])
            out.append(rec)
        return out


def alternation_violations(record: ExecutionRecord) -> list[int]:
    """Indices of events that break per-process Scan/Update alternation."""
    last: dict[int, str] = {}
    bad = []
    for i, ev in enumerate(record.events):
        prev = last.get(ev.pid)
        if prev == ev.kind or (prev is None and ev.kind == "update"):
            bad.append(i)
        last[ev.pid] = ev.kind
    return bad


def replay(protocol: ProtocolSpec, initial: Configuration, pids: Iterable[int]) -> ExecutionRecord:
    """Apply the steps of ``pids`` in order, raising on any illegal step."""
    rec = ExecutionRecord(initial)
    cfg = initial
    for pid in pids:
        cfg, ev = apply_step(cfg, pid, protocol)
        rec.events.append(ev)
    rec.final = cfg
    return rec


def run_schedule(
    protocol: ProtocolSpec,
    inputs: Sequence[Any],
    schedule: Sequence[int] | str = "round_robin",
    *,
    seed: int = 0,
    budget: int = 1000,
    start: Configuration | None = None,
) -> ExecutionRecord:
    """Drive ``protocol`` until everybody has output or ``budget`` steps ran.

    ``schedule`` is either an explicit pid sequence or the name of a policy:
    ``"round_robin"`` cycles over live processes in id order, ``"random"``
    picks a live process uniformly with ``random.Random(seed)``.  Entries of an
    explicit schedule naming a process that has already output are skipped,
    so records never contain rejected steps.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    cfg = start if start is not None else Configuration.initial(protocol, inputs)
    rec = ExecutionRecord(cfg)

    def live(c: Configuration) -> list[int]:
        return [p for p in range(1, protocol.n + 1) if not c.has_output(p, protocol)]

    if isinstance(schedule, str):
        if schedule not in ("round_robin", "random"):
            raise ValueError(f"unknown schedule policy {schedule!r}")
        rng = random.Random(seed)
        turn = 0
        while len(rec.events) < budget:
            alive = live(cfg)
            if not alive:
                break
            if schedule == "random":
                pid = rng.choice(alive)
            else:
                pid = alive[turn % len(alive)]
                turn += 1
            cfg, ev = apply_step(cfg, pid, protocol)
            rec.events.append(ev)
    else:
        for pid in schedule:
            if len(rec.events) >= budget:
                break
            if cfg.has_output(pid, protocol):
                continue
            cfg, ev = apply_step(cfg, pid, protocol)
            rec.events.append(ev)
    rec.final = cfg
    rec.exhausted = bool(live(cfg)) and len(rec.events) >= budget
    return rec


# ---------------------------------------------------------------------------
# obstruction-freedom exploration


@dataclass
class XofReport:
    """Outcome of :func:`check_x_of`.

    ``exhaustive`` is true when every schedule up to ``budget`` was covered;
    otherwise the tail beyond the exhaustive frontier was sampled.  When
    ``ok`` is false, ``witness`` is a schedule (from the starting
    configuration) after which some process of the group still has not
    output although the budget is spent.
    """

    ok: bool
    pids: tuple[int, ...]
    budget: int
    exhaustive: bool
    explored: int
    witness: tuple[int, ...] | None = None


def check_x_of(
    protocol: ProtocolSpec,
    config: Configuration,
    pids: Iterable[int],
    budget: int = 64,
    *,
    x: int | None = None,
    frontier_depth: int = 8,
    max_frontier: int = 4096,
    samples: int = 256,
    seed: int = 0,
) -> XofReport:
    """Check that ``pids`` running alone from ``config`` all output within ``budget`` steps.

    Schedules are enumerated breadth first, merging equal configurations on
    each level.  Enumeration is exact for the first ``frontier_depth`` levels
    and stays exact beyond that while a level has at most ``max_frontier``
    configurations.  Past that point each surviving configuration gets
    seeded random continuations.
    """
    group = tuple(sorted(set(pids)))
    if x is not None and len(group) > x:
        raise ValueError(f"{len(group)} processes given for x={x}")

    def pending(c: Configuration) -> list[int]:
        return [p for p in group if not c.has_output(p, protocol)]

    level: dict[Configuration, tuple[int, ...]] = {}
    if pending(config):
        level[config] = ()
    explored = 1
    depth = 0
    while level and depth < budget:
        if depth >= frontier_depth and len(level) > max_frontier:
            break
        nxt: dict[Configuration, tuple[int, ...]] = {}
        for cfg, sched in level.items():
            for p in pending(cfg):
                c2, _ = apply_step(cfg, p, protocol)
                if c2 not in nxt:
                    nxt[c2] = sched + (p,)
        explored += len(nxt)
        level = {c: s for c, s in nxt.items() if pending(c)}
        depth += 1
    if not level:
        return XofReport(True, group, budget, True, explored)
    if depth >= budget:
        witness = next(iter(level.values()))
        return XofReport(False, group, budget, True, explored, witness)

    rng = random.Random(seed)
    frontier = list(level.items())
    for s in range(samples):
        cfg, sched = frontier[s % len(frontier)] if s < len(frontier) else rng.choice(frontier)
        path = list(sched)
        while len(path) < budget:
            alive = pending(cfg)
            if not alive:
                break
            p = rng.choice(alive)
            cfg, _ = apply_step(cfg, p, protocol)
            path.append(p)
        explored += 1
        if pending(cfg):
            return XofReport(False, group, budget, False, explored, tuple(path))
    return XofReport(True, group, budget, False, explored)


def reachable(protocol: ProtocolSpec, inputs: Sequence[Any], depth: int) -> set[Configuration]:
    """All configurations reachable from the initial one in at most ``depth`` steps."""
    start = Configuration.initial(protocol, inputs)
    seen = {start}
    level = [start]
    for _ in range(depth):
        nxt = []
        for cfg in level:
            for p in range(1, protocol.n + 1):
                if cfg.has_output(p, protocol):
                    continue
                c2, _ = apply_step(cfg, p, protocol)
                if c2 not in seen:
                    seen.add(c2)
                    nxt.append(c2)
        level = nxt
    return seen


def terminal_runs(
    protocol: ProtocolSpec, inputs: Sequence[Any], depth: int
) -> Iterable[Configuration]:
    """Configurations within ``depth`` steps in which every process has output."""
    for cfg in reachable(protocol, inputs, depth):
        if all(cfg.has_output(p, protocol) for p in range(1, protocol.n + 1)):
            yield cfg


# ---------------------------------------------------------------------------
# colorless tasks


@dataclass(frozen=True)
class ColorlessTask:
    """Consensus, k-set agreement or ε-approximate agreement."""

    kind: str
    k: int = 1
    eps: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("consensus", "kset", "eps"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == "kset" and self.k < 1:
            raise ValueError("k must be positive")
        if self.kind == "eps" and not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")

    @classmethod
    def consensus(cls) -> ColorlessTask:
        return cls("consensus", 1)

    @classmethod
    def kset(cls, k: int) -> ColorlessTask:
        return cls("kset", k)

    @classmethod
    def eps_agreement(cls, eps: float) -> ColorlessTask:
        return cls("eps", eps=eps)

    def __str__(self) -> str:
        if self.kind == "kset":
            return f"{self.k}-set agreement"
        if self.kind == "eps":
            return f"{self.eps}-agreement"
        return "consensus"


def validate_task(task: ColorlessTask, inputs: Iterable[Any], outputs: Iterable[Any]) -> bool:
    """Are ``outputs`` a legal answer to ``inputs`` for ``task``?"""
    ins = list(inputs)
    outs = list(outputs)
    if not outs:
        raise ValueError("outputs must be nonempty")
    if task.kind == "eps":
        lo, hi = min(ins), max(ins)
        if any(not lo <= y <= hi for y in outs):
            return False
        return max(outs) - min(outs) <= task.eps
    limit = 1 if task.kind == "consensus" else task.k
    if any(y not in ins for y in outs):
        return False
    return len(set(outs)) <= limit
