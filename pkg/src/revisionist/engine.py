"""Real processes simulating a protocol through the augmented snapshot.

``f`` simulators share one :class:`~revisionist.augsnap.AugmentedSnapshot`.
Simulators ``q_1..q_{f-d}`` are *covering*: each owns ``m`` simulated
processes and tries to make them cover all ``m`` components, inventing
hidden solo steps ("revising the past") whenever an earlier atomic
Block-Update hides them.  The remaining ``d`` simulators are *direct*: each
owns one process and forwards its steps one by one.

Every simulator is a step generator, so a :class:`~revisionist.sched.World`
interleaves them at base-step granularity.  Besides outputs, a run keeps
what reconstruction later needs: per-operation metadata (which simulated
process each operation stands for and the stored states right after it),
every revision with its hidden steps, and the local tails of covering
simulators that finished by building a full block.
"""

from __future__ import annotations

import math
import random
from collections.abc import Generator, Hashable, Sequence
from dataclasses import dataclass, field
from typing import Any

from .augsnap import AugmentedSnapshot, Step
from .errors import BadParameters, LocalSimBudgetExceeded, ProtocolMisbehavior
from .model import SCAN, Configuration, Event, Output, ProtocolSpec, Scan, Update
from .sched import World
from .trace import YIELD


@dataclass(frozen=True)
class SimulationSetup:
    """Who simulates whom, on which inputs.

    ``partition[i-1]`` lists the simulated process ids of ``q_i`` in label
    order ``p_{i,1}, p_{i,2}, ...``.  Covering simulators come first and get
    ``m`` processes each; direct simulators get one.  Blocks are contiguous
    id ranges, so the layout is fixed by ``(f, d, m)``.
    """

    protocol: ProtocolSpec
    f: int
    d: int
    inputs: tuple
    local_budget: int = 100_000
    partition: tuple = field(init=False)

    def __post_init__(self) -> None:
        n, m = self.protocol.n, self.protocol.m
        if self.f < 1:
            raise BadParameters(f"need at least one simulator, got f={self.f}")
        if not 0 <= self.d < self.f:
            raise BadParameters(f"need 0 <= d < f, got d={self.d}, f={self.f}")
        if (self.f - self.d) * m + self.d > n:
            raise BadParameters(
                f"(f-d)*m + d = {(self.f - self.d) * m + self.d} exceeds n = {n}: "
                "not enough simulated processes")
        if len(self.inputs) != self.f:
            raise BadParameters(f"expected {self.f} inputs, got {len(self.inputs)}")
        if not self.protocol.uses_registers:
            raise BadParameters("the simulation needs plain register components")
        if self.local_budget < 1:
            raise BadParameters("local budget must be positive")
        parts = []
        nxt = 1
        for i in range(1, self.f + 1):
            size = m if self.covering(i) else 1
            parts.append(tuple(range(nxt, nxt + size)))
            nxt += size
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "partition", tuple(parts))

    @property
    def m(self) -> int:
        return self.protocol.m

    def covering(self, i: int) -> bool:
        return i <= self.f - self.d

    def owner(self, pid: int) -> int | None:
        for i, part in enumerate(self.partition, start=1):
            if pid in part:
                return i
        return None

    def simulated_inputs(self) -> tuple:
        """Input vector of the simulated system.

        Processes of ``P_i`` get ``x_i``.  Processes outside every ``P_i``
        never take a step; they get ``x_1`` so the vector is complete.
        """
        out = []
        for pid in range(1, self.protocol.n + 1):
            i = self.owner(pid)
            out.append(self.inputs[(i or 1) - 1])
        return tuple(out)

    def initial_configuration(self) -> Configuration:
        return Configuration.initial(self.protocol, self.simulated_inputs())


@dataclass
class RevisionRecord:
    """``q_i`` revised the past of ``process`` using the view of ``source``.

    ``steps`` are the hidden solo steps, ``trigger`` the Scan operation right
    after which the revision happened, and ``outcome`` either
    ``("update", j, v)`` (now poised to write a fresh component) or
    ``("output", y)``.
    """

    simulator: int
    process: int
    level: int
    source: int
    view: tuple
    steps: list[Event]
    trigger: int
    outcome: tuple


@dataclass
class OpMeta:
    """What one augmented operation of a simulator stands for.

    ``procs`` maps each written component to the simulated process whose
    update it carries (a Scan maps ``0`` to ``p_{i,1}``).  ``post_states``
    are the states of ``P_i`` stored by the simulator right after the
    operation, revisions included.  They become known at the simulator's
    next operation or when it stops.
    """

    op: int
    simulator: int
    kind: str
    procs: dict[int, int]
    post_states: dict[int, Hashable] | None = None


@dataclass
class FrameLog:
    """Largest size of the set ``A`` over one call of the level-``r`` construction."""

    simulator: int
    level: int
    max_a: int


@dataclass
class Tail:
    """Local ``beta . xi`` run of a covering simulator that built a full block."""

    simulator: int
    events: list[Event]
    output: Any


class _Terminated(Exception):
    def __init__(self, value: Any, pid: int) -> None:
        super().__init__(value)
        self.value = value
        self.pid = pid


class Engine:
    """State shared by all simulators of one run."""

    def __init__(self, setup: SimulationSetup) -> None:
        self.setup = setup
        self.protocol = setup.protocol
        self.aug = AugmentedSnapshot(setup.f, setup.m)
        init = setup.initial_configuration()
        self.states: dict[int, Hashable] = {pid: init.state(pid) for pid in range(1, setup.protocol.n + 1)}
        self.last_kind: dict[int, str | None] = {pid: None for pid in self.states}
        self.meta: dict[int, OpMeta] = {}
        self.revisions: list[RevisionRecord] = []
        self.frames: list[FrameLog] = []
        self.tails: dict[int, Tail] = {}
        self.outputs: dict[int, Any] = {}
        self.output_by: dict[int, int] = {}  # simulator -> simulated process whose output it took
        self.bu_count: dict[int, int] = {i: 0 for i in range(1, setup.f + 1)}
        self._open: dict[int, OpMeta] = {}

    # simulated-process bookkeeping -------------------------------------------

    def _action(self, pid: int):
        return self.protocol.next_step(self.states[pid])

    def _take(self, pid: int, step, response: Any) -> None:
        """Record that ``pid`` took ``step`` and got ``response``."""
        kind = "scan" if isinstance(step, Scan) else "update"
        prev = self.last_kind[pid]
        if prev == kind or (prev is None and kind == "update"):
            raise ProtocolMisbehavior(f"simulated process {pid}: {kind} after {prev or 'nothing'}")
        self.states[pid] = self.protocol.transition(self.states[pid], response)
        self.last_kind[pid] = kind

    def _expect_scan(self, pid: int) -> None:
        act = self._action(pid)
        if not isinstance(act, Scan):
            raise ProtocolMisbehavior(f"simulated process {pid} should be poised to scan, has {act!r}")

    def _post(self, i: int) -> None:
        """Freeze the stored states of ``P_i`` into the open operation's metadata."""
        meta = self._open.pop(i, None)
        if meta is not None:
            meta.post_states = {p: self.states[p] for p in self.setup.partition[i - 1]}

    # augmented operations ------------------------------------------------------

    def _scan(self, i: int) -> Step:
        """Simulate the Scan ``p_{i,1}`` is poised to take."""
        pid = self.setup.partition[i - 1][0]
        self._expect_scan(pid)
        self._post(i)
        view = yield from self.aug.scan(i)
        op = self.aug.last_op[i]
        self._take(pid, SCAN, view)
        self.meta[op] = self._open[i] = OpMeta(op, i, "scan", {0: pid})
        return view

    def _block_update(self, i: int, comps: Sequence[int], vals: Sequence[Any]) -> Step:
        """Simulate updates by ``p_{i,1..s}`` with one Block-Update."""
        procs = self.setup.partition[i - 1][:len(comps)]
        for pid, j, v in zip(procs, comps, vals):
            if self._action(pid) != Update(j, v):
                raise ProtocolMisbehavior(f"simulated process {pid} is not poised to write {v!r} to {j}")
        self._post(i)
        res = yield from self.aug.block_update(i, comps, vals)
        op = self.aug.last_op[i]
        self.bu_count[i] += 1
        for pid, j, v in zip(procs, comps, vals):
            self._take(pid, Update(j, v), None)
        self.meta[op] = self._open[i] = OpMeta(op, i, "block_update", dict(zip(comps, procs)))
        return res

    def _finish(self, i: int, value: Any, pid: int) -> Any:
        self._post(i)
        self.outputs[i] = value
        self.output_by[i] = pid
        return value

    # direct simulators -----------------------------------------------------------

    def run_direct(self, i: int) -> Generator:
        pid = self.setup.partition[i - 1][0]
        while True:
            yield from self._scan(i)
            act = self._action(pid)
            if isinstance(act, Output):
                return self._finish(i, act.value, pid)
            if not isinstance(act, Update):
                raise ProtocolMisbehavior(f"simulated process {pid} scanned twice in a row")
            yield from self._block_update(i, (act.component,), (act.value,))

    # covering simulators ---------------------------------------------------------

    def _revise(self, i: int, r: int, comps: tuple, view: tuple, source: int) -> tuple[int, Any]:
        """Locally run ``p_{i,r}`` solo from contents ``view`` until it leaves ``comps``."""
        pid = self.setup.partition[i - 1][r - 1]
        allowed = set(comps)
        contents = list(view)
        steps: list[Event] = []
        rec = RevisionRecord(i, pid, r, source, tuple(view), steps, self.aug.last_op[i], ())
        self.revisions.append(rec)
        while True:
            act = self._action(pid)
            if isinstance(act, Output):
                rec.outcome = ("output", act.value)
                raise _Terminated(act.value, pid)
            if isinstance(act, Update) and act.component not in allowed:
                rec.outcome = ("update", act.component, act.value)
                return act.component, act.value
            if len(steps) >= self.setup.local_budget:
                raise LocalSimBudgetExceeded(
                    f"revising process {pid} took more than {self.setup.local_budget} steps")
            if isinstance(act, Scan):
                resp = tuple(contents)
            else:
                contents[act.component - 1] = act.value
                resp = None
            self._take(pid, act, resp)
            steps.append(Event(pid, act, resp))

    def construct(self, i: int, r: int) -> Generator:
        """Build a block update by ``p_{i,1..r}`` to ``r`` distinct components."""
        first = self.setup.partition[i - 1][0]
        if r == 1:
            yield from self._scan(i)
            act = self._action(first)
            if isinstance(act, Update):
                return (act.component,), (act.value,)
            if isinstance(act, Output):
                raise _Terminated(act.value, first)
            raise ProtocolMisbehavior(f"simulated process {first} scanned twice in a row")
        found: dict[frozenset, tuple[tuple, int]] = {}
        frame = FrameLog(i, r, 0)
        self.frames.append(frame)
        while True:
            comps, vals = yield from self.construct(i, r - 1)
            key = frozenset(comps)
            if key in found:
                view, source = found[key]
                j, v = self._revise(i, r, comps, view, source)
                return comps + (j,), vals + (v,)
            res = yield from self._block_update(i, comps, vals)
            if res is not YIELD:
                found[key] = (res, self.aug.last_op[i])
                frame.max_a = max(frame.max_a, len(found))

    def run_covering(self, i: int) -> Generator:
        part = self.setup.partition[i - 1]
        try:
            comps, vals = yield from self.construct(i, self.setup.m)
        except _Terminated as stop:
            return self._finish(i, stop.value, stop.pid)
        # Local beta . xi on copies; the stored states stay as they are.
        states = {p: self.states[p] for p in part}
        contents = [None] * self.setup.m
        events: list[Event] = []
        for pid, j, v in zip(part, comps, vals):
            contents[j - 1] = v
            states[pid] = self.protocol.transition(states[pid], None)
            events.append(Event(pid, Update(j, v), None))
        first = part[0]
        expect = "scan"
        while True:
            act = self.protocol.next_step(states[first])
            if isinstance(act, Output):
                break
            if len(events) - len(comps) >= self.setup.local_budget:
                raise LocalSimBudgetExceeded(
                    f"solo run of process {first} took more than {self.setup.local_budget} steps")
            kind = "scan" if isinstance(act, Scan) else "update"
            if kind != expect:
                raise ProtocolMisbehavior(f"simulated process {first}: {kind} where a {expect} was due")
            expect = "update" if kind == "scan" else "scan"
            if isinstance(act, Scan):
                resp = tuple(contents)
            else:
                contents[act.component - 1] = act.value
                resp = None
            states[first] = self.protocol.transition(states[first], resp)
            events.append(Event(first, act, resp))
        self.tails[i] = Tail(i, events, act.value)
        return self._finish(i, act.value, first)

    def simulator(self, i: int) -> Generator:
        return self.run_covering(i) if self.setup.covering(i) else self.run_direct(i)


@dataclass
class SimulationRun:
    """Everything a finished (or budget-stopped) run produced."""

    setup: SimulationSetup
    engine: Engine
    seed: int
    steps: int
    completed: bool
    schedule: list[int]

    @property
    def trace(self):
        return self.engine.aug.trace

    @property
    def outputs(self) -> dict[int, Any]:
        return dict(self.engine.outputs)

    @property
    def revisions(self) -> list[RevisionRecord]:
        return self.engine.revisions

    def sw_steps(self) -> dict[int, int]:
        """Base steps taken by each simulator."""
        counts = {i: 0 for i in range(1, self.setup.f + 1)}
        for ev in self.trace.sw_events():
            counts[ev.pid] += 1
        return counts

    def final_states(self) -> dict[int, Hashable]:
        return dict(self.engine.states)


def simulate(setup: SimulationSetup, seed: int = 0, *, budget: int = 200_000,
             schedule: Sequence[int] | None = None) -> SimulationRun:
    """Run all simulators under a seeded random (or explicit) schedule.

    With an explicit ``schedule`` the listed simulators move in that order
    (entries for finished ones are skipped) and the run stops when the list
    ends.  ``budget`` caps the number of base steps either way.
    """
    eng = Engine(setup)
    world = World({i: eng.simulator(i) for i in range(1, setup.f + 1)}, context=eng)
    steps = 0
    if schedule is None:
        rng = random.Random(seed)
        while world.poised and steps < budget:
            live = world.live
            world.step(live[rng.randrange(len(live))] if len(live) > 1 else live[0])
            steps += 1
    else:
        for i in schedule:
            if steps >= budget:
                break
            if i in world.poised:
                world.step(i)
                steps += 1
    return SimulationRun(setup, eng, seed, steps, world.done, list(world.schedule))


def max_a_allowed(m: int, r: int) -> int:
    """Largest possible ``|A|`` at level ``r``: one entry per set of ``r-1`` components."""
    return math.comb(m, r - 1)
