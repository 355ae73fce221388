"""Nondeterministic solo-terminating machines and their deterministic refinement.

An :class:`NDMachine` lists, per state, the next step and the set of states
allowed after each response.  Every state also records the view ``E`` the
process expects its next scan to return if nobody else moves.  From that,
:func:`solo_path_table` finds, by breadth-first search, the length ``ℓ(s)``
of the shortest solo path to a final state when each response is the forced
one.  :func:`derive` keeps, for each state and response, one successor: the
first one that starts a shortest solo path, or else the first allowed one.
The result is deterministic, its executions are executions of the original,
and every solo run ends (checked by :func:`verify_of`).

:func:`aba_wrap` tags every written value with the writer and a sequence
number so that no component ever returns to an earlier value.
"""

from __future__ import annotations

import itertools
from collections import deque
from collections.abc import Callable, Hashable, Iterable
from dataclasses import dataclass, field
from typing import Any

from .codec import from_jsonable, to_jsonable
from .errors import BadMachine, BadParameters, NoSoloPath
from .model import (SCAN, Configuration, ExecutionRecord, Output, ProtocolSpec, Scan, Update, apply_step,
                    register_op)

WILDCARD = "*"
INF = float("inf")


def max_register_op(old: Any, value: Any) -> tuple[Any, Any]:
    """``writemax``: keep the larger value; ``None`` counts as minus infinity."""
    if old is None or value > old:
        return value, None
    return old, None


def fetch_and_increment_op(old: Any, _arg: Any) -> tuple[Any, Any]:
    """Add one and return the previous value (``None`` counts as 0)."""
    cur = 0 if old is None else old
    return cur + 1, cur


COMPONENT_OPS: dict[str, Callable[[Any, Any], tuple[Any, Any]]] = {
    "register": register_op,
    "max_register": max_register_op,
    "fetch_and_increment": fetch_and_increment_op,
}


@dataclass(frozen=True)
class NDMachine:
    """One process's nondeterministic machine over an ``m``-component object.

    ``states`` is the declared total order.  ``delta`` maps ``(state,
    response)`` to the allowed successors; the response :data:`WILDCARD`
    covers every response without its own entry.  ``E`` gives each state's
    expected view.
    """

    name: str
    m: int
    states: tuple
    initial: dict
    final: dict
    nu: dict
    delta: dict
    E: dict
    op: str = "register"
    order: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", {s: k for k, s in enumerate(self.states)})
        if len(self.order) != len(self.states):
            raise BadMachine(f"{self.name}: repeated state names")
        if self.op not in COMPONENT_OPS:
            raise BadMachine(f"{self.name}: unknown component kind {self.op!r}")
        known = self.order
        for s in itertools.chain(self.initial.values(), self.final, self.nu, self.E):
            if s not in known:
                raise BadMachine(f"{self.name}: unknown state {s!r}")
        for s in self.states:
            if s not in self.final and s not in self.nu:
                raise BadMachine(f"{self.name}: non-final state {s!r} has no next step")
            if s in self.final and s in self.nu:
                raise BadMachine(f"{self.name}: final state {s!r} has a next step")
            if s not in self.E or len(self.E[s]) != self.m:
                raise BadMachine(f"{self.name}: state {s!r} lacks an expected view of length {self.m}")
        for (s, _a), succ in self.delta.items():
            if s not in known or s in self.final:
                raise BadMachine(f"{self.name}: transition from {s!r}")
            if not succ or any(t not in known for t in succ):
                raise BadMachine(f"{self.name}: transition from {s!r} has an empty or unknown target set")
        for s, step in self.nu.items():
            if isinstance(step, Update) and not 1 <= step.component <= self.m:
                raise BadMachine(f"{self.name}: state {s!r} touches component {step.component}")

    @property
    def component_op(self) -> Callable[[Any, Any], tuple[Any, Any]]:
        return COMPONENT_OPS[self.op]

    def successors(self, s: Hashable, a: Any) -> tuple:
        """``δ(s, a)`` in declared state order."""
        succ = self.delta.get((s, a))
        if succ is None:
            succ = self.delta.get((s, WILDCARD))
        if succ is None:
            raise BadMachine(f"{self.name}: no transition from {s!r} on response {a!r}")
        return tuple(sorted(succ, key=self.order.__getitem__))

    def first(self, states: Iterable[Hashable]) -> Hashable:
        return min(states, key=self.order.__getitem__)


def simulate_on_view(view: tuple, step: Scan | Update, op: Callable[[Any, Any], tuple[Any, Any]]) -> tuple[tuple, Any]:
    """Apply ``step`` to a local copy of the object; returns ``(new view, response)``."""
    if isinstance(step, Scan):
        return view, view
    j = step.component - 1
    new, resp = op(view[j], step.value)
    return view[:j] + (new,) + view[j + 1:], resp


def forced_response(machine: NDMachine, s: Hashable) -> Any:
    """Response to ``ν(s)`` if nobody moved since the last scan."""
    if s in machine.final:
        raise BadMachine(f"{machine.name}: final state {s!r} takes no step")
    return simulate_on_view(tuple(machine.E[s]), machine.nu[s], machine.component_op)[1]


@dataclass
class SoloPathInfo:
    """``ell[s]`` is the shortest solo path length (``inf`` if none); ``choice`` the kept successors."""

    ell: dict
    choice: dict  # (state, forced response) -> successor on a shortest path

    def unreachable(self) -> list:
        return [s for s, v in self.ell.items() if v == INF]


def solo_path_table(machine: NDMachine) -> SoloPathInfo:
    forced = {s: forced_response(machine, s) for s in machine.nu}
    preds: dict[Hashable, list[Hashable]] = {s: [] for s in machine.states}
    succs: dict[Hashable, tuple] = {}
    for s, a in forced.items():
        succs[s] = machine.successors(s, a)
        for t in succs[s]:
            preds[t].append(s)
    ell: dict[Hashable, float] = {s: INF for s in machine.states}
    queue = deque()
    for s in machine.final:
        ell[s] = 0
        queue.append(s)
    while queue:
        t = queue.popleft()
        for s in preds[t]:
            if ell[s] == INF:
                ell[s] = ell[t] + 1
                queue.append(s)
    choice = {}
    for s, a in forced.items():
        if ell[s] < INF:
            choice[(s, a)] = next(t for t in succs[s] if ell[t] == ell[s] - 1)
    return SoloPathInfo(ell, choice)


@dataclass(frozen=True)
class DetMachine:
    """``machine`` with the single successor ``delta(s, a)`` in place of ``δ``."""

    machine: NDMachine
    info: SoloPathInfo

    def delta(self, s: Hashable, a: Any) -> Hashable:
        key = (s, a)
        if key in self.info.choice:
            return self.info.choice[key]
        return self.machine.successors(s, a)[0]

    def table(self) -> dict:
        """``δ′`` on every explicitly listed pair and every forced pair."""
        keys = set(self.info.choice) | {k for k in self.machine.delta if k[1] != WILDCARD}
        return {k: self.delta(*k) for k in sorted(keys, key=lambda k: (self.machine.order[k[0]], repr(k[1])))}


def derive(machine: NDMachine) -> DetMachine:
    return DetMachine(machine, solo_path_table(machine))


def subset_violations(det: DetMachine, extra: Iterable[tuple] = ()) -> list[str]:
    """Pairs where ``δ′(s, a)`` is not in ``δ(s, a)``."""
    bad = []
    for (s, a) in itertools.chain(det.table(), extra):
        if det.delta(s, a) not in det.machine.successors(s, a):
            bad.append(f"δ′({s!r}, {a!r}) not allowed by δ")
    return bad


# ---------------------------------------------------------------------------
# protocols built from machines


@dataclass(frozen=True)
class MachineProtocol:
    """``n`` processes, process ``p`` running ``machines[p-1]``."""

    name: str
    machines: tuple

    def __post_init__(self) -> None:
        if not self.machines:
            raise BadMachine("no machines")
        kinds = {(mc.m, mc.op) for mc in self.machines}
        if len(kinds) != 1:
            raise BadMachine("machines disagree on the object")

    @property
    def n(self) -> int:
        return len(self.machines)

    @property
    def m(self) -> int:
        return self.machines[0].m

    @property
    def op(self) -> str:
        return self.machines[0].op

    def input_vectors(self) -> list[tuple]:
        return list(itertools.product(*[tuple(mc.initial) for mc in self.machines]))


def det_protocol(proto: MachineProtocol, dets: tuple[DetMachine, ...]) -> ProtocolSpec:
    """Executable form of the derived machines; states are ``(pid, machine state)``."""

    def init(pid: int, x: Any):
        return (pid, proto.machines[pid - 1].initial[x])

    def nxt(st):
        pid, s = st
        mc = proto.machines[pid - 1]
        if s in mc.final:
            return Output(mc.final[s])
        return mc.nu[s]

    def trans(st, resp):
        pid, s = st
        return (pid, dets[pid - 1].delta(s, resp))

    initial_values = (0,) * proto.m if proto.op == "fetch_and_increment" else None
    return ProtocolSpec(f"derived({proto.name})", proto.n, proto.m, init, nxt, trans,
                        initial_values=initial_values, component_op=COMPONENT_OPS[proto.op])


@dataclass
class OFReport:
    ok: bool
    configurations: int
    solo_runs: int
    max_solo: int
    violations: list[str]

    def summary(self) -> dict:
        return {"ok": self.ok, "configurations": self.configurations, "solo_runs": self.solo_runs,
                "max_solo": self.max_solo, "violations": len(self.violations),
                "first": self.violations[0] if self.violations else None}


def verify_of(proto: MachineProtocol, dets: tuple[DetMachine, ...] | None = None, depth: int = 10,
              slack: int = 1000) -> OFReport:
    """Explore reachable configurations and run every process solo from each.

    A solo run must end within (steps up to and including its first scan)
    plus ``ℓ`` of the state right after that scan, and ``ℓ`` must drop by
    exactly one on each later step.  ``slack`` caps runs that would not end.
    """
    dets = dets if dets is not None else tuple(derive(mc) for mc in proto.machines)
    spec = det_protocol(proto, dets)
    bad: list[str] = []
    seen: set[Configuration] = set()
    for inputs in proto.input_vectors():
        start = Configuration.initial(spec, inputs)
        level = [start]
        seen.add(start)
        for _ in range(depth):
            nxt = []
            for cfg in level:
                for p in range(1, spec.n + 1):
                    if cfg.has_output(p, spec):
                        continue
                    c2, _ = apply_step(cfg, p, spec)
                    if c2 not in seen:
                        seen.add(c2)
                        nxt.append(c2)
            level = nxt
    runs = 0
    longest = 0
    for cfg in seen:
        for p in range(1, spec.n + 1):
            if cfg.has_output(p, spec):
                continue
            runs += 1
            mc, det = proto.machines[p - 1], dets[p - 1]
            c = cfg
            steps = 0
            after_scan: int | None = None
            budget = None
            while not c.has_output(p, spec):
                if budget is not None and steps >= budget:
                    bad.append(f"process {p} from a reachable configuration overruns its bound {budget}")
                    break
                if steps >= slack:
                    bad.append(f"process {p} runs solo for {slack} steps without output")
                    break
                was_scan = isinstance(c.action(p, spec), Scan)
                before = det.info.ell.get(c.state(p)[1], INF) if after_scan is not None else None
                c, _ = apply_step(c, p, spec)
                steps += 1
                s = c.state(p)[1]
                ell = det.info.ell[s]
                if after_scan is None and was_scan:
                    after_scan = steps
                    if ell == INF:
                        bad.append(f"process {p} reaches {s!r} after a scan with no solo path")
                        break
                    budget = steps + int(ell)
                elif before is not None and ell != before - 1:
                    bad.append(f"ℓ goes from {before} to {ell} at {s!r}")
            longest = max(longest, steps)
    bad += subset_violations_all(dets)
    return OFReport(not bad, len(seen), runs, longest, bad)


def subset_violations_all(dets: Iterable[DetMachine]) -> list[str]:
    out = []
    for det in dets:
        out += subset_violations(det)
    return out


def require_ndst(machine: NDMachine, reachable_states: Iterable[Hashable]) -> None:
    """Raise :class:`NoSoloPath` if a given state has no solo path."""
    info = solo_path_table(machine)
    for s in reachable_states:
        if info.ell[s] == INF:
            raise NoSoloPath(f"{machine.name}: state {s!r} has no solo path")


# ---------------------------------------------------------------------------
# bundled toy machine


def toy_machine() -> NDMachine:
    """Binary preference on one register, with a nondeterministic rewrite loop.

    ``S{p}{e}`` scans (preference ``p``, expected content ``e`` with ``_`` for
    empty), ``W{p}{e}`` writes ``p``, ``D{v}`` has decided ``v``.  Seeing its own
    preference a process may decide *or* write again, so the machine has
    solo runs that never end; seeing the other value it may adopt it or keep
    its own.  Every state has a terminating solo path.
    """
    vals = {"_": None, "0": 0, "1": 1}
    states: list[str] = []
    nu: dict = {}
    E: dict = {}
    delta: dict = {}
    final = {"D0": 0, "D1": 1}
    for kind in "SW":
        for p in "01":
            for e in "_01":
                s = f"{kind}{p}{e}"
                states.append(s)
                E[s] = (vals[e],)
                nu[s] = SCAN if kind == "S" else Update(1, int(p))
    states += ["D0", "D1"]
    for s in final:
        E[s] = (int(s[1]),)
    for p in "01":
        q = "1" if p == "0" else "0"
        for e in "_01":
            delta[(f"S{p}{e}", (None,))] = (f"W{p}_",)
            delta[(f"S{p}{e}", (int(p),))] = (f"W{p}{p}", f"D{p}")
            delta[(f"S{p}{e}", (int(q),))] = (f"W{q}{q}", f"W{p}{q}")
            delta[(f"W{p}{e}", None)] = (f"S{p}{p}",)
    return NDMachine("toy", 1, tuple(states), {0: "S0_", 1: "S1_"}, final, nu, delta, E)


def toy_protocol() -> MachineProtocol:
    mc = toy_machine()
    return MachineProtocol("toy", (mc, mc))


def looping_machine() -> NDMachine:
    """Negative control: after its first write the only move is to write again."""
    states = ("A", "B", "C", "D")
    nu = {"A": SCAN, "B": Update(1, 1), "C": SCAN}
    delta = {("A", WILDCARD): ("B",), ("B", None): ("C",), ("C", WILDCARD): ("B",)}
    E = {"A": (None,), "B": (None,), "C": (1,), "D": (1,)}
    return NDMachine("loop", 1, states, {0: "A"}, {"D": 0}, nu, delta, E)


# ---------------------------------------------------------------------------
# text form


def machine_to_dict(mc: NDMachine) -> dict:
    def step(st):
        return ["scan"] if isinstance(st, Scan) else ["update", st.component, to_jsonable(st.value)]

    return {
        "name": mc.name, "m": mc.m, "op": mc.op, "states": list(mc.states),
        "initial": [[to_jsonable(x), s] for x, s in mc.initial.items()],
        "final": [[s, to_jsonable(y)] for s, y in mc.final.items()],
        "nu": [[s, step(st)] for s, st in mc.nu.items()],
        "E": [[s, to_jsonable(v)] for s, v in mc.E.items()],
        "delta": [[s, a if a == WILDCARD else to_jsonable(a), list(t)] for (s, a), t in mc.delta.items()],
    }


def machine_from_dict(d: dict) -> NDMachine:
    try:
        def step(raw):
            if raw[0] == "scan":
                return SCAN
            if raw[0] == "update":
                return Update(int(raw[1]), from_jsonable(raw[2]))
            raise BadMachine(f"unknown step {raw!r}")

        return NDMachine(
            d["name"], int(d["m"]), tuple(d["states"]),
            {from_jsonable(x): s for x, s in d["initial"]},
            {s: from_jsonable(y) for s, y in d["final"]},
            {s: step(raw) for s, raw in d["nu"]},
            {(s, a if a == WILDCARD else from_jsonable(a)): tuple(t) for s, a, t in d["delta"]},
            {s: tuple(from_jsonable(v)) for s, v in d["E"]},
            d.get("op", "register"),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise BadMachine(f"malformed machine description: {exc}") from exc


def det_to_dict(det: DetMachine) -> dict:
    out = machine_to_dict(det.machine)
    out["name"] = f"derived({det.machine.name})"
    out["delta"] = [[s, to_jsonable(a), [t]] for (s, a), t in det.table().items()]
    out["ell"] = [[s, None if v == INF else int(v)] for s, v in det.info.ell.items()]
    return out


# ---------------------------------------------------------------------------
# ABA-free wrapper


@dataclass(frozen=True)
class Tagged:
    """A written value plus who wrote it and their write counter."""

    value: Any
    writer: int
    seq: int


def _strip(view: tuple) -> tuple:
    return tuple(c.value if isinstance(c, Tagged) else c for c in view)


def aba_wrap(protocol: ProtocolSpec) -> ProtocolSpec:
    """Tag every write with ``(writer, seq)``; scans see the untagged values."""
    if not protocol.uses_registers:
        raise BadParameters("aba_wrap needs register components")

    def init(pid: int, x: Any):
        return (pid, 0, protocol.initial_state(pid, x))

    def nxt(st):
        pid, seq, inner = st
        act = protocol.next_step(inner)
        if isinstance(act, Update):
            return Update(act.component, Tagged(act.value, pid, seq + 1))
        return act

    def trans(st, resp):
        pid, seq, inner = st
        if isinstance(protocol.next_step(inner), Update):
            return (pid, seq + 1, protocol.transition(inner, resp))
        return (pid, seq, protocol.transition(inner, _strip(resp)))

    return ProtocolSpec(f"aba({protocol.name})", protocol.n, protocol.m, init, nxt, trans,
                        initial_values=protocol.initial_values)


def aba_violations(record: ExecutionRecord, m: int) -> list[tuple[int, int]]:
    """``(component, event index)`` where a component returns to an earlier, different-since value."""
    bad = []
    history: list[list[Any]] = [[v] for v in record.initial.contents]
    for idx, ev in enumerate(record.events):
        if not isinstance(ev.step, Update):
            continue
        j = ev.step.component - 1
        cur = history[j][-1]
        new = ev.step.value
        if new == cur:
            continue
        if new in history[j]:
            bad.append((j + 1, idx))
        history[j].append(new)
    return bad
