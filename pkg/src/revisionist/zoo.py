"""Small protocols to feed the simulation engine.

* :func:`of_consensus` - obstruction-free consensus with racing counters on
  ``n`` single-writer components.
* :func:`kset_of` - k-set agreement: ``k-1`` processes decide their own
  input, the rest run racing-counter consensus on ``n-k+1`` components.
* :func:`eps_agreement` - approximate agreement by bisection rounds.
* :func:`starved_consensus` - "consensus" on too few registers; wait-free but
  breaks agreement under contention.
* :func:`contention_livelock` - obstruction-free on one register, but two
  processes can starve each other forever.

The algorithms are small constructions chosen for testability; their
properties are checked empirically by the test-suite.
"""

from __future__ import annotations

import inspect
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

from .errors import BadN, BadParameters
from .model import SCAN, ColorlessTask, Output, ProtocolSpec, Update


@dataclass(frozen=True)
class ZooEntry:
    name: str
    params: dict
    spec: ProtocolSpec
    task: ColorlessTask
    claims: tuple[str, ...] = field(default=())

    def describe(self) -> dict:
        return {"name": self.name, "params": self.params, "n": self.spec.n, "m": self.spec.m,
                "task": str(self.task), "claims": list(self.claims)}


# ---------------------------------------------------------------------------
# racing counters


@dataclass(frozen=True)
class RaceState:
    """A racer: ``counts`` is what it last wrote (or will write) to its component."""

    pid: int
    x: Any
    comp: int | None  # own component; None for processes that decide at once
    margin: int
    phase: str = "scan"  # "scan", "update" or "done"
    counts: tuple = ()
    out: Any = None


def _totals(view: tuple) -> dict:
    tot: dict = {}
    for cell in view:
        if cell is None:
            continue
        for v, c in cell:
            tot[v] = tot.get(v, 0) + c
    return tot


def _race_next(s: RaceState):
    if s.phase == "done":
        return Output(s.out)
    if s.phase == "scan":
        return SCAN
    return Update(s.comp, s.counts)


def _race_transition(s: RaceState, resp: Any) -> RaceState:
    if s.phase == "update":
        return RaceState(s.pid, s.x, s.comp, s.margin, "scan", s.counts)
    if s.comp is None:
        return RaceState(s.pid, s.x, s.comp, s.margin, "done", out=s.x)
    tot = _totals(resp)
    if not tot:
        leader = s.x
    else:
        leader = min(tot, key=lambda v: (-tot[v], v))
    lead = tot.get(leader, 0)
    rival = max((c for v, c in tot.items() if v != leader), default=0)
    if lead >= rival + s.margin:
        return RaceState(s.pid, s.x, s.comp, s.margin, "done", s.counts, leader)
    mine = dict(s.counts)
    mine[leader] = mine.get(leader, 0) + 1
    return RaceState(s.pid, s.x, s.comp, s.margin, "update", tuple(sorted(mine.items())))


def _racing_spec(name: str, n: int, first_racer: int) -> ProtocolSpec:
    m = n - first_racer + 1
    margin = m

    def init(pid: int, x: Any) -> RaceState:
        comp = pid - first_racer + 1 if pid >= first_racer else None
        return RaceState(pid, x, comp, margin)

    return ProtocolSpec(name, n, m, init, _race_next, _race_transition)


def of_consensus(n: int) -> ZooEntry:
    """Obstruction-free consensus for ``n`` processes on ``n`` components.

    Process ``p`` owns component ``p`` and keeps there a count per value.  It
    scans, finds the leading value (largest total, ties to the smaller value)
    and decides it once the lead over every other value is at least ``n``;
    otherwise it adds one to its own count for the leader.  A deciding scan
    sees a lead of ``n`` and at most ``n-1`` stale increments can follow, so
    the leader never changes afterwards.
    """
    if not isinstance(n, int) or n < 1:
        raise BadN(f"of_consensus needs n >= 1, got {n!r}")
    spec = _racing_spec(f"of_consensus(n={n})", n, 1)
    return ZooEntry("of_consensus", {"n": n}, spec, ColorlessTask.consensus(), ("OF",))


def kset_of(n: int, k: int) -> ZooEntry:
    """k-set agreement on ``n-k+1`` components.

    Processes ``1..k-1`` output their input after one scan.  Processes
    ``k..n`` run racing-counter consensus, so at most one more value appears.
    """
    if not (isinstance(n, int) and isinstance(k, int) and 1 <= k < n):
        raise BadParameters(f"kset_of needs 1 <= k < n, got n={n!r}, k={k!r}")
    spec = _racing_spec(f"kset_of(n={n},k={k})", n, k)
    return ZooEntry("kset_of", {"n": n, "k": k}, spec, ColorlessTask.kset(k), ("OF",))


# ---------------------------------------------------------------------------
# approximate agreement


@dataclass(frozen=True)
class EpsState:
    pid: int
    rounds: int
    r: int
    x: float
    phase: str = "scan"
    hist: tuple = ()  # own component: ((round, value), ...)
    out: float | None = None


def _eps_next(s: EpsState):
    if s.phase == "done":
        return Output(s.out)
    if s.phase == "scan":
        return SCAN
    return Update(s.pid, s.hist)


def _eps_transition(s: EpsState, resp: Any) -> EpsState:
    if s.phase == "update":
        return EpsState(s.pid, s.rounds, s.r, s.x, "scan", s.hist)
    cells = [dict(c) if c is not None else {} for c in resp]
    top = max((max(c) for c in cells if c), default=-1)
    if top > s.r:
        x = next(c[top] for c in cells if top in c)
        return EpsState(s.pid, s.rounds, top, x, "update", s.hist + ((top, x),))
    if s.r in cells[s.pid - 1]:
        seen = [c[s.r] for c in cells if s.r in c]
        mid = (min(seen) + max(seen)) / 2
        if s.r + 1 >= s.rounds:
            return EpsState(s.pid, s.rounds, s.r, mid, "done", s.hist, mid)
        return EpsState(s.pid, s.rounds, s.r + 1, mid, "update", s.hist + ((s.r + 1, mid),))
    return EpsState(s.pid, s.rounds, s.r, s.x, "update", s.hist + ((s.r, s.x),))


def eps_agreement(n: int, eps: float) -> ZooEntry:
    """ε-agreement for inputs spread at most 1, one component per process.

    A process writes ``(round, value)`` pairs to its own component.  After
    its round-``r`` value is visible it moves to the midpoint of all round-``r``
    values it sees; seeing a higher round it copies a value of that round.
    Snapshots of one round are nested, so each round halves the spread, and
    ``ceil(log2(1/ε))`` rounds suffice.
    """
    if not (isinstance(n, int) and n >= 1):
        raise BadParameters(f"eps_agreement needs n >= 1, got {n!r}")
    if not (isinstance(eps, (int, float)) and 0 < eps < 1):
        raise BadParameters(f"eps_agreement needs 0 < eps < 1, got {eps!r}")
    rounds = max(1, math.ceil(math.log2(1 / eps)))

    def init(pid: int, x: Any) -> EpsState:
        return EpsState(pid, rounds, 0, float(x))

    spec = ProtocolSpec(f"eps_agreement(n={n},eps={eps})", n, n, init, _eps_next, _eps_transition)
    return ZooEntry("eps_agreement", {"n": n, "eps": eps}, spec, ColorlessTask.eps_agreement(eps), ("OF",))


# ---------------------------------------------------------------------------
# deliberately broken protocols


@dataclass(frozen=True)
class SimpleState:
    pid: int
    x: Any
    phase: str = "scan"
    target: int | None = None
    out: Any = None


def starved_consensus(m: int = 1, n: int = 2) -> ZooEntry:
    """Consensus attempt on ``m < n`` registers.

    Scan.  While some component is empty, write the own input to the first
    empty one and scan again; once all are full, decide the last component.
    Every process finishes within ``2m+1`` steps, so it is wait-free, but two
    processes that both see an empty register can decide differently.
    """
    if not (isinstance(m, int) and isinstance(n, int) and 1 <= m and n >= 2):
        raise BadParameters(f"starved_consensus needs m >= 1 and n >= 2, got m={m!r}, n={n!r}")

    def init(pid: int, x: Any) -> SimpleState:
        return SimpleState(pid, x)

    def nxt(s: SimpleState):
        if s.phase == "done":
            return Output(s.out)
        if s.phase == "scan":
            return SCAN
        return Update(s.target, s.x)

    def trans(s: SimpleState, resp: Any) -> SimpleState:
        if s.phase == "update":
            return SimpleState(s.pid, s.x)
        empty = [j for j, c in enumerate(resp, start=1) if c is None]
        if empty:
            return SimpleState(s.pid, s.x, "update", empty[0])
        return SimpleState(s.pid, s.x, "done", out=resp[-1])

    spec = ProtocolSpec(f"starved_consensus(m={m},n={n})", n, m, init, nxt, trans)
    return ZooEntry("starved_consensus", {"m": m, "n": n}, spec, ColorlessTask.consensus(),
                    ("OF", "wait-free", "known-buggy"))


def contention_livelock(n: int = 2) -> ZooEntry:
    """One register: scan, decide if it holds ``(me, x)``, otherwise write ``(me, x)``.

    A solo process decides after three steps, but two processes that keep
    overwriting each other between their own write and scan never finish.
    """
    if not (isinstance(n, int) and n >= 1):
        raise BadParameters(f"contention_livelock needs n >= 1, got {n!r}")

    def init(pid: int, x: Any) -> SimpleState:
        return SimpleState(pid, x)

    def nxt(s: SimpleState):
        if s.phase == "done":
            return Output(s.out)
        if s.phase == "scan":
            return SCAN
        return Update(1, (s.pid, s.x))

    def trans(s: SimpleState, resp: Any) -> SimpleState:
        if s.phase == "update":
            return SimpleState(s.pid, s.x)
        if resp[0] == (s.pid, s.x):
            return SimpleState(s.pid, s.x, "done", out=s.x)
        return SimpleState(s.pid, s.x, "update")

    spec = ProtocolSpec(f"contention_livelock(n={n})", n, 1, init, nxt, trans)
    return ZooEntry("contention_livelock", {"n": n}, spec, ColorlessTask.consensus(),
                    ("OF", "known-buggy"))


REGISTRY: dict[str, Callable[..., ZooEntry]] = {
    "of_consensus": of_consensus,
    "kset_of": kset_of,
    "eps_agreement": eps_agreement,
    "starved_consensus": starved_consensus,
    "contention_livelock": contention_livelock,
}


def make(name: str, **params: Any) -> ZooEntry:
    """Build a registered protocol; parameters that do not apply are dropped."""
    try:
        ctor = REGISTRY[name]
    except KeyError:
        raise BadParameters(f"unknown protocol {name!r}; known: {', '.join(sorted(REGISTRY))}") from None
    accepted = inspect.signature(ctor).parameters
    return ctor(**{k: v for k, v in params.items() if k in accepted and v is not None})
