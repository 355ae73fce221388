"""Event log of an augmented-snapshot world.

A :class:`Trace` interleaves base-object events (``sw_update``/``sw_scan``)
with invocation and response events of augmented operations.  All events
share one sequence counter, so "A responded before B was invoked" is a plain
integer comparison.

Traces serialize to JSON lines.  Scan results and helping payloads are
written as per-component history lengths plus a digest; loading a trace
replays the base events on a fresh object to rebuild them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

from .codec import digest, from_jsonable, to_jsonable
from .errors import MalformedTrace
from .swsnap import LTriple, ScanResultH, SingleWriterSnapshot, UpdateTriple


class _YieldSymbol:
    """The yield sentinel returned by non-atomic Block-Updates."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "YIELD"

    def __reduce__(self):
        return (_YieldSymbol, ())


YIELD = _YieldSymbol()


@dataclass(frozen=True)
class SWEvent:
    seq: int
    kind: str  # "update" or "scan"
    pid: int
    op: int | None
    appended: tuple = ()
    result: ScanResultH | None = None

    @property
    def x_stamps(self) -> tuple:
        """Timestamps of update triples appended by this event (empty for help-only writes)."""
        return tuple(t.timestamp for t in self.appended if isinstance(t, UpdateTriple))


@dataclass(frozen=True)
class Invoke:
    seq: int
    op: int
    pid: int
    kind: str  # "scan" or "block_update"
    components: tuple = ()
    values: tuple = ()


@dataclass(frozen=True)
class Respond:
    seq: int
    op: int
    pid: int
    result: Any  # a view tuple or YIELD
    last: ScanResultH | None = None
    source: int | None = None  # seq of the sw_scan that produced ``last``


@dataclass
class OpRecord:
    """Everything the trace says about one augmented operation."""

    op: int
    pid: int
    kind: str
    components: tuple
    values: tuple
    inv: int
    res: int | None = None
    result: Any = None
    last: ScanResultH | None = None
    source: int | None = None
    steps: list[int] = field(default_factory=list)
    x: int | None = None  # seq of the appending sw_update of a Block-Update
    timestamp: tuple | None = None

    @property
    def complete(self) -> bool:
        return self.res is not None

    @property
    def yielded(self) -> bool:
        return self.res is not None and self.result is YIELD

    @property
    def atomic(self) -> bool:
        return self.kind == "block_update" and self.res is not None and self.result is not YIELD


class Trace:
    """Append-only event stream of one world."""

    def __init__(self, f: int, m: int) -> None:
        self.f = f
        self.m = m
        self.events: list[SWEvent | Invoke | Respond] = []
        self._ops: dict[int, OpRecord] | None = None

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator:
        return iter(self.events)

    # recording --------------------------------------------------------------

    def record_sw(self, kind: str, pid: int, op: int | None, appended: tuple, result: ScanResultH | None) -> None:
        self.events.append(SWEvent(len(self.events), kind, pid, op, appended, result))
        self._ops = None

    def invoke(self, op: int, pid: int, kind: str, components: tuple = (), values: tuple = ()) -> None:
        self.events.append(Invoke(len(self.events), op, pid, kind, components, values))
        self._ops = None

    def respond(self, op: int, pid: int, result: Any, last: ScanResultH | None = None,
                source: int | None = None) -> None:
        self.events.append(Respond(len(self.events), op, pid, result, last, source))
        self._ops = None

    # derived views ----------------------------------------------------------

    def sw_events(self) -> list[SWEvent]:
        return [e for e in self.events if isinstance(e, SWEvent)]

    def ops(self) -> dict[int, OpRecord]:
        """Per-operation summary, validated for sane nesting."""
        if self._ops is not None:
            return self._ops
        ops: dict[int, OpRecord] = {}
        running: dict[int, int] = {}  # pid -> op currently open
        for ev in self.events:
            if isinstance(ev, Invoke):
                if ev.op in ops:
                    raise MalformedTrace(f"operation {ev.op} invoked twice")
                if ev.pid in running:
                    raise MalformedTrace(f"q_{ev.pid} invoked op {ev.op} while op {running[ev.pid]} is open")
                ops[ev.op] = OpRecord(ev.op, ev.pid, ev.kind, ev.components, ev.values, ev.seq)
                running[ev.pid] = ev.op
            elif isinstance(ev, Respond):
                rec = ops.get(ev.op)
                if rec is None or running.get(ev.pid) != ev.op:
                    raise MalformedTrace(f"response to op {ev.op} that is not open")
                rec.res, rec.result, rec.last, rec.source = ev.seq, ev.result, ev.last, ev.source
                del running[ev.pid]
            else:
                if ev.op is None:
                    continue
                rec = ops.get(ev.op)
                if rec is None or running.get(ev.pid) != ev.op:
                    raise MalformedTrace(f"base step seq={ev.seq} outside its operation")
                rec.steps.append(ev.seq)
                stamps = ev.x_stamps
                if stamps:
                    if rec.x is not None:
                        raise MalformedTrace(f"op {ev.op} appended update triples twice")
                    rec.x = ev.seq
                    rec.timestamp = stamps[0]
        self._ops = ops
        return ops

    # serialization ----------------------------------------------------------

    def to_records(self) -> list[dict]:
        out: list[dict] = [{"type": "trace", "f": self.f, "m": self.m}]
        for ev in self.events:
            if isinstance(ev, SWEvent):
                rec = {"seq": ev.seq, "type": f"sw_{ev.kind}", "pid": ev.pid, "op": ev.op}
                if ev.kind == "update":
                    rec["updates"] = [[t.component, to_jsonable(t.value), list(t.timestamp)]
                                      for t in ev.appended if isinstance(t, UpdateTriple)]
                    rec["helps"] = [[t.target, t.index, list(t.payload.lengths)]
                                    for t in ev.appended if isinstance(t, LTriple)]
                    rec["digest"] = digest(rec["updates"] + rec["helps"])
                else:
                    rec["lengths"] = list(ev.result.lengths)
                    rec["help_lengths"] = [len(h) for h in ev.result.helps]
                    rec["digest"] = digest(ev.result.updates)
            elif isinstance(ev, Invoke):
                rec = {"seq": ev.seq, "type": "invoke", "op": ev.op, "pid": ev.pid, "kind": ev.kind,
                       "components": list(ev.components), "values": to_jsonable(ev.values)}
            else:
                rec = {"seq": ev.seq, "type": "respond", "op": ev.op, "pid": ev.pid,
                       "result": "YIELD" if ev.result is YIELD else to_jsonable(ev.result),
                       "last": None if ev.last is None else list(ev.last.lengths),
                       "source": ev.source,
                       "digest": digest("YIELD" if ev.result is YIELD else ev.result)}
            out.append(rec)
        return out

    @classmethod
    def from_records(cls, records: list[dict]) -> Trace:
        if not records or records[0].get("type") != "trace":
            raise MalformedTrace("missing trace header")
        head = records[0]
        tr = cls(head["f"], head["m"])
        H = SingleWriterSnapshot(tr.f, recorder=tr)
        for i, rec in enumerate(records[1:]):
            if rec.get("seq") != i:
                raise MalformedTrace(f"sequence gap at record {i}")
            typ = rec.get("type")
            try:
                if typ == "sw_update":
                    items: list = [UpdateTriple(c, from_jsonable(v), tuple(t)) for c, v, t in rec["updates"]]
                    items += [LTriple(tg, ix, H.prefix(lens)) for tg, ix, lens in rec["helps"]]
                    H.update(rec["pid"], items, op=rec["op"])
                elif typ == "sw_scan":
                    res = H.scan(rec["pid"], op=rec["op"])
                    if list(res.lengths) != rec["lengths"] or digest(res.updates) != rec["digest"]:
                        raise MalformedTrace(f"scan at seq {i} does not replay")
                elif typ == "invoke":
                    tr.invoke(rec["op"], rec["pid"], rec["kind"], tuple(rec["components"]),
                              from_jsonable(rec["values"]))
                elif typ == "respond":
                    result = YIELD if rec["result"] == "YIELD" else from_jsonable(rec["result"])
                    last = None if rec["last"] is None else H.prefix(rec["last"])
                    tr.respond(rec["op"], rec["pid"], result, last, rec.get("source"))
                else:
                    raise MalformedTrace(f"unknown record type {typ!r}")
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedTrace(f"bad record at seq {i}: {exc}") from exc
        tr.ops()
        return tr
