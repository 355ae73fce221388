"""Linearization points and correctness checks for augmented-snapshot traces.

:func:`assign_points` turns a trace into a :class:`LinHistory` using fixed
rules: a Scan takes effect at its last base scan, and an Update to component
``j`` with timestamp ``t`` takes effect at the first base event after which
``H`` holds a triple for ``j`` whose timestamp is at least ``t``.  The
``check_*`` functions then test the resulting history, and
:func:`brute_force_linearizable` searches all orders independently of those
rules for tiny traces.
"""

from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any

from .errors import MalformedTrace, TooLarge
from .trace import YIELD, OpRecord, SWEvent, Trace


@dataclass(frozen=True)
class LinOp:
    """One abstract operation of the augmented object at its linearization point."""

    kind: str  # "scan" or "update"
    op: int  # id of the augmented operation it belongs to
    pid: int
    point: int  # seq of the base event it is linearized at
    component: int | None = None
    value: Any = None
    timestamp: tuple | None = None
    view: tuple | None = None


@dataclass(frozen=True)
class WindowRecord:
    """Window of an atomic Block-Update: just after scan ``start`` up to append ``end``."""

    op: int
    start: int
    end: int


@dataclass
class LinHistory:
    ops: list[LinOp]
    records: dict[int, OpRecord]
    windows: dict[int, WindowRecord] = field(default_factory=dict)

    def positions(self) -> dict[int, list[int]]:
        """Indices in :attr:`ops` of the abstract operations of each augmented op."""
        pos: dict[int, list[int]] = defaultdict(list)
        for idx, lop in enumerate(self.ops):
            pos[lop.op].append(idx)
        return pos

    def contents_after(self, m: int) -> list[tuple]:
        """``out[k]`` is the content of the object after the first ``k`` operations."""
        cur = [None] * m
        out = [tuple(cur)]
        for lop in self.ops:
            if lop.kind == "update":
                cur[lop.component - 1] = lop.value
            out.append(tuple(cur))
        return out


@dataclass
class CheckReport:
    name: str
    checked: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def fail(self, msg: str) -> None:
        self.violations.append(msg)

    def summary(self) -> dict:
        return {"check": self.name, "checked": self.checked, "violations": len(self.violations),
                "first": self.violations[0] if self.violations else None}


# ---------------------------------------------------------------------------
# linearization points


def assign_points(trace: Trace) -> LinHistory:
    """Place every completed Scan and every Update that took effect."""
    records = trace.ops()
    events = trace.events
    lin: list[tuple] = []
    # completed Scans at their final base scan
    for rec in records.values():
        if rec.kind == "scan":
            if rec.complete:
                if not rec.steps or events[rec.steps[-1]].kind != "scan":
                    raise MalformedTrace(f"scan op {rec.op} does not end with a base scan")
                lin.append((rec.steps[-1], 0, 0, LinOp("scan", rec.op, rec.pid, rec.steps[-1],
                                                        view=rec.result)))
    # Updates: per component, the pending ones sorted by timestamp
    waiting: dict[int, list[tuple[tuple, int, Any, OpRecord]]] = defaultdict(list)
    for rec in records.values():
        if rec.kind == "block_update" and rec.x is not None:
            for j, v in zip(rec.components, rec.values):
                waiting[j].append((rec.timestamp, j, v, rec))
    for lst in waiting.values():
        lst.sort(key=lambda e: e[0])
    heads = {j: 0 for j in waiting}
    for ev in events:
        if not isinstance(ev, SWEvent) or ev.kind != "update":
            continue
        for trip in ev.appended:
            stamp = getattr(trip, "timestamp", None)
            if stamp is None:
                continue
            j = trip.component
            lst = waiting.get(j)
            if not lst:
                continue
            k = heads[j]
            while k < len(lst) and lst[k][0] <= stamp:
                t, comp, v, rec = lst[k]
                lin.append((ev.seq, t, comp, LinOp("update", rec.op, rec.pid, ev.seq, comp, v, t)))
                k += 1
            heads[j] = k
    for j, lst in waiting.items():
        if heads[j] != len(lst):
            raise MalformedTrace(f"an update to component {j} never took effect")
    lin.sort(key=lambda e: (e[0], e[1], e[2]))
    hist = LinHistory([e[3] for e in lin], records)
    for rec in records.values():
        if rec.atomic:
            hist.windows[rec.op] = WindowRecord(rec.op, window_start(trace, rec), rec.x)
    return hist


def window_start(trace: Trace, rec: OpRecord) -> int:
    """Seq of ``L``: the last base scan before the append whose result equals ``last``."""
    if rec.x is None or rec.last is None:
        raise MalformedTrace(f"atomic block update {rec.op} lacks its append or returned history")
    want = rec.last.lengths
    events = trace.events
    for seq in range(rec.x - 1, -1, -1):
        ev = events[seq]
        if isinstance(ev, SWEvent) and ev.kind == "scan" and ev.result.lengths == want:
            return seq
    raise MalformedTrace(f"no base scan returned the history of block update {rec.op}")


# ---------------------------------------------------------------------------
# rule-based checks


def check_intervals(hist: LinHistory) -> CheckReport:
    """Every point lies in its operation's interval; Updates after the first scan and by the append."""
    rep = CheckReport("intervals")
    for lop in hist.ops:
        rec = hist.records[lop.op]
        rep.checked += 1
        hi = rec.res if rec.res is not None else float("inf")
        if not rec.inv < lop.point < hi:
            rep.fail(f"op {lop.op} point {lop.point} outside ({rec.inv}, {rec.res})")
        elif lop.kind == "update" and not (rec.steps[0] < lop.point <= rec.x):
            rep.fail(f"update of op {lop.op} at {lop.point} not within (H={rec.steps[0]}, X={rec.x}]")
    return rep


def check_scan_semantics(hist: LinHistory, m: int) -> CheckReport:
    """Each Scan returns the value of the last Update to each component before it."""
    rep = CheckReport("scan-semantics")
    cur = [None] * m
    for idx, lop in enumerate(hist.ops):
        if lop.kind == "update":
            cur[lop.component - 1] = lop.value
        else:
            rep.checked += 1
            if tuple(cur) != lop.view:
                rep.fail(f"scan op {lop.op} at position {idx} returned {lop.view}, contents {tuple(cur)}")
    return rep


def check_block_semantics(hist: LinHistory, trace: Trace) -> CheckReport:
    """Contiguity, the return rule and window disjointness for atomic Block-Updates."""
    rep = CheckReport("block-semantics")
    m = trace.m
    ops = hist.ops
    pos = hist.positions()
    contents = hist.contents_after(m)
    records = hist.records
    atomic_update = [lop.kind == "update" and records[lop.op].atomic for lop in ops]
    last_scan_before = []
    last_atomic_before = []
    s = a = -1
    for idx, lop in enumerate(ops):
        last_scan_before.append(s)
        last_atomic_before.append(a)
        if lop.kind == "scan":
            s = idx
        elif atomic_update[idx]:
            a = idx
    for rec in records.values():
        if not rec.atomic:
            continue
        rep.checked += 1
        idxs = pos.get(rec.op, [])
        if len(idxs) != len(rec.components):
            rep.fail(f"block update {rec.op}: {len(idxs)} of {len(rec.components)} updates linearized")
            continue
        z = idxs[0]
        if idxs != list(range(z, z + len(idxs))):
            rep.fail(f"block update {rec.op}: updates not contiguous at {idxs}")
            continue
        comps = [ops[k].component for k in idxs]
        if comps != sorted(comps):
            rep.fail(f"block update {rec.op}: updates out of component order {comps}")
        lo = max(last_scan_before[z], last_atomic_before[z])
        # position p means "after the first p operations"; p ranges over lo+1 .. z
        t_pos = next((p for p in range(lo + 1, z + 1) if contents[p] == rec.result), None)
        if t_pos is None:
            rep.fail(f"block update {rec.op}: view {rec.result} matches no point in ({lo}, {z}]")
            continue
        for k in range(t_pos, z):
            other = ops[k]
            orec = records[other.op]
            if other.kind != "update" or orec.atomic or other.pid == rec.pid:
                rep.fail(f"block update {rec.op}: {other.kind} of op {other.op} between T and Z")
                break
        win = hist.windows[rec.op]
        for k in idxs:
            if not win.start < ops[k].point <= win.end:
                rep.fail(f"block update {rec.op}: update at {ops[k].point} outside window "
                         f"({win.start}, {win.end}]")
                break
        if not rec.steps[0] <= win.start < win.end:
            rep.fail(f"block update {rec.op}: window start {win.start} precedes its first scan")
        elif rec.source is not None and rec.source > win.start:
            rep.fail(f"block update {rec.op}: its source scan {rec.source} follows L={win.start}")
    # windows: pairwise disjoint and free of linearized Scans
    wins = sorted(hist.windows.values(), key=lambda w: w.start)
    for w1, w2 in zip(wins, wins[1:]):
        if w2.start < w1.end:
            rep.fail(f"windows of ops {w1.op} and {w2.op} overlap")
    scan_points = sorted(lop.point for lop in ops if lop.kind == "scan")
    for w in wins:
        k = bisect.bisect_right(scan_points, w.start)
        if k < len(scan_points) and scan_points[k] <= w.end:
            rep.fail(f"a scan is linearized inside the window of op {w.op}")
    return rep


def check_yield_cause(trace: Trace) -> CheckReport:
    """Every yielding Block-Update by q_i overlaps an append by some q_j with j < i."""
    rep = CheckReport("yield-cause")
    records = trace.ops()
    appends = sorted((rec.x, rec.pid) for rec in records.values() if rec.x is not None)
    for rec in records.values():
        if not rec.yielded:
            continue
        rep.checked += 1
        if rec.pid == 1:
            rep.fail(f"q_1 yielded in op {rec.op}")
            continue
        if not any(rec.inv < seq < rec.res and pid < rec.pid for seq, pid in appends):
            rep.fail(f"yield of op {rec.op} by q_{rec.pid} has no lower-id append in its interval")
    return rep


def check_step_counts(trace: Trace) -> CheckReport:
    """6 base steps per atomic Block-Update, 5 per yield, 2k+3 per Scan.

    ``k`` is measured from the trace alone: the number of gaps between
    consecutive base scans of the Scan that contain an append of update
    triples by another process.
    """
    rep = CheckReport("step-counts")
    records = trace.ops()
    events = trace.events
    appends = sorted(rec.x for rec in records.values() if rec.x is not None)
    for rec in records.values():
        if not rec.complete:
            continue
        rep.checked += 1
        n = len(rec.steps)
        if rec.kind == "block_update":
            want = 5 if rec.yielded else 6
            if n != want:
                rep.fail(f"block update {rec.op}: {n} base steps, expected {want}")
            continue
        scans = [s for s in rec.steps if events[s].kind == "scan"]
        k = 0
        for a, b in zip(scans, scans[1:]):
            lo = bisect.bisect_right(appends, a)
            if lo < len(appends) and appends[lo] < b:
                k += 1
        if n != 2 * k + 3:
            rep.fail(f"scan {rec.op}: {n} base steps for interference k={k}")
    return rep


def rule_based_checks(trace: Trace, hist: LinHistory | None = None) -> list[CheckReport]:
    hist = hist if hist is not None else assign_points(trace)
    return [check_intervals(hist), check_scan_semantics(hist, trace.m), check_block_semantics(hist, trace)]


def rule_based_verdict(trace: Trace) -> bool:
    try:
        return all(r.ok for r in rule_based_checks(trace))
    except MalformedTrace:
        return False


def check_all(trace: Trace) -> list[CheckReport]:
    """Every check, including the implementation-level yield and step-count checks."""
    return rule_based_checks(trace) + [check_yield_cause(trace), check_step_counts(trace)]


# ---------------------------------------------------------------------------
# brute-force oracle


@dataclass(frozen=True)
class _Abs:
    kind: str
    op: int
    component: int | None
    value: Any
    view: tuple | None
    block: int | None  # op id of an atomic Block-Update, else None
    optional: bool


def abstract_ops(trace: Trace) -> tuple[list[_Abs], list[int]]:
    """Abstract operations and, for each, the bitmask of operations that must precede it."""
    records = trace.ops()
    items: list[tuple[_Abs, OpRecord]] = []
    for rec in records.values():
        if rec.kind == "scan":
            if rec.complete:
                items.append((_Abs("scan", rec.op, None, None, rec.result, None, False), rec))
        else:
            block = rec.op if rec.atomic else None
            for j, v in zip(rec.components, rec.values):
                items.append((_Abs("update", rec.op, j, v, rec.result if rec.atomic else None, block,
                                   not rec.complete), rec))
    preds = []
    for a, ra in items:
        mask = 0
        for k, (b, rb) in enumerate(items):
            if rb.res is not None and rb.res < ra.inv:
                mask |= 1 << k
        preds.append(mask)
    return [a for a, _ in items], preds


def brute_force_linearizable(trace: Trace, limit: int = 8) -> bool:
    """Is there any total order meeting the augmented snapshot specification?

    The search respects real-time order between operations, keeps the Updates
    of every atomic Block-Update adjacent (in any order), requires each Scan
    to return the current contents and each atomic Block-Update to return the
    contents at a point after both the last Scan and the last atomic Update
    preceding its first Update.  Updates of pending Block-Updates may be left
    out.
    """
    ops, preds = abstract_ops(trace)
    if len(ops) > limit:
        raise TooLarge(f"{len(ops)} abstract operations exceed the limit of {limit}")
    m = trace.m
    n = len(ops)
    required = 0
    for k, a in enumerate(ops):
        if not a.optional:
            required |= 1 << k
    block_members: dict[int, int] = defaultdict(int)
    for k, a in enumerate(ops):
        if a.block is not None:
            block_members[a.block] |= 1 << k
    failed: set = set()

    def search(placed: int, contents: tuple, cands: frozenset, open_block: int | None) -> bool:
        if open_block is None and placed & required == required:
            return True
        key = (placed, contents, cands, open_block)
        if key in failed:
            return False
        for k in range(n):
            bit = 1 << k
            if placed & bit or preds[k] & ~placed:
                continue
            a = ops[k]
            if open_block is not None and a.block != open_block:
                continue
            if a.kind == "scan":
                if a.view != contents:
                    continue
                if search(placed | bit, contents, frozenset((contents,)), None):
                    return True
                continue
            new = contents[:a.component - 1] + (a.value,) + contents[a.component:]
            if a.block is None:
                if search(placed | bit, new, cands | {new}, None):
                    return True
                continue
            if open_block is None and a.view not in cands:
                continue
            rest = block_members[a.block] & ~(placed | bit)
            if rest:
                if search(placed | bit, new, cands, a.block):
                    return True
            elif search(placed | bit, new, frozenset((new,)), None):
                return True
        failed.add(key)
        return False

    start = (None,) * m
    return search(0, start, frozenset((start,)), None)
