"""Augmented m-component snapshot built from the single-writer snapshot ``H``.

Operations are generators.  Before every base step the generator yields a
small ``(kind, pid)`` marker saying which step it is poised to take; resuming
it performs exactly that step.  ``yield from aug.scan(i)`` inside a process
generator therefore hands scheduling control back at every base step, and
the value of the ``yield from`` is the operation's result.
"""

from __future__ import annotations

from collections.abc import Generator, Sequence
from typing import Any

from .errors import BadComponentList, DuplicateTimestamp
from .swsnap import LTriple, Prefix, ScanResultH, SingleWriterSnapshot, UpdateTriple, is_prefix, l_read
from .trace import YIELD, Trace

View = tuple
Step = Generator[tuple[str, int], None, Any]


def new_timestamp(h: ScanResultH, i: int) -> tuple[int, ...]:
    """``t_j = #h_j`` for every ``j``, except ``t_i = #h_i + 1``."""
    t = list(h.counts)
    t[i - 1] += 1
    return tuple(t)


def get_view(h: ScanResultH, m: int) -> View:
    """Per component, the value of the update triple with the largest timestamp."""
    best: list[Any] = [None] * m
    stamp: list[tuple | None] = [None] * m
    tied: set[int] = set()
    for trip in h.triples():
        j = trip.component - 1
        s = stamp[j]
        if s is None or trip.timestamp > s:
            stamp[j] = trip.timestamp
            best[j] = trip.value
            tied.discard(j)
        elif trip.timestamp == s:
            tied.add(j)
    if tied:
        j = min(tied) + 1
        raise DuplicateTimestamp(f"component {j} has two triples with timestamp {stamp[j - 1]}")
    return tuple(best)


def check_components(components: Sequence[int], values: Sequence[Any], m: int) -> None:
    if not components or len(components) > m:
        raise BadComponentList(f"need between 1 and {m} components, got {len(components)}")
    if len(set(components)) != len(components):
        raise BadComponentList(f"repeated component in {list(components)}")
    if any(not isinstance(j, int) or not 1 <= j <= m for j in components):
        raise BadComponentList(f"component outside 1..{m} in {list(components)}")
    if len(values) != len(components):
        raise BadComponentList("components and values differ in length")


class AugmentedSnapshot:
    """The object ``𝕄`` for ``f`` real processes and ``m`` components."""

    def __init__(self, f: int, m: int) -> None:
        if m < 1:
            raise ValueError("m must be positive")
        self.f = f
        self.m = m
        self.trace = Trace(f, m)
        self.H = SingleWriterSnapshot(f, recorder=self.trace)
        self._next_op = 0
        self.last_op: dict[int, int] = {}
        # id of every stored payload -> seq of the sw_scan that produced it
        self._origin: dict[int, int] = {}

    def _begin(self, i: int) -> int:
        if not 1 <= i <= self.f:
            raise ValueError(f"process {i} outside 1..{self.f}")
        op = self._next_op
        self._next_op += 1
        self.last_op[i] = op
        return op

    def _scan(self, i: int, op: int) -> Step:
        yield ("scan", i)
        return self.H.scan(i, op=op)

    def _update(self, i: int, op: int, items: list) -> Step:
        yield ("update", i)
        self.H.update(i, items, op=op)

    def _payload(self, h: ScanResultH) -> ScanResultH:
        """Stripped copy of the result just scanned, remembered with its origin."""
        p = h.stripped()
        self._origin[id(p)] = len(self.trace.events) - 1
        return p

    def scan(self, i: int) -> Step:
        """Scan: double-collect on ``H`` with helping writes between attempts."""
        op = self._begin(i)
        yield ("scan", i)
        self.trace.invoke(op, i, "scan")
        h = self.H.scan(i, op=op)
        while True:
            payload = self._payload(h)
            help_items = [LTriple(j, h.count(j), payload) for j in range(1, self.f + 1) if j != i]
            yield from self._update(i, op, help_items)
            h2 = yield from self._scan(i, op)
            if h2.same_updates(h):
                view = get_view(h2, self.m)
                self.trace.respond(op, i, view)
                return view
            h = h2

    def block_update(self, i: int, components: Sequence[int], values: Sequence[Any]) -> Step:
        """Block-Update: returns a view or :data:`YIELD`."""
        components = tuple(components)
        values = tuple(values)
        check_components(components, values, self.m)
        op = self._begin(i)
        yield ("scan", i)
        self.trace.invoke(op, i, "block_update", components, values)
        h = self.H.scan(i, op=op)
        hs = self._payload(h)
        t = new_timestamp(h, i)
        yield from self._update(i, op, [UpdateTriple(j, v, t) for j, v in zip(components, values)])
        g = yield from self._scan(i, op)
        gs = self._payload(g)
        yield from self._update(i, op, [LTriple(j, g.count(j), gs) for j in range(1, i)])
        h2 = yield from self._scan(i, op)
        if any(h2.counts[j] > h.counts[j] for j in range(i - 1)):
            self.trace.respond(op, i, YIELD)
            return YIELD
        r = yield from self._scan(i, op)
        last = hs
        b = h.count(i)
        for j in range(1, self.f + 1):
            if j == i:
                continue
            cand = l_read(r, j, i, b)
            if cand is not None and is_prefix(last, cand) is Prefix.PROPER:
                last = cand
        view = get_view(last, self.m)
        self.trace.respond(op, i, view, last, self._origin[id(last)])
        return view
