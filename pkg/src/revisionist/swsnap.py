"""Single-writer snapshot ``H`` of the real system.

Component ``i`` of ``H`` belongs to real process ``q_i``.  It is append-only
and holds two kinds of triples: update triples ``(component, value,
timestamp)`` produced by Block-Updates, and helping triples ``(target, index,
payload)`` that form the arrays ``L_{i,j}``.  Both kinds live in ``H[i]``; they
are kept in two parallel sequences so that scan comparisons can look at the
update triples alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Protocol

from .errors import ForeignComponent

Timestamp = tuple  # f-vector of non-negative ints, compared lexicographically


@dataclass(frozen=True)
class UpdateTriple:
    component: int
    value: Any
    timestamp: Timestamp


@dataclass(frozen=True)
class LTriple:
    """Entry ``L_{writer,target}[index] = payload``."""

    target: int
    index: int
    payload: ScanResultH


@dataclass(frozen=True)
class ScanResultH:
    """Result of one ``sw_scan``.

    ``updates[i-1]`` and ``helps[i-1]`` are the update and helping triples of
    ``H[i]`` at the time of the scan, and ``counts[i-1]`` is ``#h_i``, the
    number of distinct timestamps among the update triples of ``H[i]``.
    Payloads stored in helping triples keep ``helps`` empty.
    """

    updates: tuple[tuple[UpdateTriple, ...], ...]
    helps: tuple[tuple[LTriple, ...], ...]
    counts: tuple[int, ...]

    @property
    def f(self) -> int:
        return len(self.updates)

    def count(self, i: int) -> int:
        """``#h_i``."""
        return self.counts[i - 1]

    @cached_property
    def lengths(self) -> tuple[int, ...]:
        """Number of update triples per component; identifies the result within a run."""
        return tuple(len(u) for u in self.updates)

    def stripped(self) -> ScanResultH:
        if not any(self.helps):
            return self
        return ScanResultH(self.updates, ((),) * len(self.updates), self.counts)

    def same_updates(self, other: ScanResultH) -> bool:
        return self.lengths == other.lengths and self.updates == other.updates

    def triples(self) -> Iterable[UpdateTriple]:
        for comp in self.updates:
            yield from comp

    @classmethod
    def empty(cls, f: int) -> ScanResultH:
        return cls(((),) * f, ((),) * f, (0,) * f)


class Prefix(enum.Enum):
    PROPER = "proper-prefix"
    EQUAL = "equal"
    NOT = "not-prefix"


def is_prefix(h: ScanResultH, h2: ScanResultH) -> Prefix:
    """Componentwise prefix comparison of the update triples of two results."""
    if h.f != h2.f:
        raise ValueError("scan results over different f")
    proper = False
    for a, b in zip(h.updates, h2.updates):
        la, lb = len(a), len(b)
        if la > lb:
            return Prefix.NOT
        if la < lb:
            proper = True
            if b[:la] != a:
                return Prefix.NOT
        elif a != b:
            return Prefix.NOT
    return Prefix.PROPER if proper else Prefix.EQUAL


def l_read(h: ScanResultH, frm: int, to: int, index: int) -> ScanResultH | None:
    """Payload of the last ``(to, index, payload)`` triple in ``h_frm``, else ``None``."""
    for trip in reversed(h.helps[frm - 1]):
        if trip.target == to and trip.index == index:
            return trip.payload
    return None


class Recorder(Protocol):
    def record_sw(self, kind: str, pid: int, op: int | None, appended: tuple, result: ScanResultH | None) -> None:
        ...


@dataclass
class SingleWriterSnapshot:
    """The object ``H``; every method call is one atomic base step."""

    f: int
    recorder: Recorder | None = None
    _updates: list = field(init=False)
    _helps: list = field(init=False)
    _stamps: list = field(init=False)
    steps: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        if self.f < 1:
            raise ValueError("f must be positive")
        self._updates = [()] * self.f
        self._helps = [()] * self.f
        self._stamps = [frozenset()] * self.f

    def _check_pid(self, pid: int) -> None:
        if not 1 <= pid <= self.f:
            raise ForeignComponent(f"process {pid} outside 1..{self.f}")

    def update(self, writer: int, appended: Iterable[UpdateTriple | LTriple], *, component: int | None = None,
               op: int | None = None) -> None:
        """Append ``appended`` to ``H[writer]`` in one step."""
        self._check_pid(writer)
        if component is not None and component != writer:
            raise ForeignComponent(f"process {writer} cannot append to H[{component}]")
        items = tuple(appended)
        idx = writer - 1
        ups = tuple(t for t in items if isinstance(t, UpdateTriple))
        hel = tuple(t for t in items if isinstance(t, LTriple))
        if len(ups) + len(hel) != len(items):
            raise TypeError("only update and helping triples can be appended")
        for t in hel:
            if t.target == writer or not 1 <= t.target <= self.f:
                raise ForeignComponent(f"helping triple of q_{writer} names target {t.target}")
        if ups:
            self._updates[idx] = self._updates[idx] + ups
            self._stamps[idx] = self._stamps[idx] | {t.timestamp for t in ups}
        if hel:
            self._helps[idx] = self._helps[idx] + hel
        self.steps += 1
        if self.recorder is not None:
            self.recorder.record_sw("update", writer, op, items, None)

    def current(self) -> ScanResultH:
        return ScanResultH(tuple(self._updates), tuple(self._helps), tuple(len(s) for s in self._stamps))

    def scan(self, reader: int, *, op: int | None = None) -> ScanResultH:
        """Read every component in one step."""
        self._check_pid(reader)
        res = self.current()
        self.steps += 1
        if self.recorder is not None:
            self.recorder.record_sw("scan", reader, op, (), res)
        return res

    def prefix(self, lengths: Iterable[int]) -> ScanResultH:
        """The stripped result whose update histories have the given lengths."""
        ups = tuple(u[:n] for u, n in zip(self._updates, lengths))
        counts = tuple(len({t.timestamp for t in u}) for u in ups)
        return ScanResultH(ups, ((),) * self.f, counts)

    def l_array(self, i: int, j: int) -> dict[int, ScanResultH]:
        """Convenience view of ``L_{i,j}`` as ``{index: latest payload}``."""
        out: dict[int, ScanResultH] = {}
        for t in self._helps[i - 1]:
            if t.target == j:
                out[t.index] = t.payload
        return out
