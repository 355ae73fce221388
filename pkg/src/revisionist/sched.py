"""Deterministic driver for step generators.

Each simulated real process is a generator that yields once before every
base step (see :mod:`revisionist.augsnap`).  :class:`World` holds a set of
such generators, tells which ones are poised, and advances exactly one of
them per :meth:`World.step`.
"""

from __future__ import annotations

import random
from collections.abc import Callable, Generator, Sequence
from dataclasses import dataclass, field
from typing import Any


class World:
    """A set of primed process generators advanced one base step at a time."""

    def __init__(self, procs: dict[int, Generator], context: Any = None) -> None:
        self.procs = dict(procs)
        self.context = context
        self.poised: dict[int, Any] = {}
        self.results: dict[int, Any] = {}
        self.schedule: list[int] = []
        for pid in sorted(self.procs):
            self._advance(pid, first=True)

    def _advance(self, pid: int, first: bool = False) -> None:
        gen = self.procs[pid]
        try:
            marker = next(gen) if first else gen.send(None)
        except StopIteration as stop:
            self.results[pid] = stop.value
            self.poised.pop(pid, None)
        else:
            self.poised[pid] = marker

    @property
    def live(self) -> list[int]:
        return sorted(self.poised)

    @property
    def done(self) -> bool:
        return not self.poised

    def step(self, pid: int) -> None:
        if pid not in self.poised:
            raise ValueError(f"process {pid} is not poised")
        self.schedule.append(pid)
        self._advance(pid)


@dataclass
class RunStatus:
    steps: int
    completed: bool
    schedule: list[int] = field(default_factory=list)


def run_random(world: World, rng: random.Random, budget: int) -> RunStatus:
    """Pick a poised process uniformly at random until all finish or ``budget`` steps."""
    steps = 0
    while world.poised and steps < budget:
        live = world.live
        world.step(live[rng.randrange(len(live))] if len(live) > 1 else live[0])
        steps += 1
    return RunStatus(steps, world.done, world.schedule)


def run_fixed(world: World, schedule: Sequence[int], budget: int | None = None,
              finish: bool = False) -> RunStatus:
    """Follow ``schedule``; entries for finished processes are skipped.

    With ``finish=True`` any process still poised afterwards runs to
    completion in id order (bounded by ``budget`` when given).
    """
    steps = 0
    for pid in schedule:
        if budget is not None and steps >= budget:
            break
        if pid in world.poised:
            world.step(pid)
            steps += 1
    if finish:
        while world.poised and (budget is None or steps < budget):
            world.step(world.live[0])
            steps += 1
    return RunStatus(steps, world.done, world.schedule)


def explore(
    make_world: Callable[[], World],
    on_leaf: Callable[[World], None],
    *,
    independent: Callable[[Any, Any], bool] | None = None,
    max_depth: int = 10_000,
) -> int:
    """Visit every complete interleaving of a freshly built world.

    Generators cannot be copied, so each branch after the first one rebuilds
    the world and replays its prefix.  With ``independent`` given, sleep sets
    prune interleavings that only swap adjacent independent steps (the
    predicate receives the two poised markers).  Returns the number of
    leaves visited.
    """
    leaves = 0

    def rebuild(prefix: list[int]) -> World:
        w = make_world()
        for p in prefix:
            w.step(p)
        return w

    def visit(world: World, prefix: list[int], sleep: dict[int, Any]) -> None:
        nonlocal leaves
        if world.done or len(prefix) >= max_depth:
            leaves += 1
            on_leaf(world)
            return
        choices = [p for p in world.live if p not in sleep]
        if not choices:
            return
        markers = dict(world.poised)
        done: dict[int, Any] = {}
        for idx, pid in enumerate(choices):
            w = world if idx == 0 else rebuild(prefix)
            mark = markers[pid]
            child_sleep = {}
            if independent is not None:
                for q, mq in list(sleep.items()) + list(done.items()):
                    if independent(mq, mark):
                        child_sleep[q] = mq
            w.step(pid)
            visit(w, prefix + [pid], child_sleep)
            done[pid] = mark

    visit(make_world(), [], {})
    return leaves


def scans_commute(a: Any, b: Any) -> bool:
    """Two base scans by different processes commute."""
    return a[0] == "scan" and b[0] == "scan" and a[1] != b[1]
