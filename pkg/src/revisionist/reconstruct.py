"""From a finished simulation run back to an execution of the simulated protocol.

Three stages:

1. :func:`intermediate_execution` walks the linearized augmented operations
   and applies to the simulated processes the states their simulators
   stored, checking along the way that every operation carries the next
   step of the process it stands for.
2. :func:`block_decomposition` cuts that sequence around the completed
   atomic Block-Updates into ``alpha gamma beta`` pieces.
3. :func:`reconstruct` turns operations into simulated steps, slots each
   revision's hidden steps in front of the ``gamma beta`` of the block whose
   view it used, and appends the local tails of covering simulators.

:func:`replay_validate` then re-executes the result from scratch with the
sequential model and compares every response, every content checkpoint and
the final states with what the engine stored.
"""

from __future__ import annotations

from collections.abc import Hashable
from dataclasses import dataclass, field
from typing import Any

from .engine import RevisionRecord, SimulationRun
from .errors import MalformedTrace, MissingRevisionSource
from .lincheck import LinHistory, assign_points
from .model import SCAN, Configuration, Event, ExecutionRecord, ProtocolSpec, Update, apply_step, validate_task


@dataclass
class Intermediate:
    """The linearized operations with simulated steps and stored states.

    ``events[k]`` is the simulated step of ``hist.ops[k]``; ``contents[k]``
    is the object content after the first ``k`` operations.
    """

    hist: LinHistory
    events: list[Event]
    contents: list[tuple]
    states: dict[int, Hashable]
    violations: list[str] = field(default_factory=list)


def intermediate_execution(run: SimulationRun, hist: LinHistory | None = None) -> Intermediate:
    setup = run.setup
    protocol = setup.protocol
    meta = run.engine.meta
    hist = hist if hist is not None else assign_points(run.trace)
    init = setup.initial_configuration()
    states = {pid: init.state(pid) for pid in range(1, protocol.n + 1)}
    contents = list(protocol.initial_values)
    out = Intermediate(hist, [], [tuple(contents)], states)
    for k, lop in enumerate(hist.ops):
        info = meta.get(lop.op)
        if info is None or info.post_states is None:
            raise MalformedTrace(f"operation {lop.op} has no finished metadata")
        if lop.kind == "scan":
            pid = info.procs[0]
            step, resp = SCAN, tuple(contents)
            if lop.view != resp:
                out.violations.append(f"scan op {lop.op} returned {lop.view!r}, contents were {resp!r}")
        else:
            pid = info.procs[lop.component]
            step, resp = Update(lop.component, lop.value), None
        nxt = protocol.next_step(states[pid])
        if nxt != step:
            out.violations.append(f"position {k}: process {pid} is poised at {nxt!r}, op {lop.op} simulates {step!r}")
        if lop.kind == "scan":
            states.update(info.post_states)
        else:
            contents[lop.component - 1] = lop.value
            states[pid] = info.post_states[pid]
        out.events.append(Event(pid, step, resp))
        out.contents.append(tuple(contents))
    return out


@dataclass(frozen=True)
class Block:
    """One completed atomic Block-Update ``B_t``.

    ``alpha`` is ``[start, view_pos)``, ``gamma`` is ``[view_pos, beta_start)``
    and ``beta`` is ``[beta_start, beta_end)``, all as positions in the
    linearized operation list.
    """

    op: int
    start: int
    view_pos: int
    beta_start: int
    beta_end: int
    view: tuple


@dataclass
class BlockDecomposition:
    blocks: list[Block]
    length: int  # number of linearized operations
    violations: list[str] = field(default_factory=list)

    def segments(self) -> list[tuple[str, int, int, int]]:
        """``(name, t, lo, hi)`` for every piece, in order, 1-based ``t``."""
        out = []
        for t, b in enumerate(self.blocks, start=1):
            out += [("alpha", t, b.start, b.view_pos), ("gamma", t, b.view_pos, b.beta_start),
                    ("beta", t, b.beta_start, b.beta_end)]
        tail = self.blocks[-1].beta_end if self.blocks else 0
        out.append(("alpha", len(self.blocks) + 1, tail, self.length))
        return out


def block_decomposition(inter: Intermediate) -> BlockDecomposition:
    hist = inter.hist
    recs = hist.records
    pos = hist.positions()
    points = [lop.point for lop in hist.ops]
    atomic = sorted((op for op, rec in recs.items() if rec.atomic), key=lambda op: pos[op][0])
    decomp = BlockDecomposition([], len(hist.ops))
    prev_end = 0
    for op in atomic:
        rec = recs[op]
        idx = sorted(pos[op])
        lo, hi = idx[0], idx[-1] + 1
        if idx != list(range(lo, hi)) or len(idx) != len(rec.components):
            decomp.violations.append(f"updates of atomic block {op} are not contiguous")
        start = hist.windows[op].start
        view_pos = sum(1 for p in points if p <= start)
        for k in range(view_pos, lo):
            other = recs[hist.ops[k].op]
            if hist.ops[k].kind != "update" or other.atomic:
                decomp.violations.append(f"position {k} before block {op} is not an update of a yielded block")
        if view_pos < prev_end:
            decomp.violations.append(f"view of block {op} predates the previous block")
        if inter.contents[view_pos] != rec.result:
            decomp.violations.append(f"block {op} returned {rec.result!r}, contents were {inter.contents[view_pos]!r}")
        decomp.blocks.append(Block(op, prev_end, view_pos, lo, hi, rec.result))
        prev_end = hi
    return decomp


def reconstruct(run: SimulationRun, inter: Intermediate, decomp: BlockDecomposition,
                revisions: list[RevisionRecord] | None = None) -> tuple[ExecutionRecord, list[tuple[int, int]], int]:
    """Build ``sigma``.

    Returns the execution, the content checkpoints ``(sigma_index,
    lin_position)`` for every prefix of every ``alpha`` piece, and the index
    where the covering tails start.
    """
    revisions = run.revisions if revisions is None else revisions
    by_source: dict[int, RevisionRecord] = {}
    known = {b.op for b in decomp.blocks}
    for rev in revisions:
        if rev.source not in known:
            raise MissingRevisionSource(f"revision of process {rev.process} uses unknown block {rev.source}")
        if rev.source in by_source:
            raise MalformedTrace(f"block {rev.source} is the source of two revisions")
        by_source[rev.source] = rev
    sigma = ExecutionRecord(run.setup.initial_configuration())
    checkpoints: list[tuple[int, int]] = []

    def emit(lo: int, hi: int, name: str, t: int) -> None:
        for k in range(lo, hi):
            sigma.events.append(inter.events[k])
            sigma.tags.append((name, t, k))

    for name, t, lo, hi in decomp.segments():
        if name == "alpha":
            for k in range(lo, hi + 1):
                checkpoints.append((len(sigma.events) + k - lo, k))
            emit(lo, hi, name, t)
            if t <= len(decomp.blocks):
                rev = by_source.get(decomp.blocks[t - 1].op)
                for ev in rev.steps if rev is not None else ():
                    sigma.events.append(ev)
                    sigma.tags.append(("zeta", t, None))
        else:
            emit(lo, hi, name, t)
    tail_start = len(sigma.events)
    for i in sorted(run.engine.tails):
        for ev in run.engine.tails[i].events:
            sigma.events.append(ev)
            sigma.tags.append(("tail", i, None))
    return sigma, checkpoints, tail_start


@dataclass
class ReplayReport:
    ok: bool
    steps: int
    violations: list[str]
    task_valid: bool | None
    outputs: dict[int, Any]

    def summary(self) -> dict:
        return {"ok": self.ok, "steps": self.steps, "violations": len(self.violations),
                "first": self.violations[0] if self.violations else None,
                "task_valid": self.task_valid, "outputs": self.outputs}


def replay_validate(sigma: ExecutionRecord, protocol: ProtocolSpec, *, engine_states: dict[int, Hashable],
                    checkpoints: list[tuple[int, int]], contents: list[tuple], tail_start: int,
                    tails: dict[int, Any], outputs: dict[int, Any], task=None,
                    inputs: tuple | None = None) -> ReplayReport:
    """Re-execute ``sigma`` and compare it with what the engine believes.

    ``tails`` maps each covering simulator with a local tail to that tail's
    output.  Checks: each event is the next step of its process with the
    recorded response, contents at every checkpoint, states just before the
    tails against ``engine_states``, each tail output against the
    simulator's output, and each simulator output against some output in
    ``sigma``.
    """
    bad: list[str] = []
    cfg: Configuration = sigma.initial
    want: dict[int, list[int]] = {}
    for s_idx, k in checkpoints:
        want.setdefault(s_idx, []).append(k)

    def check_point(idx: int, c: Configuration) -> None:
        for k in want.get(idx, ()):
            if c.contents != contents[k]:
                bad.append(f"contents after {idx} steps are {c.contents!r}, expected {contents[k]!r}")

    def check_states(c: Configuration) -> None:
        for pid, st in engine_states.items():
            if c.state(pid) != st:
                bad.append(f"process {pid} ends in a state the engine did not store")

    check_point(0, cfg)
    if tail_start == 0:
        check_states(cfg)
    done = 0
    for idx, ev in enumerate(sigma.events):
        try:
            expected = protocol.next_step(cfg.state(ev.pid))
            if expected != ev.step:
                bad.append(f"step {idx}: process {ev.pid} is poised at {expected!r}, sigma has {ev.step!r}")
                break
            cfg, real = apply_step(cfg, ev.pid, protocol)
        except Exception as exc:  # a broken sigma may trip any model error
            bad.append(f"step {idx}: {exc}")
            break
        if real.response != ev.response:
            bad.append(f"step {idx}: response {real.response!r} differs from recorded {ev.response!r}")
        done = idx + 1
        check_point(done, cfg)
        if done == tail_start:
            check_states(cfg)
    final_outputs = cfg.outputs(protocol)
    if done == len(sigma.events):
        for i, y in tails.items():
            if outputs.get(i) != y:
                bad.append(f"simulator {i} output {outputs.get(i)!r} but its tail ends with {y!r}")
        seen = set(map(repr, final_outputs.values()))
        for i, y in outputs.items():
            if repr(y) not in seen:
                bad.append(f"simulator {i} output {y!r}, which no simulated process output")
    valid = None
    if task is not None and inputs is not None and outputs:
        valid = validate_task(task, inputs, outputs.values())
    return ReplayReport(not bad, done, bad, valid, final_outputs)


@dataclass
class Reconstruction:
    intermediate: Intermediate
    decomposition: BlockDecomposition
    sigma: ExecutionRecord
    checkpoints: list[tuple[int, int]]
    tail_start: int
    report: ReplayReport

    @property
    def ok(self) -> bool:
        return self.report.ok and not self.intermediate.violations and not self.decomposition.violations

    def violations(self) -> list[str]:
        return self.intermediate.violations + self.decomposition.violations + self.report.violations


def rebuild_and_check(run: SimulationRun, task=None) -> Reconstruction:
    """All three stages plus :func:`replay_validate` on one completed run."""
    if not run.completed:
        raise MalformedTrace("cannot reconstruct a run that did not complete")
    inter = intermediate_execution(run)
    decomp = block_decomposition(inter)
    sigma, checkpoints, tail_start = reconstruct(run, inter, decomp)
    part = [p for ps in run.setup.partition for p in ps]
    report = replay_validate(
        sigma, run.setup.protocol,
        engine_states={p: run.engine.states[p] for p in part},
        checkpoints=checkpoints, contents=inter.contents, tail_start=tail_start,
        tails={i: t.output for i, t in run.engine.tails.items()},
        outputs=run.outputs, task=task, inputs=run.setup.inputs)
    return Reconstruction(inter, decomp, sigma, checkpoints, tail_start, report)
