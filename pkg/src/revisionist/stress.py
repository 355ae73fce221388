"""Random and exhaustive workloads for the augmented snapshot."""

from __future__ import annotations

import random
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass

from .augsnap import AugmentedSnapshot, Step
from .sched import World, explore, run_fixed, run_random
from .trace import Trace

OpSpec = tuple  # ("scan",) or ("bu", components, values)


def client(aug: AugmentedSnapshot, i: int, ops: Sequence[OpSpec]) -> Step:
    """Process ``q_i`` performing ``ops`` one after another."""
    results = []
    for spec in ops:
        if spec[0] == "scan":
            results.append((yield from aug.scan(i)))
        else:
            results.append((yield from aug.block_update(i, spec[1], spec[2])))
    return results


def random_workload(rng: random.Random, f: int, m: int, max_ops: int = 3) -> dict[int, list[OpSpec]]:
    """Every process gets 1..max_ops operations; values are unique per op."""
    work: dict[int, list[OpSpec]] = {}
    for i in range(1, f + 1):
        ops: list[OpSpec] = []
        for k in range(rng.randint(1, max_ops)):
            if rng.random() < 0.35:
                ops.append(("scan",))
            else:
                comps = tuple(sorted(rng.sample(range(1, m + 1), rng.randint(1, m))))
                ops.append(("bu", comps, tuple(f"v{i}.{k}.{j}" for j in comps)))
        work[i] = ops
    return work


def build_world(f: int, m: int, work: dict[int, list[OpSpec]]) -> tuple[AugmentedSnapshot, World]:
    aug = AugmentedSnapshot(f, m)
    return aug, World({i: client(aug, i, ops) for i, ops in work.items()}, context=aug)


@dataclass
class StressRun:
    index: int
    seed: int
    f: int
    m: int
    work: dict[int, list[OpSpec]]
    trace: Trace
    completed: bool
    schedule: list[int]


def stress_runs(runs: int, seed: int, *, f: int | None = None, m: int | None = None,
                f_max: int = 4, m_max: int = 3, max_ops: int = 3, budget: int = 5000) -> Iterator[StressRun]:
    """Seeded random worlds; ``f``/``m`` are drawn per run unless fixed."""
    for idx in range(runs):
        run_seed = seed * 1_000_003 + idx
        rng = random.Random(run_seed)
        ff = f if f is not None else rng.randint(1, f_max)
        mm = m if m is not None else rng.randint(1, m_max)
        work = random_workload(rng, ff, mm, max_ops)
        aug, world = build_world(ff, mm, work)
        status = run_random(world, rng, budget)
        yield StressRun(idx, run_seed, ff, mm, work, aug.trace, status.completed, list(status.schedule))


def small_vocabulary(m: int = 2) -> list[OpSpec]:
    """Operations used for exhaustive enumeration."""
    vocab: list[OpSpec] = [("scan",), ("bu", (1,), ("a",))]
    if m >= 2:
        vocab.append(("bu", (1, 2), ("b", "c")))
    return vocab


def small_workloads(max_ops: int = 3, m: int = 2) -> Iterator[dict[int, list[OpSpec]]]:
    """All two-process workloads with 2..max_ops operations over the small vocabulary.

    Values are tagged with process and position so views stay informative.
    """
    vocab = small_vocabulary(m)

    def seqs(k: int) -> Iterator[tuple[OpSpec, ...]]:
        if k == 0:
            yield ()
            return
        for head in vocab:
            for tail in seqs(k - 1):
                yield (head,) + tail

    def tag(i: int, ops: tuple[OpSpec, ...]) -> list[OpSpec]:
        out = []
        for k, spec in enumerate(ops):
            if spec[0] == "scan":
                out.append(spec)
            else:
                out.append(("bu", spec[1], tuple(f"{v}{i}{k}" for v in spec[2])))
        return out

    for total in range(2, max_ops + 1):
        for k1 in range(1, total):
            for ops1 in seqs(k1):
                for ops2 in seqs(total - k1):
                    yield {1: tag(1, ops1), 2: tag(2, ops2)}


def for_each_interleaving(work: dict[int, list[OpSpec]], visit: Callable[[Trace], None], m: int = 2) -> int:
    """Call ``visit`` on the trace of every interleaving of ``work``; returns the count."""
    f = max(work)
    return explore(lambda: build_world(f, m, work)[1], lambda w: visit(w.context.trace))


def replay_world(f: int, m: int, work: dict[int, list[OpSpec]], schedule: Sequence[int]) -> Trace:
    aug, world = build_world(f, m, work)
    run_fixed(world, schedule)
    return aug.trace
