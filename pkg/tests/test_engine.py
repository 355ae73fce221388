from __future__ import annotations

import pytest

from revisionist.bounds import b, step_bound
from revisionist.engine import Engine, SimulationSetup, max_a_allowed, simulate
from revisionist.errors import BadParameters, LocalSimBudgetExceeded, ProtocolMisbehavior
from revisionist.model import SCAN, ProtocolSpec, Scan, Update
from revisionist.zoo import eps_agreement, kset_of, of_consensus, starved_consensus


def _cycle(actions, m=1, n=1):
    """Every process repeats ``actions`` forever (an index into the list is the state)."""

    return ProtocolSpec("cycle", n, m, lambda pid, x: 0, lambda k: actions[k % len(actions)],
                        lambda k, resp: k + 1)


def test_partition_is_contiguous_with_covering_first():
    setup = SimulationSetup(starved_consensus(2, 6).spec, 3, 1, (0, 1, 2))
    assert setup.partition == ((1, 2), (3, 4), (5,))
    assert [setup.covering(i) for i in (1, 2, 3)] == [True, True, False]
    assert setup.owner(6) is None
    assert setup.simulated_inputs() == (0, 0, 1, 1, 2, 0)


@pytest.mark.parametrize("f,d,inputs", [(0, 0, ()), (2, 2, (0, 1)), (2, -1, (0, 1)), (2, 0, (0,)),
                                        (3, 0, (0, 1, 2))])
def test_setup_rejects_bad_parameters(f, d, inputs):
    with pytest.raises(BadParameters):
        SimulationSetup(starved_consensus(1, 2).spec, f, d, inputs)


def test_setup_rejects_too_few_processes():
    with pytest.raises(BadParameters):
        SimulationSetup(of_consensus(4).spec, 2, 1, (0, 1))


def test_setup_rejects_non_register_components():
    spec = of_consensus(2).spec
    odd = ProtocolSpec(spec.name, spec.n, spec.m, spec.initial_state, spec.next_step, spec.transition,
                       component_op=lambda old, arg: (arg, old))
    with pytest.raises(BadParameters):
        SimulationSetup(odd, 1, 0, (0,))


def test_solo_covering_simulator_outputs_its_input():
    for entry in (of_consensus(2), of_consensus(3), kset_of(4, 2), starved_consensus(2, 2)):
        run = simulate(SimulationSetup(entry.spec, 1, 0, (7,)), seed=3)
        assert run.completed and run.outputs == {1: 7}


def test_direct_simulator_forwards_steps_one_by_one():
    setup = SimulationSetup(starved_consensus(1, 2).spec, 2, 1, (4, 9))
    run = simulate(setup, schedule=[2] * 40)
    assert run.outputs == {2: 9}
    kinds = [run.engine.meta[op].kind for op in sorted(run.engine.meta) if run.engine.meta[op].simulator == 2]
    assert kinds == ["scan", "block_update", "scan"]


def test_augmented_operations_alternate_per_simulator():
    for seed in range(30):
        run = simulate(SimulationSetup(kset_of(4, 3).spec, 2, 0, (0, 1)), seed=seed)
        assert run.completed
        for i in (1, 2):
            kinds = [m.kind for op, m in sorted(run.engine.meta.items()) if m.simulator == i]
            assert kinds[0] == "scan" and kinds[-1] == "scan"
            assert all(x != y for x, y in zip(kinds, kinds[1:]))


def test_level_one_construction_is_one_scan():
    setup = SimulationSetup(of_consensus(2).spec, 1, 0, (5,))
    eng = Engine(setup)
    gen = eng.construct(1, 1)
    try:
        while True:
            next(gen)
    except StopIteration as stop:
        comps, vals = stop.value
    assert len(comps) == 1 and eng.bu_count[1] == 0
    assert [m.kind for m in eng.meta.values()] == ["scan"]


def test_revision_shape_for_solo_consensus():
    run = simulate(SimulationSetup(of_consensus(2).spec, 1, 0, (5,)), seed=0)
    assert len(run.revisions) == 1
    rev = run.revisions[0]
    assert (rev.simulator, rev.process, rev.level) == (1, 2, 2)
    assert run.engine.meta[rev.source].kind == "block_update"
    assert all(ev.pid == 2 for ev in rev.steps)
    assert isinstance(rev.steps[0].step, Scan) and rev.steps[0].response == rev.view
    assert rev.outcome[0] in ("update", "output")


def test_frames_and_block_counts_respect_bounds():
    for entry, f in ((kset_of(4, 3), 2), (starved_consensus(2, 4), 2), (kset_of(6, 5), 3)):
        m = entry.spec.m
        for seed in range(25):
            run = simulate(SimulationSetup(entry.spec, f, 0, tuple(range(f))), seed=seed)
            assert run.completed
            for frame in run.engine.frames:
                assert frame.max_a <= max_a_allowed(m, frame.level)
            for i, count in run.engine.bu_count.items():
                assert count <= b(i, m)
            assert max(run.sw_steps().values()) <= step_bound(f, m)


def test_tail_runs_on_copies():
    run = simulate(SimulationSetup(of_consensus(2).spec, 1, 0, (5,)), seed=0)
    tail = run.engine.tails[1]
    assert tail.output == 5 and run.outputs[1] == 5
    spec = run.setup.protocol
    # the stored states are still the ones poised at the covering writes
    for pid in run.setup.partition[0]:
        assert isinstance(spec.next_step(run.engine.states[pid]), Update)
    assert isinstance(tail.events[-1].step, Scan)


def test_scanning_twice_is_misbehaviour():
    setup = SimulationSetup(_cycle([SCAN]), 1, 0, (0,))
    with pytest.raises(ProtocolMisbehavior):
        simulate(setup)


def test_endless_solo_run_hits_local_budget():
    setup = SimulationSetup(_cycle([SCAN, Update(1, "z")]), 1, 0, (0,), local_budget=50)
    with pytest.raises(LocalSimBudgetExceeded):
        simulate(setup)


def test_endless_revision_hits_local_budget():
    # p_2 keeps writing component 1 solo, which the revision may not leave
    spec = _cycle([SCAN, Update(1, "z")], m=2, n=2)
    setup = SimulationSetup(spec, 1, 0, (0,), local_budget=40)
    with pytest.raises(LocalSimBudgetExceeded):
        simulate(setup)


def test_same_seed_same_run():
    setup = SimulationSetup(eps_agreement(3, 0.25).spec, 1, 0, (0.0,))
    a, c = simulate(setup, seed=9), simulate(setup, seed=9)
    assert a.schedule == c.schedule and a.outputs == c.outputs
    assert a.trace.to_records() == c.trace.to_records()


def test_budget_stops_the_run():
    run = simulate(SimulationSetup(kset_of(4, 3).spec, 2, 0, (0, 1)), seed=1, budget=5)
    assert not run.completed and run.steps == 5
