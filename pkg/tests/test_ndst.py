from __future__ import annotations

import json
import time

import pytest

from revisionist.errors import BadMachine, BadParameters, NoSoloPath
from revisionist.model import SCAN, Configuration, ProtocolSpec, Update, apply_step, reachable, run_schedule
from revisionist.ndst import (INF, WILDCARD, MachineProtocol, NDMachine, Tagged, aba_violations, aba_wrap,
                              derive, det_protocol, det_to_dict, forced_response, looping_machine, machine_from_dict,
                              machine_to_dict, require_ndst, solo_path_table, subset_violations, toy_machine,
                              simulate_on_view, toy_protocol, verify_of)
from revisionist.zoo import contention_livelock, of_consensus, starved_consensus


def _machine(states, nu, delta, E, final, op="register", m=1):
    return NDMachine("t", m, tuple(states), {0: states[0]}, final, nu, delta, E, op)


def _chain():
    # s scans, s1 writes, F is final
    return _machine(["s", "s1", "F"], {"s": SCAN, "s1": Update(1, 7)},
                    {("s", WILDCARD): ("s1",), ("s1", None): ("F",)},
                    {"s": (None,), "s1": (None,), "F": (7,)}, {"F": 7})


def test_forced_response_of_scan_is_expected_view():
    mc = _chain()
    assert forced_response(mc, "s") == (None,)
    assert forced_response(mc, "s1") is None


def test_forced_response_on_max_register_keeps_larger_value():
    mc = _machine(["w", "F"], {"w": Update(1, 2)}, {("w", None): ("F",)}, {"w": (3,), "F": (3,)}, {"F": 0},
                  op="max_register")
    assert forced_response(mc, "w") is None
    assert simulate_on_view((3,), Update(1, 2), mc.component_op)[0] == (3,)


def test_forced_response_on_fetch_and_increment():
    mc = _machine(["w", "F"], {"w": Update(1, None)}, {("w", WILDCARD): ("F",)}, {"w": (4,), "F": (5,)},
                  {"F": 0}, op="fetch_and_increment")
    assert forced_response(mc, "w") == 4


def test_solo_path_lengths_on_chain():
    info = solo_path_table(_chain())
    assert info.ell == {"s": 2, "s1": 1, "F": 0}


def test_fork_prefers_shortest_then_declared_order():
    # from s the forced scan may go to a (one step from F) or b (also one step) or c (loops)
    states = ["s", "c", "a", "b", "F"]
    nu = {"s": SCAN, "a": Update(1, 1), "b": Update(1, 1), "c": Update(1, 1)}
    delta = {("s", WILDCARD): ("c", "b", "a"), ("a", None): ("F",), ("b", None): ("F",), ("c", None): ("s",)}
    E = {s: (None,) for s in states}
    det = derive(_machine(states, nu, delta, E, {"F": 1}))
    assert det.delta("s", (None,)) == "a"
    # a response that is not forced falls back to the first allowed successor
    assert det.delta("s", (5,)) == "c"


def test_deterministic_machine_is_unchanged():
    mc = _chain()
    det = derive(mc)
    for (s, a), succ in mc.delta.items():
        if a != WILDCARD:
            assert det.delta(s, a) == succ[0]
    assert det.delta("s", (None,)) == "s1"


def test_toy_machine_is_small_and_nondeterministic():
    mc = toy_machine()
    assert len(mc.states) <= 30
    assert any(len(t) > 1 for t in mc.delta.values())
    assert not solo_path_table(mc).unreachable()


def test_toy_derivation_verifies():
    t0 = time.perf_counter()
    rep = verify_of(toy_protocol(), depth=10)
    assert rep.ok, rep.violations[:3]
    assert rep.configurations > 10 and rep.solo_runs > 10
    assert time.perf_counter() - t0 < 60


def test_derived_choice_is_always_allowed():
    det = derive(toy_machine())
    assert subset_violations(det) == []
    for s in det.machine.nu:
        for a in [(None,), (0,), (1,), None]:
            try:
                allowed = det.machine.successors(s, a)
            except BadMachine:
                continue
            assert det.delta(s, a) in allowed


def test_looping_machine_fails_verification():
    mc = looping_machine()
    info = solo_path_table(mc)
    assert info.ell["B"] == INF
    rep = verify_of(MachineProtocol("loop", (mc,)), depth=4, slack=50)
    assert not rep.ok
    with pytest.raises(NoSoloPath):
        require_ndst(mc, ["A"])


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(states=d["states"] + ["s"]),
    lambda d: d.update(nu=[]),
    lambda d: d.update(E=[]),
    lambda d: d.update(delta=[["s", "*", ["nowhere"]]]),
    lambda d: d.update(op="queue"),
    lambda d: d.pop("nu"),
])
def test_malformed_machines_are_rejected(mutate):
    d = machine_to_dict(_chain())
    mutate(d)
    with pytest.raises(BadMachine):
        machine_from_dict(d)


def test_machine_json_round_trip():
    mc = toy_machine()
    again = machine_from_dict(json.loads(json.dumps(machine_to_dict(mc))))
    assert again == mc
    det = det_to_dict(derive(mc))
    assert all(len(t) == 1 for _, _, t in det["delta"])
    assert dict((s, v) for s, v in det["ell"])["D0"] == 0


def test_aba_wrap_tags_equal_writes_differently():
    spec = aba_wrap(contention_livelock().spec)
    rec = run_schedule(spec, [0, 1], [1, 1, 2, 2, 1, 1, 2, 2])
    writes = [ev.step.value for ev in rec.events if isinstance(ev.step, Update) and ev.pid == 1]
    assert len(writes) == 2 and writes[0] != writes[1]
    assert writes[0].value == writes[1].value and isinstance(writes[0], Tagged)


def test_unwrapped_protocol_shows_aba():
    spec = contention_livelock().spec
    rec = run_schedule(spec, [0, 1], [1, 1, 2, 2, 1, 1])
    assert aba_violations(rec, 1) == [(1, 5)]


def test_wrapped_protocol_is_aba_free_and_behaves_the_same():
    base = contention_livelock().spec
    wrapped = aba_wrap(base)
    for sched in ([1, 2] * 6, [1, 1, 2, 2] * 3, [2, 1, 1, 2, 1, 2, 2, 1] * 2):
        a = run_schedule(base, [0, 1], sched, budget=len(sched))
        w = run_schedule(wrapped, [0, 1], sched, budget=len(sched))
        assert aba_violations(w, 1) == []
        assert w.final.outputs(wrapped) == a.final.outputs(base)
        assert [e.pid for e in w.events] == [e.pid for e in a.events]


def test_wrapped_exploration_never_repeats_a_value():
    wrapped = aba_wrap(starved_consensus(2, 2).spec)
    for cfg in reachable(wrapped, [0, 1], 8):
        vals = [c for c in cfg.contents if c is not None]
        assert len(set(vals)) == len(vals)


def test_aba_wrap_needs_registers():
    spec = of_consensus(2).spec
    odd = ProtocolSpec("odd", 2, 2, spec.initial_state, spec.next_step, spec.transition,
                       component_op=lambda old, arg: (arg, old))
    with pytest.raises(BadParameters):
        aba_wrap(odd)


def test_derived_protocol_runs_on_the_model():
    proto = toy_protocol()
    spec = det_protocol(proto, tuple(derive(mc) for mc in proto.machines))
    cfg = Configuration.initial(spec, (0, 1))
    while not cfg.has_output(1, spec):
        cfg, _ = apply_step(cfg, 1, spec)
    assert cfg.outputs(spec) == {1: 0}
