from __future__ import annotations

import math
from pathlib import Path

import pytest

from revisionist.bounds import (a, b, b_closed, b_solved, bounds, eps_bound, kset_bound, step_bound,
                                step_lower_bound_bound, xof_bound)
from revisionist.errors import BadParameters

REFERENCE = Path(__file__).resolve().parents[1] / "paper.md"


def _a_product(r: int, m: int) -> int:
    """Independent form: a(r) + 1 is the product of (C(m, j) + 1) for j < r."""
    return math.prod(math.comb(m, j) + 1 for j in range(1, r)) - 1


def _b_table(f: int, m: int) -> list[int]:
    """Independent evaluation of the b recurrence with an explicit running sum."""
    out, total = [], 0
    for i in range(1, f + 1):
        val = a(m, m) if i == 1 else (a(m - 1, m) + 1) * total + a(m, m)
        out.append(val)
        total += val
    return out


def test_a_base_case_matches_text():
    assert "0 & \\mbox{if }r= 1" in REFERENCE.read_text()
    for m in range(1, 7):
        assert a(1, m) == 0


@pytest.mark.parametrize("m", range(1, 7))
def test_a_matches_product_form(m):
    for r in range(1, m + 1):
        assert a(r, m) == _a_product(r, m)
        assert a(r, m) <= 2 ** (m * (r - 1))


def test_a_spot_values_m3():
    assert (a(2, 3), a(3, 3)) == (3, 15)


@pytest.mark.parametrize("m", range(1, 6))
def test_b_matches_running_sum_and_solution(m):
    want = _b_table(5, m)
    assert [b(i, m) for i in range(1, 6)] == want
    assert [b_solved(i, m) for i in range(1, 6)] == want


def test_b_closed_form_diverges_from_recurrence():
    # The quoted closed form agrees only at i = 1 (or when a(m) = 0).
    assert b_closed(1, 3) == b(1, 3) == 15
    assert (b_closed(2, 3), b(2, 3)) == (60, 75)
    assert (b_closed(2, 2), b(2, 2)) == (2, 4)


def test_step_bound_value():
    assert step_bound(2, 3) == (2 * 2 + 7) * 75 + 3 == 828


@pytest.mark.parametrize("n,k,x,want", [(10, 1, 1, 10), (10, 3, 1, 4), (10, 3, 3, 8)])
def test_kset_spot_values(n, k, x, want):
    assert kset_bound(n, k, x) == want


@pytest.mark.parametrize("n", range(2, 12))
def test_kset_equals_smallest_m_that_is_not_too_small(n):
    # m registers suffice for the simulation argument only if (f - x) m + x > n with f = k + 1
    for k in range(1, n):
        for x in range(1, k + 1):
            f = k + 1
            m = next(m for m in range(1, 10 * n) if (f - x) * m + x > n)
            assert kset_bound(n, k, x) == m
            assert xof_bound(n, f, x) == m


def test_consensus_bound_is_n():
    assert "\\lfloor \\frac{n-x}{k+1-x} \\rfloor + 1" in REFERENCE.read_text()
    for n in range(2, 20):
        assert kset_bound(n, 1, 1) == n


def test_eps_bound_explicit_logs():
    root = math.sqrt(math.log(math.log(1000) / math.log(3)) / math.log(2) - 2)
    assert eps_bound(10, 0.001) == pytest.approx(min(6, root), abs=1e-12)
    assert eps_bound(10, 0.001) == pytest.approx(0.80779616, abs=1e-8)


def test_eps_bound_vacuous_for_large_eps():
    assert eps_bound(4, 0.5) == 0.0
    assert eps_bound(4, 0.05) == 0.0  # log2(log3 20) - 2 < 0


def test_eps_bound_saturates_at_half_n():
    assert eps_bound(2, 1e-300) == 2


def test_step_lower_bound():
    assert step_lower_bound_bound(8, 2, 2 * 2 ** 9) == 3.0
    assert step_lower_bound_bound(8, 2, 2 * 2 ** 100) == 5
    assert step_lower_bound_bound(8, 2, 1) == 0.0


@pytest.mark.parametrize("call", [lambda: a(3, 2), lambda: b(0, 2), lambda: kset_bound(3, 3, 1),
                                  lambda: kset_bound(10, 2, 3), lambda: xof_bound(5, 2, 2),
                                  lambda: eps_bound(1, 0.1), lambda: eps_bound(4, 1.0),
                                  lambda: step_lower_bound_bound(4, 5, 10), lambda: bounds(0, 1)])
def test_bad_parameters(call):
    with pytest.raises(BadParameters):
        call()


def test_bounds_report_collects_tables():
    rep = bounds(3, 2, n=10, k=3, x=1, eps=0.001, L=64)
    assert rep.a == {1: 0, 2: 3, 3: 15}
    assert rep.b == {1: 15, 2: 75}
    assert rep.b_closed == {1: 15, 2: 60}
    assert rep.step_bound == 828
    assert rep.space["kset"] == 4 and rep.space["xof"] == 10
    assert rep.space["eps"] == pytest.approx(0.80779616, abs=1e-8)
    assert rep.space["steps"] == pytest.approx(math.sqrt(5))
