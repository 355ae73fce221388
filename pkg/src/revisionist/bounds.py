"""Counting formulas for the covering construction and the derived space bounds.

``a(r)`` bounds the Block-Updates one call of the level-``r`` construction
applies when every one of them is atomic, ``b(i)`` bounds the Block-Updates
of covering simulator ``q_i`` over a whole run, and ``step_bound(f, m)``
bounds the base steps of any simulator when all simulators are covering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import BadParameters


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise BadParameters(msg)


@lru_cache(maxsize=None)
def a(r: int, m: int) -> int:
    """``a(1) = 0``; ``a(r) = (C(m, r-1) + 1) a(r-1) + C(m, r-1)``.

    ``a(0)`` is taken to be 0 so that ``b`` is defined for ``m = 1``.
    """
    _need(m >= 1 and 0 <= r <= m, f"need 0 <= r <= m and m >= 1, got r={r}, m={m}")
    if r <= 1:
        return 0
    c = math.comb(m, r - 1)
    return (c + 1) * a(r - 1, m) + c


@lru_cache(maxsize=None)
def b(i: int, m: int) -> int:
    """Block-Update budget of covering simulator ``q_i`` (recurrence form).

    ``b(1) = a(m)`` and ``b(i) = (a(m-1) + 1) * sum(b(1..i-1)) + a(m)``:
    every Block-Update of a lower-id simulator can spoil one block of width
    ``m-1``, each spoiled block costs one more construction of width
    ``m-1``, and on top of that comes the all-atomic cost ``a(m)``.
    """
    _need(i >= 1, f"i must be positive, got {i}")
    if i == 1:
        return a(m, m)
    return (a(m - 1, m) + 1) * sum(b(j, m) for j in range(1, i)) + a(m, m)


def b_closed(i: int, m: int) -> int:
    """The closed form ``a(m) (a(m-1) + 1)^(i-1)`` as usually quoted for ``b``."""
    _need(i >= 1, f"i must be positive, got {i}")
    return a(m, m) * (a(m - 1, m) + 1) ** (i - 1)


def b_solved(i: int, m: int) -> int:
    """Exact solution of the recurrence in :func:`b`: ``a(m) (a(m-1) + 2)^(i-1)``."""
    _need(i >= 1, f"i must be positive, got {i}")
    return a(m, m) * (a(m - 1, m) + 2) ** (i - 1)


def step_bound(f: int, m: int) -> int:
    """Base steps any simulator takes when all ``f`` simulators are covering: ``(2f+7) b(f) + 3``."""
    _need(f >= 1, "f must be positive")
    return (2 * f + 7) * b(f, m) + 3


def kset_bound(n: int, k: int, x: int) -> int:
    """Registers needed by x-obstruction-free k-set agreement among n processes."""
    _need(1 <= x <= k and n >= k + 1, f"need 1 <= x <= k < n, got n={n}, k={k}, x={x}")
    return (n - x) // (k + 1 - x) + 1


def xof_bound(n: int, f: int, x: int) -> int:
    """``floor((n-x)/(f-x)) + 1`` for x-obstruction-free protocols and a task unsolvable among f."""
    _need(1 <= x < f <= n, f"need 1 <= x < f <= n, got n={n}, f={f}, x={x}")
    return (n - x) // (f - x) + 1


def step_lower_bound_bound(n: int, f: int, L: float) -> float:
    """``min(floor(n/f) + 1, sqrt(log2(L/f)))`` for obstruction-free protocols.

    When ``L/f <= 1`` the square root has no real meaning and the bound is
    reported as 0 (vacuous).
    """
    _need(1 <= f <= n and L > 0, f"need 1 <= f <= n and L > 0, got n={n}, f={f}, L={L}")
    inner = math.log2(L / f)
    root = math.sqrt(inner) if inner > 0 else 0.0
    return min(n // f + 1, root)


def eps_bound(n: int, eps: float) -> float:
    """``min(floor(n/2) + 1, sqrt(log2(log3(1/eps)) - 2))``; 0 when the root is not real."""
    _need(n >= 2 and 0 < eps < 1, f"need n >= 2 and 0 < eps < 1, got n={n}, eps={eps}")
    inner = math.log2(math.log(1 / eps, 3)) - 2 if eps < 1 / 3 else -1.0
    root = math.sqrt(inner) if inner > 0 else 0.0
    return min(n // 2 + 1, root)


@dataclass
class BoundsReport:
    m: int
    f: int
    a: dict[int, int] = field(default_factory=dict)
    b: dict[int, int] = field(default_factory=dict)
    b_closed: dict[int, int] = field(default_factory=dict)
    step_bound: int = 0
    space: dict[str, float] = field(default_factory=dict)


def bounds(m: int, f: int, *, n: int | None = None, k: int | None = None, x: int | None = None,
           eps: float | None = None, L: float | None = None) -> BoundsReport:
    """Tables of ``a`` and ``b`` plus whichever space bounds the parameters allow."""
    _need(m >= 1 and f >= 1, f"need m >= 1 and f >= 1, got m={m}, f={f}")
    rep = BoundsReport(m, f)
    rep.a = {r: a(r, m) for r in range(1, m + 1)}
    rep.b = {i: b(i, m) for i in range(1, f + 1)}
    rep.b_closed = {i: b_closed(i, m) for i in range(1, f + 1)}
    rep.step_bound = step_bound(f, m)
    if n is not None:
        if k is not None and x is not None:
            rep.space["kset"] = kset_bound(n, k, x)
        if x is not None and x < f <= n:
            rep.space["xof"] = xof_bound(n, f, x)
        if eps is not None:
            rep.space["eps"] = eps_bound(n, eps)
        if L is not None:
            rep.space["steps"] = step_lower_bound_bound(n, f, L)
    return rep
