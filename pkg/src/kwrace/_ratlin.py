"""Exact linear algebra over Q on lists of Fractions."""
from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Sequence


def primitive(v: Sequence[int]) -> list[int]:
    """Divide by the gcd and make the last nonzero entry positive."""
    g = 0
    for x in v:
        g = gcd(g, int(x))
    if g == 0:
        return [0] * len(v)
    out = [int(x) // g for x in v]
    for x in reversed(out):
        if x != 0:
            if x < 0:
                out = [-y for y in out]
            break
    return out


def last_pivot_form(rows: Sequence[Sequence], ncols: int) -> dict[int, list[Fraction]]:
    """Row-reduce so that every row is indexed by its last nonzero column.

    Returns ``{pivot: row}`` where ``row[pivot] == 1`` and each row vanishes
    on the other pivot columns.  Pivots are found scanning columns from the
    highest index down, which realises greedy basis selection by ascending
    index: a column is a pivot iff it is dependent on the columns before it.
    """
    work = [[Fraction(x) for x in r] for r in rows]
    for r in work:
        if len(r) != ncols:
            raise ValueError("row length mismatch")
    pivots: dict[int, list[Fraction]] = {}
    remaining = [r for r in work if any(r)]
    for col in range(ncols - 1, -1, -1):
        idx = next((i for i, r in enumerate(remaining) if r[col] != 0), None)
        if idx is None:
            continue
        piv = remaining.pop(idx)
        # only rows whose support stays within columns <= col are eligible
        if any(piv[c] != 0 for c in range(col + 1, ncols) if c not in pivots):
            raise AssertionError("unexpected support above pivot")
        inv = 1 / piv[col]
        piv = [x * inv for x in piv]
        new_remaining = []
        for r in remaining:
            if r[col] != 0:
                f = r[col]
                r = [a - f * b for a, b in zip(r, piv)]
            if any(r):
                new_remaining.append(r)
        remaining = new_remaining
        for p, prow in pivots.items():
            if prow[col] != 0:
                f = prow[col]
                pivots[p] = [a - f * b for a, b in zip(prow, piv)]
        pivots[col] = piv
    return pivots


def rank(rows: Sequence[Sequence]) -> int:
    """Rank over Q."""
    work = [[Fraction(x) for x in r] for r in rows if any(r)]
    if not work:
        return 0
    ncols = len(work[0])
    rk = 0
    for col in range(ncols):
        idx = next((i for i in range(rk, len(work)) if work[i][col] != 0), None)
        if idx is None:
            continue
        work[rk], work[idx] = work[idx], work[rk]
        piv = work[rk]
        for i in range(len(work)):
            if i != rk and work[i][col] != 0:
                f = work[i][col] / piv[col]
                work[i] = [a - f * b for a, b in zip(work[i], piv)]
        rk += 1
        if rk == len(work):
            break
    return rk


def in_row_space(v: Sequence, rows: Sequence[Sequence]) -> bool:
    return rank(list(rows) + [list(v)]) == rank(rows)


def lcm_denominators(values) -> int:
    d = 1
    for x in values:
        den = Fraction(x).denominator
        d = d * den // gcd(d, den)
    return d
