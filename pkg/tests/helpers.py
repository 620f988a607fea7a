"""Random instances shared by the test modules."""
from __future__ import annotations

import csv
from fractions import Fraction
from pathlib import Path

import numpy as np

from kwrace.angles import AngleSystem, Mode
from kwrace.density import RaceFunctions
from kwrace.laurent import LaurentPoly

DATA = Path(__file__).parent / "data"
SQRTS = (2, 3, 5, 7, 11, 13)


def frozen_counts() -> dict:
    with open(DATA / "counts_q7.csv") as fh:
        return {int(row["n"]): {k: int(v) for k, v in row.items()} for row in csv.DictReader(fh)}


def _frac(x: Fraction) -> str:
    return f"({x.numerator}/{x.denominator})"


def random_angles(rng: np.random.Generator, r: int, n_rel: int, mode=Mode.DISCRETE) -> tuple[AngleSystem, list]:
    """r angles, the last ``n_rel`` of them planted as rational combinations of
    the others plus a rational multiple of 2 pi (discrete mode only)."""
    m = r - n_rel
    roots = rng.choice(SQRTS, size=m, replace=False)
    exprs = []
    for p in roots:
        k = Fraction(int(rng.integers(1, 8)), int(rng.integers(1, 6)))
        exprs.append(f"sqrt({p})*{_frac(k)}")
    planted = []
    for _ in range(n_rel):
        coeffs = [Fraction(int(rng.integers(-2, 3)), int(rng.integers(1, 4))) for _ in range(m)]
        if not any(coeffs):
            coeffs[0] = Fraction(1)
        shift = Fraction(int(rng.integers(0, 6)), 6) if mode is Mode.DISCRETE else Fraction(0)
        parts = [f"{_frac(c)}*({exprs[k]})" for k, c in enumerate(coeffs) if c]
        if shift:
            parts.append(f"2*pi*{_frac(shift)}")
        exprs.append(" + ".join(parts))
        planted.append((coeffs, shift))
    return AngleSystem.parse(exprs, mode), planted


def degenerate_angles(rng: np.random.Generator, r: int) -> AngleSystem:
    return AngleSystem.parse([f"pi*{int(rng.integers(1, 12))}/{int(rng.integers(1, 7))}" for _ in range(r)])


def random_poly(rng: np.random.Generator, r: int, n_terms: int = 3, max_deg: int = 2, const: bool = True) -> LaurentPoly:
    f = LaurentPoly.constant(r, float(rng.normal()) if const else 0.0)
    for _ in range(n_terms):
        e = tuple(int(x) for x in rng.integers(-max_deg, max_deg + 1, size=r))
        if not any(e):
            continue
        a = complex(rng.normal(), rng.normal())
        f = f + LaurentPoly.cosine(r, e, a)
    return f


def random_race(rng: np.random.Generator, r: int, D: int = 2) -> RaceFunctions:
    return RaceFunctions(tuple(random_poly(rng, r) for _ in range(D)))


def degree_one(rng: np.random.Generator, r: int) -> LaurentPoly:
    f = LaurentPoly.constant(r, float(rng.normal()))
    for k in range(r):
        e = [0] * r
        e[k] = 1
        f = f + LaurentPoly.cosine(r, e, complex(rng.normal(), rng.normal()))
    return f
