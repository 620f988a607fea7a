"""Ground truth for races over K = F_p(t): count places by degree and
Frobenius class, and compare the counts with the explicit formula."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import fastcount, gfpoly
from .errors import AmbiguousPattern, InputError, UnsupportedField
from .ffrace import RaceSpec, angles_from_spec, explicit_coeffs

RAMIFIED = "Ramified"


def _check_prime(q: int):
    if len(gfpoly.prime_factors(q)) != 1 or gfpoly.prime_factors(q)[0] != q:
        raise UnsupportedField(f"q = {q}: only prime fields are supported")


def count_places(q: int, n_max: int) -> dict[int, int]:
    """pi_K(n) for n = 1..n_max: monic irreducibles plus the infinite place at n = 1."""
    _check_prime(q)
    return {n: gfpoly.necklace(n, q) + (1 if n == 1 else 0) for n in range(1, n_max + 1)}


def count_places_bruteforce(q: int, n: int) -> int:
    _check_prime(q)
    return sum(1 for _ in gfpoly.monic_irreducibles(n, q)) + (1 if n == 1 else 0)


def _pattern_map(spec: RaceSpec) -> dict:
    if spec.frobenius_patterns is None:
        raise AmbiguousPattern("spec declares no factorisation patterns for its classes")
    if spec.defining_poly is None:
        raise InputError("spec has no defining polynomial")
    return {tuple(v): k for k, v in spec.frobenius_patterns.items()}


def frobenius_class(P, spec: RaceSpec) -> str:
    """Class of Frob_P read from the factorisation pattern of the defining polynomial mod P."""
    pats = _pattern_map(spec)
    _check_prime(spec.q)
    if not gfpoly.is_irreducible(gfpoly.trim(P, spec.q), spec.q):
        raise InputError(f"{P} is not irreducible mod {spec.q}")
    K = gfpoly.ResidueField(tuple(P), spec.q, check=False)
    F = gfpoly.xpoly_reduce(spec.defining_poly, K)
    if len(F) != len(spec.defining_poly) or F[-1] != (1,):
        raise InputError("defining polynomial must be monic in X")
    degs = gfpoly.factor_degrees(F, K)
    if degs is None:
        return RAMIFIED
    try:
        return pats[tuple(degs)]
    except KeyError:
        raise AmbiguousPattern(f"pattern {degs} matches no declared class") from None


@dataclass
class PrimeCountTable:
    """Per degree n: pi_K(n), pi_C(n) per class, ramified finite places and
    the infinite place (excluded from every pi_C)."""

    q: int
    classes: tuple
    n_max: int
    pi_K: dict = field(default_factory=dict)
    pi_C: dict = field(default_factory=dict)
    ramified: dict = field(default_factory=dict)
    infinite: dict = field(default_factory=dict)
    excluded: list = field(default_factory=list)
    method: dict = field(default_factory=dict)

    def check(self):
        for n in range(1, self.n_max + 1):
            total = sum(self.pi_C[n].values()) + self.ramified[n] + self.infinite[n]
            if total != self.pi_K[n] or min(self.pi_C[n].values(), default=0) < 0:
                raise AssertionError(f"degree {n}: classified {total} places, pi_K = {self.pi_K[n]}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "pi_K"] + [f"pi_{c}" for c in self.classes] + ["ramified", "infinite", "method"])
        for n in range(1, self.n_max + 1):
            w.writerow([n, self.pi_K[n]] + [self.pi_C[n][c] for c in self.classes]
                       + [self.ramified[n], self.infinite[n], self.method[n]])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "q": self.q, "n_max": self.n_max, "classes": list(self.classes),
            "rows": [{"n": n, "pi_K": self.pi_K[n], "pi_C": self.pi_C[n], "ramified": self.ramified[n],
                      "infinite": self.infinite[n]} for n in range(1, self.n_max + 1)],
        }


def _count_generic(spec: RaceSpec, n: int, table: PrimeCountTable):
    counts = {c: 0 for c in spec.class_names}
    ram = 0
    for P in gfpoly.monic_irreducibles(n, spec.q):
        cls = frobenius_class(P, spec)
        if cls == RAMIFIED:
            ram += 1
            table.excluded.append((n, P))
        else:
            counts[cls] += 1
    return counts, ram


def count_classes(spec: RaceSpec, n_max: int, fast: bool = True, generic_max: int = 4) -> PrimeCountTable:
    """Count unramified places of each degree by Frobenius class.

    Degrees up to ``generic_max`` (and every degree when the defining
    polynomial has no fast path) use distinct-degree factorisation; larger
    degrees use the discrete-log kernel of :mod:`kwrace.fastcount`.
    """
    _check_prime(spec.q)
    pats = _pattern_map(spec)
    q = spec.q
    table = PrimeCountTable(q, spec.class_names, n_max)
    use_fast = fast and fastcount.supports(q, spec.defining_poly)
    pi_K = count_places(q, n_max) if n_max >= 1 else {}
    for n in range(1, n_max + 1):
        if use_fast and n > generic_max and n >= 2:
            raw, ram, places = fastcount.count_patterns(q, n, spec.defining_poly)
            if places != gfpoly.necklace(n, q):
                raise AssertionError(f"fast path visited {places} places of degree {n}")
            counts = {c: 0 for c in spec.class_names}
            for pat, cnt in raw.items():
                if pat not in pats:
                    raise AmbiguousPattern(f"pattern {list(pat)} matches no declared class")
                counts[pats[pat]] += cnt
            table.method[n] = "discrete-log"
        else:
            counts, ram = _count_generic(spec, n, table)
            table.method[n] = "factorisation"
        table.pi_K[n] = pi_K[n]
        table.pi_C[n] = counts
        table.ramified[n] = ram
        table.infinite[n] = 1 if n == 1 else 0
    table.check()
    return table


@dataclass(frozen=True)
class ResidualRow:
    n: int
    cls: str
    lhs: float
    rhs: float
    residual: float
    bound: float | None

    @property
    def ok(self) -> bool:
        return self.bound is None or self.residual <= self.bound


def formula_value(spec: RaceSpec, cls: str, n: int, coeffs=None, thetas=None) -> float:
    """r_C + z_C + a_pi(C)(-1)^n - sum_j 2 Re(a_j(C) e^{i theta_j n})."""
    if coeffs is None or thetas is None:
        sys, reg = angles_from_spec(spec)
        coeffs = explicit_coeffs(spec, reg)
        thetas = [float(t) for t in reg.thetas]
    cc = coeffs.classes[cls]
    val = float(cc.r) + cc.z + cc.a_pi * (-1) ** n
    for a, t in zip(cc.a, thetas):
        val -= 2 * (a * np.exp(1j * t * n)).real
    return val


def normalised_count(spec: RaceSpec, table: PrimeCountTable, cls: str, n: int) -> float:
    q = spec.q
    return n / q ** (n / 2) * (spec.order / spec.size(cls) * table.pi_C[n][cls] - table.pi_K[n])


def residual_check(spec: RaceSpec, table: PrimeCountTable, n_range, constant: float | None = None) -> list[ResidualRow]:
    """|lhs - rhs| per degree and class, with bound C q^{-n/6} if a constant is known."""
    C = spec.residual_constant if constant is None else constant
    sys, reg = angles_from_spec(spec)
    coeffs = explicit_coeffs(spec, reg)
    thetas = [float(t) for t in reg.thetas]
    rows = []
    for n in n_range:
        if n not in table.pi_K:
            raise InputError(f"degree {n} is outside the counted range")
        for c in spec.class_names:
            lhs = normalised_count(spec, table, c, n)
            rhs = formula_value(spec, c, n, coeffs, thetas)
            bound = None if C is None else C * spec.q ** (-n / 6)
            rows.append(ResidualRow(n, c, lhs, rhs, abs(lhs - rhs), bound))
    return rows


def residuals_csv(rows: list[ResidualRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "class", "lhs", "rhs", "residual", "bound", "ok"])
    for r in rows:
        w.writerow([r.n, r.cls, repr(float(r.lhs)), repr(float(r.rhs)), repr(float(r.residual)),
                    "" if r.bound is None else repr(float(r.bound)), int(r.ok)])
    return buf.getvalue()
