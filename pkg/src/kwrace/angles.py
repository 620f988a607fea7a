"""Integer relations among angles and the explicit description of orbit closures.

An orbit ``n -> (e^{i theta_1 n}, ..., e^{i theta_r n})`` is equidistributed in a
finite union of translates of a subtorus.  Everything here is computed from
the rational relations among ``(2 pi, theta_1, ..., theta_r)`` (discrete
orbits) or among ``(theta_1, ..., theta_r)`` (continuous orbits):

* :func:`detect_relations` finds and certifies integer relations (PSLQ at a
  working precision, then re-verification);
* :func:`extract_closure` solves the relations exactly over Q and returns the
  integers ``d`` and ``h_{k,j}`` that parametrise the closure.
"""
from __future__ import annotations

import ast
import enum
import numbers
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
from mpmath import mp, mpf

from . import _ratlin
from .errors import DimensionMismatch, InconsistentLattice, InputError, PrecisionTooLow

DEFAULT_PRECISION = 256
DEFAULT_MAX_COEFF = 10**4
_GUARD_BITS = 64


class Mode(str, enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


# --------------------------------------------------------------------------
# parsing

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {
    "sqrt": mpmath.sqrt,
    "exp": mpmath.exp,
    "log": mpmath.log,
    "cos": mpmath.cos,
    "sin": mpmath.sin,
    "tan": mpmath.tan,
    "atan": mpmath.atan,
    "atan2": mpmath.atan2,
    "acos": mpmath.acos,
    "asin": mpmath.asin,
    "arg": mpmath.arg,
}


def eval_expr(text: str | int | float, prec: int) -> mpf:
    """Evaluate a small arithmetic expression (``"-1/2"``, ``"sqrt(3)"``,
    ``"2*pi/3"``...) at ``prec`` bits.  Plain decimal strings keep all digits."""
    if isinstance(text, numbers.Real) and not isinstance(text, mpf):
        text = str(int(text)) if isinstance(text, numbers.Integral) else repr(float(text))
    with mp.workprec(prec):
        try:
            tree = ast.parse(str(text).strip(), mode="eval")
        except SyntaxError as exc:
            raise InputError(f"cannot parse number {text!r}") from exc
        return +_eval_node(tree.body)


def _eval_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        # re-read floats from their source text so long decimals keep precision
        return mpf(node.value) if isinstance(node.value, int) else mpf(repr(node.value))
    if isinstance(node, ast.Name):
        if node.id == "pi":
            return +mp.pi
        if node.id == "e":
            return +mp.e
        raise InputError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        return _FUNCS[node.func.id](*[_eval_node(a) for a in node.args])
    raise InputError(f"unsupported expression element {ast.dump(node)}")


def _parse_decimal(text: str, prec: int) -> mpf:
    with mp.workprec(prec):
        try:
            return mpf(text)
        except (ValueError, TypeError):
            return eval_expr(text, prec)


def parse_angle(item, prec: int = DEFAULT_PRECISION + _GUARD_BITS) -> mpf:
    """Angle from a decimal string, ``{"pi_multiple": "p/q"}`` or
    ``{"arg_of": {"re": ..., "im": ...}}``."""
    if isinstance(item, dict):
        if "pi_multiple" in item:
            frac = Fraction(str(item["pi_multiple"]))
            with mp.workprec(prec):
                return mp.pi * frac.numerator / frac.denominator
        if "arg_of" in item:
            z = item["arg_of"]
            if isinstance(z, dict):
                re, im = z.get("re", "0"), z.get("im", "0")
            else:
                re, im = z
            with mp.workprec(prec):
                return mpmath.atan2(eval_expr(im, prec), eval_expr(re, prec))
        raise InputError(f"unrecognised angle object {item!r}")
    if isinstance(item, numbers.Real) and not isinstance(item, mpf):
        return _parse_decimal(str(int(item)) if isinstance(item, numbers.Integral) else repr(float(item)), prec)
    if isinstance(item, str):
        return _parse_decimal(item, prec)
    raise InputError(f"unrecognised angle {item!r}")


# --------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class AngleSystem:
    """Angles theta_1..theta_r (radians, arbitrary precision)."""

    angles: tuple
    mode: Mode = Mode.DISCRETE
    prec: int = DEFAULT_PRECISION + _GUARD_BITS

    def __post_init__(self):
        with mp.workprec(self.prec):
            vals = tuple(mpf(a) for a in self.angles)
        if not vals:
            raise InputError("an angle system needs at least one angle")
        for a in vals:
            if not mpmath.isfinite(a):
                raise InputError("angles must be finite")
        object.__setattr__(self, "angles", vals)
        object.__setattr__(self, "mode", Mode(self.mode))

    @classmethod
    def parse(cls, items: Iterable, mode=Mode.DISCRETE, prec: int = DEFAULT_PRECISION + _GUARD_BITS):
        return cls(tuple(parse_angle(x, prec) for x in items), Mode(mode), prec)

    @property
    def r(self) -> int:
        return len(self.angles)

    @property
    def discrete(self) -> bool:
        return self.mode is Mode.DISCRETE

    def floats(self):
        import numpy as np

        return np.array([float(a) for a in self.angles])

    def slots(self) -> list:
        """Values the relations act on: ``(2 pi, theta...)`` or ``(theta...)``."""
        with mp.workprec(self.prec):
            return ([2 * mp.pi] if self.discrete else []) + list(self.angles)


@dataclass(frozen=True)
class RelationLattice:
    """Verified integer relations.  In discrete mode entry 0 multiplies 2 pi."""

    relations: tuple
    precision_bits: int
    max_coeff: int
    mode: Mode = Mode.DISCRETE
    source: str = "detected"

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(tuple(int(x) for x in v) for v in self.relations))

    @property
    def rank(self) -> int:
        return len(self.relations)

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "relations": [list(v) for v in self.relations],
            "precision_bits": self.precision_bits,
            "max_coeff": self.max_coeff,
            "source": self.source,
        }

    @classmethod
    def declared(cls, sys: AngleSystem, relations: Sequence[Sequence[int]] = (),
                 precision_bits: int = DEFAULT_PRECISION) -> "RelationLattice":
        """Lattice from relations known a priori (e.g. independence proved by
        hand).  Every supplied relation is still verified numerically."""
        rels = [_ratlin.primitive(v) for v in relations]
        for v in rels:
            if not verify_relation(sys, v, precision_bits):
                raise InconsistentLattice(f"declared relation {v} does not hold")
        if _ratlin.rank(rels) != len(rels):
            raise InputError("declared relations are linearly dependent")
        return cls(tuple(rels), precision_bits, 0, sys.mode, source="declared")


@dataclass(frozen=True)
class ClosureDescription:
    """Explicit model of the orbit closure  U_a nu^a H.

    Indices are 0-based angle indices.  ``c[j]`` and ``b[(k, j)]`` express each
    dependent angle as ``theta_j = 2 pi c_j + sum_k b_{k,j} theta_k``.
    """

    system: AngleSystem
    basis: tuple
    c: dict
    b: dict
    d: int
    h: dict
    l: dict
    nu: tuple
    degenerate: bool

    @property
    def r(self) -> int:
        return self.system.r

    @property
    def m(self) -> int:
        return len(self.basis)

    @property
    def mode(self) -> Mode:
        return self.system.mode

    @property
    def dependent(self) -> tuple:
        return tuple(j for j in range(self.r) if j not in self.basis)

    @property
    def cosets(self) -> range:
        """Coset indices a of nu^a H (a single coset for continuous orbits)."""
        return range(self.d) if self.system.discrete else range(1)

    def h_matrix(self):
        """Integer r x m matrix E with H = {z^E} (coordinate j = prod_k z_k^{E[j,k]})."""
        import numpy as np

        E = np.zeros((self.r, self.m), dtype=np.int64)
        for col, k in enumerate(self.basis):
            E[k, col] = self.d
        for j in self.dependent:
            for col, k in enumerate(self.basis):
                E[j, col] = self.h[(k, j)]
        return E

    def coset_phases(self, a: int):
        """Phases of nu^a reduced to [0, 2 pi), as floats."""
        import numpy as np

        if not self.system.discrete:
            return np.zeros(self.r)
        with mp.workprec(self.system.prec):
            twopi = 2 * mp.pi
            return np.array([float(mpmath.fmod(a * t, twopi)) for t in self.system.angles])

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "basis": [k + 1 for k in self.basis],
            "m": self.m,
            "d": self.d,
            "c": {str(j + 1): str(v) for j, v in self.c.items()},
            "b": {f"{k + 1},{j + 1}": str(v) for (k, j), v in self.b.items()},
            "h": {f"{k + 1},{j + 1}": v for (k, j), v in self.h.items()},
            "l": {str(j + 1): v for j, v in self.l.items()},
            "degenerate": self.degenerate,
        }


# --------------------------------------------------------------------------
# operations


def _scale(sys: AngleSystem):
    with mp.workprec(sys.prec):
        m = max(abs(a) for a in sys.angles)
        return max(m, 2 * mp.pi) if sys.discrete else max(m, mpf(1))


def relation_residual(sys: AngleSystem, v: Sequence[int], precision_bits: int) -> mpf:
    """|v . slots| / (||v||_1 * scale), evaluated at ``precision_bits``."""
    slots = sys.slots()
    if len(v) != len(slots):
        raise DimensionMismatch(f"relation has length {len(v)}, expected {len(slots)}")
    with mp.workprec(precision_bits + _GUARD_BITS):
        norm1 = sum(abs(int(x)) for x in v)
        if norm1 == 0:
            return mpf(0)
        s = mpmath.fsum(int(x) * y for x, y in zip(v, slots))
        return abs(s) / (norm1 * _scale(sys))


def verify_relation(sys: AngleSystem, v: Sequence[int], precision_bits: int = DEFAULT_PRECISION) -> bool:
    """True iff v annihilates the (2 pi, theta) vector up to 2^(-p/2) relative error."""
    return relation_residual(sys, v, precision_bits) <= mpf(2) ** (-(precision_bits // 2))


def detect_relations(sys: AngleSystem, max_coeff: int = DEFAULT_MAX_COEFF,
                     precision_bits: int = DEFAULT_PRECISION) -> RelationLattice:
    """Find integer relations with coefficients <= ``max_coeff``.

    Slots are scanned in order; each one is tested against the slots kept so
    far with PSLQ, so the returned relations have distinct last entries and
    are linearly independent.  Candidates are re-verified; a residual in the
    band [2^(-p/2), 2^(-p/4)] cannot be classified and raises PrecisionTooLow.
    """
    if precision_bits < 128:
        raise PrecisionTooLow("precision_bits must be >= 128")
    if max_coeff < 1:
        raise InputError("max_coeff must be >= 1")
    if sys.prec < precision_bits:
        raise PrecisionTooLow(f"angles only carry {sys.prec} bits")
    slots = sys.slots()
    accept = mpf(2) ** (-(precision_bits // 2))
    reject = mpf(2) ** (-(precision_bits // 4))
    kept: list[int] = []
    relations: list[list[int]] = []
    with mp.workprec(precision_bits):
        for idx, x in enumerate(slots):
            if abs(x) < accept:
                rel = [0] * len(slots)
                rel[idx] = 1
                relations.append(rel)
                continue
            if not kept:
                kept.append(idx)
                continue
            # each extra dimension costs about log2(max_coeff) bits of certainty
            if (len(kept) + 1) * max_coeff.bit_length() * 2 > precision_bits:
                raise PrecisionTooLow(
                    f"{precision_bits} bits cannot certify relations of length {len(kept) + 1} "
                    f"with coefficients up to {max_coeff}"
                )
            vec = [slots[i] for i in kept] + [x]
            cand = mp.pslq(vec, tol=accept, maxcoeff=max_coeff, maxsteps=20000)
            if cand is None or cand[-1] == 0:
                kept.append(idx)
                continue
            full = [0] * len(slots)
            for i, cf in zip(kept + [idx], cand):
                full[i] = int(cf)
            full = _ratlin.primitive(full)
            res = relation_residual(sys, full, precision_bits)
            if res <= accept:
                relations.append(full)
            elif res < reject:
                raise PrecisionTooLow(f"relation {full} has ambiguous residual {mpmath.nstr(res, 5)}")
            else:
                kept.append(idx)
    return RelationLattice(tuple(relations), precision_bits, max_coeff, sys.mode)


def extract_closure(sys: AngleSystem, lat: RelationLattice) -> ClosureDescription:
    """Solve the relations over Q and build the closure data (basis, c, b, d, h, l, nu)."""
    offset = 1 if sys.discrete else 0
    ncols = sys.r + offset
    for v in lat.relations:
        if len(v) != ncols:
            raise DimensionMismatch("lattice does not match the angle system")
    try:
        piv = _ratlin.last_pivot_form(lat.relations, ncols)
    except AssertionError as exc:
        raise InconsistentLattice(str(exc)) from exc
    if offset and 0 in piv:
        raise InconsistentLattice("a relation forces 2 pi = 0")
    dependent = sorted(p - offset for p in piv)
    basis = tuple(k for k in range(sys.r) if k not in dependent)
    c: dict[int, Fraction] = {}
    b: dict[tuple[int, int], Fraction] = {}
    for j in dependent:
        row = piv[j + offset]
        c[j] = -row[0] if offset else Fraction(0)
        for k in basis:
            b[(k, j)] = -row[k + offset]
    d = _ratlin.lcm_denominators(list(c.values()) + list(b.values()))
    h = {kj: int(v * d) for kj, v in b.items()}
    l = {j: int(v * d) for j, v in c.items()}
    # round-trip check
    with mp.workprec(sys.prec):
        twopi = 2 * mp.pi
        tol = mpf(2) ** (-(lat.precision_bits // 2) + 8) * _scale(sys)
        for j in dependent:
            rebuilt = twopi * mpf(c[j].numerator) / c[j].denominator + mpmath.fsum(
                mpf(b[(k, j)].numerator) / b[(k, j)].denominator * sys.angles[k] for k in basis
            )
            if abs(rebuilt - sys.angles[j]) > tol:
                raise InconsistentLattice(f"angle {j + 1} is not reproduced by the relations")
        nu = tuple(complex(mpmath.expj(t)) for t in sys.angles)
    degenerate = sys.discrete and not basis
    return ClosureDescription(sys, basis, c, b, d, h, l, nu, degenerate)


def closure_from_system(sys: AngleSystem, max_coeff: int = DEFAULT_MAX_COEFF,
                        precision_bits: int = DEFAULT_PRECISION):
    """Convenience: detect then extract.  Returns ``(lattice, closure)``."""
    lat = detect_relations(sys, max_coeff, precision_bits)
    return lat, extract_closure(sys, lat)


def pi_rational_indices(lat: RelationLattice, r: int) -> set[int]:
    """0-based indices i with theta_i in pi Q, read off the lattice (discrete mode)."""
    if lat.mode is not Mode.DISCRETE:
        return set()
    out = set()
    for i in range(r):
        target = [0] * (r + 1)
        target[i + 1] = 1
        # theta_i in pi Q iff e_i lies in span(relations) + Q e_0
        rows = list(lat.relations) + [[1] + [0] * r]
        if _ratlin.in_row_space(target, rows):
            out.add(i)
    return out
