"""Sparse Laurent polynomials on the r-torus and the witness search for
coset vanishing."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from mpmath import mp

from .angles import AngleSystem, ClosureDescription
from .errors import DimensionMismatch, InputError, NotRealOnTorus

_SYM_TOL = 1e-12


def _as_key(e) -> tuple:
    return tuple(int(x) for x in e)


@dataclass(frozen=True, eq=False)
class LaurentPoly:
    """``sum_e a_e X^e`` stored as ``{exponent tuple: complex coefficient}``."""

    r: int
    terms: Mapping

    def __post_init__(self):
        clean = {}
        for e, a in dict(self.terms).items():
            key = _as_key(e)
            if len(key) != self.r:
                raise DimensionMismatch(f"exponent {key} has length {len(key)}, expected {self.r}")
            a = complex(a)
            if a != 0:
                clean[key] = clean.get(key, 0) + a
        object.__setattr__(self, "terms", {k: v for k, v in clean.items() if v != 0})

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, r: int, c) -> "LaurentPoly":
        return cls(r, {(0,) * r: c})

    @classmethod
    def monomial(cls, r: int, e, a=1.0) -> "LaurentPoly":
        return cls(r, {_as_key(e): a})

    @classmethod
    def cosine(cls, r: int, e, a=1.0) -> "LaurentPoly":
        """``a X^e + conj(a) X^-e``, i.e. ``2 Re(a z^e)`` on the torus."""
        e = _as_key(e)
        a = complex(a)
        if all(x == 0 for x in e):
            return cls.constant(r, 2 * a.real)
        return cls(r, {e: a, tuple(-x for x in e): a.conjugate()})

    @classmethod
    def from_json(cls, items, r: int | None = None, check_real: bool = True) -> "LaurentPoly":
        terms = {}
        for it in items:
            e = _as_key(it["exponents"])
            if r is None:
                r = len(e)
            a = complex(float(it.get("re", 0)), float(it.get("im", 0)))
            terms[e] = terms.get(e, 0) + a
        if r is None:
            raise InputError("cannot infer arity of an empty polynomial; give r")
        p = cls(r, terms)
        if check_real and not p.is_real():
            raise NotRealOnTorus("coefficients are not conjugate-symmetric")
        return p

    def to_json(self) -> list:
        return [
            {"exponents": list(e), "re": repr(float(a.real)), "im": repr(float(a.imag))}
            for e, a in sorted(self.terms.items())
        ]

    # algebra ------------------------------------------------------------
    def _check(self, other: "LaurentPoly"):
        if other.r != self.r:
            raise DimensionMismatch("arity mismatch")

    def __add__(self, other):
        if not isinstance(other, LaurentPoly):
            other = LaurentPoly.constant(self.r, other)
        self._check(other)
        t = dict(self.terms)
        for e, a in other.terms.items():
            t[e] = t.get(e, 0) + a
        return LaurentPoly(self.r, t)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPoly(self.r, {e: -a for e, a in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, LaurentPoly):
            other = LaurentPoly.constant(self.r, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, LaurentPoly):
            return LaurentPoly(self.r, {e: a * other for e, a in self.terms.items()})
        self._check(other)
        t: dict = {}
        for e1, a1 in self.terms.items():
            for e2, a2 in other.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                t[e] = t.get(e, 0) + a1 * a2
        return LaurentPoly(self.r, t)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, LaurentPoly) and self.r == other.r and self.terms == other.terms

    def __repr__(self):
        return f"LaurentPoly(r={self.r}, terms={self.terms!r})"

    def shift(self, e) -> "LaurentPoly":
        """Multiply by the monomial X^e."""
        e = _as_key(e)
        return LaurentPoly(self.r, {tuple(x + y for x, y in zip(k, e)): a for k, a in self.terms.items()})

    # properties ---------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return all(all(x == 0 for x in e) for e in self.terms)

    @property
    def constant_term(self) -> complex:
        return self.terms.get((0,) * self.r, 0j)

    def l1(self) -> float:
        return float(sum(abs(a) for a in self.terms.values()))

    def total_degree(self) -> int:
        return max((sum(abs(x) for x in e) for e in self.terms), default=0)

    def is_real(self) -> bool:
        for e, a in self.terms.items():
            b = self.terms.get(tuple(-x for x in e), 0)
            if abs(b - a.conjugate()) > _SYM_TOL * (1 + abs(a)):
                return False
        return True

    def arrays(self):
        """``(E, A)``: T x r integer exponents and T complex coefficients."""
        if not self.terms:
            return np.zeros((0, self.r), dtype=np.int64), np.zeros(0, dtype=complex)
        keys = sorted(self.terms)
        return np.array(keys, dtype=np.int64).reshape(len(keys), self.r), np.array(
            [self.terms[k] for k in keys], dtype=complex
        )

    def imag_tol(self) -> float:
        return 2.0**-30 * (1 + self.l1())

    # evaluation ---------------------------------------------------------
    def eval_phases_complex(self, phases) -> np.ndarray:
        """Complex values at torus points given by their angles (shape (..., r))."""
        phases = np.asarray(phases, dtype=float)
        if phases.shape[-1] != self.r:
            raise DimensionMismatch("point arity mismatch")
        E, A = self.arrays()
        if len(A) == 0:
            return np.zeros(phases.shape[:-1], dtype=complex)
        return np.exp(1j * (phases @ E.T.astype(float))) @ A

    def eval_phases(self, phases) -> np.ndarray:
        vals = self.eval_phases_complex(phases)
        if np.any(np.abs(vals.imag) > self.imag_tol()):
            raise NotRealOnTorus("imaginary part above tolerance")
        return vals.real

    def eval_complex(self, z) -> complex | np.ndarray:
        """Complex value at torus point(s) z (shape (..., r), complex)."""
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != self.r:
            raise DimensionMismatch("point arity mismatch")
        E, A = self.arrays()
        out = np.zeros(z.shape[:-1], dtype=complex)
        for e, a in zip(E, A):
            out = out + a * np.prod(z ** e, axis=-1)
        return out[()] if out.ndim == 0 else out


def evaluate(f: LaurentPoly, z) -> float | np.ndarray:
    """Real value of a real-on-torus polynomial at torus point(s) z."""
    vals = np.asarray(f.eval_complex(z))
    if np.any(np.abs(vals.imag) > f.imag_tol()):
        raise NotRealOnTorus("imaginary part above tolerance")
    out = vals.real
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=64)
def _turns_fixed(sys: AngleSystem) -> np.ndarray:
    """theta_k / 2 pi mod 1 as 64-bit fixed point."""
    with mp.workprec(sys.prec):
        vals = [int(mp.floor(mp.frac(t / (2 * mp.pi)) * 2**64)) % 2**64 for t in sys.angles]
    return np.array(vals, dtype=np.uint64)


def orbit_phases(sys_or_angles, n) -> np.ndarray:
    """Phases ``theta_k * n mod 2 pi`` for scalar or array n.

    For an AngleSystem and integer n the reduction is done in exact 64-bit
    fixed-point turns, so the phase error stays near 2^-64 * |n| turns
    instead of growing with the float rounding of theta * n."""
    n = np.asarray(n)
    if isinstance(sys_or_angles, AngleSystem):
        if n.dtype.kind in "iu" or (n.size and np.all(n == np.round(n)) and np.all(np.abs(n) < 2**62)):
            ni = n.astype(np.int64).astype(np.uint64)
            with np.errstate(over="ignore"):
                t = np.multiply.outer(ni, _turns_fixed(sys_or_angles))
            return (t >> np.uint64(11)).astype(np.float64) * (2 * np.pi / 2.0**53)
        theta = sys_or_angles.floats()
    else:
        theta = np.asarray(sys_or_angles)
    return np.mod(np.multiply.outer(n.astype(float), theta), 2 * np.pi)


def orbit_value(f: LaurentPoly, sys: AngleSystem, n) -> float | np.ndarray:
    """f(e^{i theta_1 n}, ..., e^{i theta_r n}) for integer or real n."""
    if sys.r != f.r:
        raise DimensionMismatch("arity mismatch")
    out = f.eval_phases(orbit_phases(sys, n))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Witness:
    n: float

    @property
    def found(self) -> bool:
        return True


@dataclass(frozen=True)
class LikelyIdenticallyZero:
    scanned: int

    @property
    def found(self) -> bool:
        return False


def coset_vanishing(f: LaurentPoly, cd: ClosureDescription, a: int, n_max: int | None = None,
                    vanish_tol: float | None = None, block: int = 4096):
    """First n = a (mod d), n <= n_max, with |F(n)| > vanish_tol.

    A witness certifies that f vanishes with probability zero on the coset
    nu^a H.  Failing to find one is only a heuristic flag.
    """
    if not 0 <= a < cd.d:
        raise InputError(f"coset {a} outside 0..{cd.d - 1}")
    if f.r != cd.r:
        raise DimensionMismatch("arity mismatch")
    if n_max is None:
        n_max = 10**4 * cd.d
    tol = f.imag_tol() if vanish_tol is None else vanish_tol
    if f.is_zero:
        return LikelyIdenticallyZero(0)
    ns_all = np.arange(a, n_max + 1, cd.d, dtype=np.int64)
    for start in range(0, len(ns_all), block):
        ns = ns_all[start:start + block]
        vals = np.abs(f.eval_phases_complex(orbit_phases(cd.system, ns)))
        hit = np.nonzero(vals > tol)[0]
        if hit.size:
            return Witness(int(ns[hit[0]]))
    return LikelyIdenticallyZero(len(ns_all))


def frequencies(f: LaurentPoly, theta) -> np.ndarray:
    """Real frequencies <e, theta> of the monomials of f."""
    E, _ = f.arrays()
    return E.astype(float) @ np.asarray(theta, dtype=float)


def default_line_extent(f: LaurentPoly, theta) -> float:
    """10^3 periods of the slowest beat between two frequencies of f."""
    fr = np.unique(np.round(np.abs(frequencies(f, theta)), 12))
    gaps = np.diff(np.concatenate([[0.0], fr]))
    gaps = gaps[gaps > 0]
    if gaps.size == 0:
        return 1.0
    return 1e3 * 2 * np.pi / float(gaps.min())


def line_vanishing(f: LaurentPoly, sys: AngleSystem, y_max: float | None = None, step: float | None = None,
                   vanish_tol: float | None = None, max_points: int = 10**6, block: int = 4096):
    """Continuous analogue of :func:`coset_vanishing`: first grid point y in
    [0, y_max] with |f(e^{i theta y})| > vanish_tol."""
    if f.r != sys.r:
        raise DimensionMismatch("arity mismatch")
    if f.is_zero:
        return LikelyIdenticallyZero(0)
    theta = sys.floats()
    if y_max is None:
        y_max = default_line_extent(f, theta)
    if step is None:
        fmax = float(np.max(np.abs(frequencies(f, theta)), initial=0.0))
        step = 0.1 if fmax == 0 else min(0.1, np.pi / (4 * fmax))
    count = min(int(np.ceil(y_max / step)) + 1, max_points)
    tol = f.imag_tol() if vanish_tol is None else vanish_tol
    for start in range(0, count, block):
        ys = np.arange(start, min(start + block, count), dtype=float) * step
        vals = np.abs(f.eval_phases_complex(orbit_phases(theta, ys)))
        hit = np.nonzero(vals > tol)[0]
        if hit.size:
            return Witness(float(ys[hit[0]]))
    return LikelyIdenticallyZero(count)
