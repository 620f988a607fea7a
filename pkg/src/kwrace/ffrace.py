"""Chebotarev races over function fields: from group and L-polynomial data
to race functions on the torus.

For a Galois extension L/K of function fields over F_q with group G, the
normalised count ``(n / q^{n/2}) (#G/#C pi_C(n) - pi_K(n))`` is, up to o(1),
a trigonometric polynomial in ``e^{i theta_j n}`` and ``e^{i pi n}`` whose
frequencies are the arguments of the inverse zeros of the Artin
L-polynomials.  :func:`build_race` turns that expansion into Laurent
polynomials and the matching orbit closure.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import mpmath
import numpy as np
from mpmath import mp, mpc, mpf

from .angles import (DEFAULT_MAX_COEFF, DEFAULT_PRECISION, AngleSystem, ClosureDescription, Mode,
                     RelationLattice, detect_relations, eval_expr, extract_closure)
from .density import RaceFunctions
from .errors import InputError, MissingZetaNumerator, RHViolation
from .gfpoly import prime_factors
from .laurent import LaurentPoly

SCHEMA_VERSION = 1
DEFAULT_ZERO_TOL = 2.0**-30
_ROOT_PREC = 384


def _parse_entry(x) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(float(eval_expr(x[0], 64)), float(eval_expr(x[1], 64)))
    if isinstance(x, (int, float)):
        return complex(x)
    s = str(x).strip().replace(" ", "")
    try:
        return complex(s.replace("i", "j"))
    except ValueError:
        return complex(float(eval_expr(s, 64)))


def is_prime_power(q: int) -> bool:
    if q < 2:
        return False
    return len(prime_factors(q)) == 1


@dataclass(frozen=True)
class RaceSpec:
    q: int
    class_names: tuple
    class_sizes: tuple
    characters: tuple
    char_table: np.ndarray
    class_square_map: dict
    lpolys: dict
    contestants: tuple
    zeta_numerator: tuple | None = None
    genus_K: int = 0
    defining_poly: tuple | None = None
    frobenius_patterns: dict | None = None
    residual_constant: float | None = None
    name: str = "race"

    def __post_init__(self):
        self.validate()

    # -- construction ------------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "RaceSpec":
        ver = d.get("schema_version", SCHEMA_VERSION)
        if ver != SCHEMA_VERSION:
            raise InputError(f"unsupported schema_version {ver}")
        try:
            classes = d["classes"]
            names = tuple(str(c["name"]) for c in classes)
            sizes = tuple(int(c["size"]) for c in classes)
            table = np.array([[_parse_entry(x) for x in row] for row in d["char_table"]], dtype=complex)
            chars = tuple(d.get("characters") or [f"chi{i}" for i in range(len(table))])
            lpolys = {str(k): tuple(int(x) for x in v) for k, v in d.get("lpolys", {}).items()}
            zeta = d.get("zeta_numerator")
            dp = d.get("defining_poly")
            pats = d.get("frobenius_patterns")
            return cls(
                q=int(d["q"]),
                class_names=names,
                class_sizes=sizes,
                characters=chars,
                char_table=table,
                class_square_map={str(k): str(v) for k, v in d["class_square_map"].items()},
                lpolys=lpolys,
                contestants=tuple(str(c) for c in d.get("contestants", names)),
                zeta_numerator=None if zeta is None else tuple(int(x) for x in zeta),
                genus_K=int(d.get("genus_K", 0)),
                defining_poly=None if dp is None else tuple(tuple(int(x) for x in c) for c in dp),
                frobenius_patterns=None if pats is None else {
                    str(k): tuple(sorted(int(x) for x in v)) for k, v in pats.items()},
                residual_constant=None if d.get("residual_constant") is None else float(d["residual_constant"]),
                name=str(d.get("name", "race")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed race spec: {exc}") from exc

    @classmethod
    def load(cls, path) -> "RaceSpec":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise InputError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "q": self.q,
            "classes": [{"name": n, "size": s} for n, s in zip(self.class_names, self.class_sizes)],
            "characters": list(self.characters),
            "char_table": [[repr(float(x.real)) if x.imag == 0 else [repr(float(x.real)), repr(float(x.imag))]
                            for x in row] for row in self.char_table],
            "class_square_map": dict(self.class_square_map),
            "lpolys": {k: list(v) for k, v in self.lpolys.items()},
            "contestants": list(self.contestants),
            "genus_K": self.genus_K,
        }
        if self.zeta_numerator is not None:
            out["zeta_numerator"] = list(self.zeta_numerator)
        if self.defining_poly is not None:
            out["defining_poly"] = [list(c) for c in self.defining_poly]
        if self.frobenius_patterns is not None:
            out["frobenius_patterns"] = {k: list(v) for k, v in self.frobenius_patterns.items()}
        if self.residual_constant is not None:
            out["residual_constant"] = self.residual_constant
        return out

    # -- validation --------------------------------------------------------
    def validate(self):
        if not is_prime_power(self.q):
            raise InputError(f"q = {self.q} is not a prime power")
        k = len(self.class_names)
        if len(set(self.class_names)) != k or len(self.class_sizes) != k:
            raise InputError("class names must be distinct, one size per class")
        if self.char_table.shape != (len(self.characters), k):
            raise InputError("character table must have one row per character and one column per class")
        if len(self.characters) != k:
            raise InputError("number of irreducible characters must equal number of classes")
        order = sum(self.class_sizes)
        tol = 2.0**-30
        if not np.allclose(self.char_table[0], 1, atol=tol):
            raise InputError("first character must be trivial")
        dims = self.char_table[:, self.identity_index()].real
        if abs(sum(x * x for x in dims) - order) > tol * order:
            raise InputError("sum of squared dimensions differs from |G|")
        w = np.array(self.class_sizes, dtype=float) / order
        gram = (self.char_table * w) @ self.char_table.conj().T
        if not np.allclose(gram, np.eye(k), atol=tol):
            raise InputError("character table rows are not orthonormal")
        for c, s in self.class_square_map.items():
            if c not in self.class_names or s not in self.class_names:
                raise InputError(f"square map entry {c} -> {s} names an unknown class")
        if set(self.class_square_map) != set(self.class_names):
            raise InputError("square map must be defined on every class")
        if sum(self.sqrt_sizes().values()) != order:
            raise InputError("square map is inconsistent with class sizes")
        # Frobenius-Schur indicators (1/|G|) sum_g chi(g^2) must lie in {-1, 0, 1}
        for chi in self.characters:
            ind = sum(self.size(c) * self.chi(chi, s) for c, s in self.class_square_map.items()) / order
            if min(abs(ind - v) for v in (-1, 0, 1)) > tol:
                raise InputError(f"square map gives Frobenius-Schur indicator {ind:.4g} for {chi}")
        for chi in self.characters[1:]:
            if chi not in self.lpolys:
                raise InputError(f"missing L-polynomial for character {chi}")
        for chi, co in self.lpolys.items():
            if chi not in self.characters[1:]:
                raise InputError(f"L-polynomial given for unknown or trivial character {chi}")
            if not co or co[0] != 1:
                raise InputError(f"L-polynomial of {chi} must have constant term 1")
        if self.zeta_numerator is not None and (not self.zeta_numerator or self.zeta_numerator[0] != 1):
            raise InputError("zeta numerator must have constant term 1")
        for c in self.contestants:
            if c not in self.class_names:
                raise InputError(f"contestant {c} is not a class")
        if self.frobenius_patterns is not None:
            for c, pat in self.frobenius_patterns.items():
                if c not in self.class_names:
                    raise InputError(f"pattern given for unknown class {c}")
            if len(set(self.frobenius_patterns.values())) != len(self.frobenius_patterns):
                raise InputError("two classes share a factorisation pattern")

    def identity_index(self) -> int:
        for i, s in enumerate(self.class_sizes):
            if s == 1 and np.allclose(self.char_table[:, i].imag, 0) and np.all(
                    self.char_table[:, i].real >= np.abs(self.char_table).max(axis=1) - 1e-9):
                return i
        raise InputError("no identity class found")

    @property
    def order(self) -> int:
        return sum(self.class_sizes)

    def size(self, c: str) -> int:
        return self.class_sizes[self.class_names.index(c)]

    def chi(self, chi: str, c: str) -> complex:
        return complex(self.char_table[self.characters.index(chi), self.class_names.index(c)])

    def sqrt_sizes(self) -> dict:
        """#(C^{1/2}) = number of group elements whose square lies in C."""
        out = {c: 0 for c in self.class_names}
        for d, c in self.class_square_map.items():
            out[c] += self.size(d)
        return out


# ---------------------------------------------------------------------------
# zeros


@dataclass(frozen=True)
class InverseZero:
    gamma: mpc
    multiplicity: int


def _poly_derivative(co: list) -> list:
    return [i * c for i, c in enumerate(co)][1:]


def lpoly_inverse_zeros(coeffs: Sequence[int], q: int, tol: float = DEFAULT_ZERO_TOL,
                        prec: int = _ROOT_PREC) -> list[InverseZero]:
    """Inverse zeros gamma = 1/u of an L-polynomial, clustered with multiplicity.

    Every |gamma| must equal sqrt(q) within tol * sqrt(q) (Riemann hypothesis
    for curves); otherwise RHViolation.
    """
    co = [int(x) for x in coeffs]
    while co and co[-1] == 0:
        co.pop()
    if not co or co[0] != 1:
        raise InputError("L-polynomial must have constant term 1")
    if len(co) == 1:
        return []
    with mp.workprec(prec):
        sq = mp.sqrt(q)
        roots = mp.polyroots(co[::-1], maxsteps=400, extraprec=2 * prec, error=False)
        gammas = [1 / u for u in roots]
        clusters: list[list] = []
        for g in gammas:
            for cl in clusters:
                if abs(cl[0] - g) < tol * sq:
                    cl.append(g)
                    break
            else:
                clusters.append([g])
        out = []
        for cl in clusters:
            k = len(cl)
            u0 = 1 / (sum(cl) / k)
            if k > 1:
                # a root of multiplicity k is a simple root of the (k-1)-th derivative
                der = co
                for _ in range(k - 1):
                    der = _poly_derivative(der)
                u0 = mp.findroot(lambda u: mp.polyval(der[::-1], u), u0)
            g = 1 / mpc(u0)
            if abs(abs(g) - sq) > tol * sq:
                raise RHViolation(f"inverse zero {mpmath.nstr(g, 10)} has modulus {mpmath.nstr(abs(g), 10)}, "
                                  f"expected sqrt({q})")
            out.append(InverseZero(g, k))
    return out


@dataclass(frozen=True)
class ZeroRegistry:
    """Distinct inverse zeros with positive imaginary part, and per-source orders.

    ``pos[src][k]`` is the order of gamma_k as an inverse zero of the source's
    polynomial, ``neg[src][k]`` that of conj(gamma_k); ``plus``/``minus`` are the
    orders at +sqrt(q) and -sqrt(q).
    """

    q: int
    gammas: tuple
    thetas: tuple
    pos: dict
    neg: dict
    plus: dict
    minus: dict

    @property
    def r(self) -> int:
        return len(self.thetas)


def zero_registry(sources: dict, q: int, tol: float = DEFAULT_ZERO_TOL) -> ZeroRegistry:
    """Register the zeros of several polynomials (``{name: coefficients}``)."""
    per = {name: lpoly_inverse_zeros(co, q, tol) for name, co in sources.items()}
    with mp.workprec(_ROOT_PREC):
        sq = mp.sqrt(q)
        gammas: list = []

        def find(g):
            for i, h in enumerate(gammas):
                if abs(h - g) < tol * sq:
                    return i
            return None

        for zs in per.values():
            for z in zs:
                g = z.gamma
                if abs(g.imag) <= tol * sq:
                    continue
                rep = g if g.imag > 0 else mpmath.conj(g)
                if find(rep) is None:
                    gammas.append(rep)
        gammas.sort(key=lambda g: -mpmath.arg(g))
        pos = {s: [0] * len(gammas) for s in sources}
        neg = {s: [0] * len(gammas) for s in sources}
        plus = {s: 0 for s in sources}
        minus = {s: 0 for s in sources}
        for s, zs in per.items():
            for z in zs:
                g = z.gamma
                if abs(g.imag) <= tol * sq:
                    if g.real > 0:
                        plus[s] += z.multiplicity
                    else:
                        minus[s] += z.multiplicity
                elif g.imag > 0:
                    pos[s][find(g)] += z.multiplicity
                else:
                    neg[s][find(mpmath.conj(g))] += z.multiplicity
        thetas = tuple(mpmath.arg(g) for g in gammas)
    return ZeroRegistry(q, tuple(gammas), thetas, pos, neg, plus, minus)


def spec_registry(spec: RaceSpec, tol: float = DEFAULT_ZERO_TOL, include_zeta: bool = False) -> ZeroRegistry:
    sources = dict(spec.lpolys)
    if include_zeta and spec.zeta_numerator is not None:
        sources["__zeta__"] = spec.zeta_numerator
    return zero_registry(sources, spec.q, tol)


def angles_from_spec(spec: RaceSpec, tol: float = DEFAULT_ZERO_TOL, include_zeta: bool = False):
    """``(AngleSystem, ZeroRegistry)``: the zero arguments followed by pi."""
    reg = spec_registry(spec, tol, include_zeta)
    with mp.workprec(_ROOT_PREC):
        angles = tuple(reg.thetas) + (+mp.pi,)
    return AngleSystem(angles, Mode.DISCRETE, DEFAULT_PRECISION + 64), reg


# ---------------------------------------------------------------------------
# explicit formula


@dataclass(frozen=True)
class ClassCoeffs:
    r: Fraction
    z: float
    a_pi: float
    a: tuple  # complex, one per registered theta


@dataclass(frozen=True)
class ExplicitFormulaCoeffs:
    classes: dict
    registry: ZeroRegistry
    sqrt_sizes: dict

    def to_json(self) -> dict:
        return {
            c: {"r": str(v.r), "z": v.z, "a_pi": v.a_pi,
                "a": [[x.real, x.imag] for x in v.a], "sqrt_size": self.sqrt_sizes[c]}
            for c, v in self.classes.items()
        }


def _real(x: complex, what: str) -> float:
    if abs(x.imag) > 1e-9:
        raise InputError(f"{what} is not real ({x}); character table not closed under conjugation?")
    return x.real


def explicit_coeffs(spec: RaceSpec, registry: ZeroRegistry | None = None) -> ExplicitFormulaCoeffs:
    reg = registry or spec_registry(spec)
    sqs = spec.sqrt_sizes()
    out = {}
    nontrivial = spec.characters[1:]
    for c in spec.class_names:
        size = spec.size(c)
        r = Fraction(size - sqs[c], 2 * size)
        z = -sum(spec.chi(x, c).conjugate() * reg.plus[x] for x in nontrivial)
        api = float(r) - sum(spec.chi(x, c).conjugate() * reg.minus[x] for x in nontrivial)
        a = tuple(sum(spec.chi(x, c).conjugate() * reg.pos[x][k] for x in nontrivial) for k in range(reg.r))
        out[c] = ClassCoeffs(r, _real(complex(z), "z_C"), _real(complex(api), "a_pi"), tuple(complex(v) for v in a))
    return ExplicitFormulaCoeffs(out, reg, sqs)


def _race_poly(const: float, pi_coef: float, terms: dict, r: int) -> LaurentPoly:
    """const + pi_coef * (X_{r+1} + X_{r+1}^-1)/2 + sum terms[e] X^e on r+1 variables."""
    R = r + 1
    f = LaurentPoly.constant(R, const)
    pi_e = [0] * R
    pi_e[r] = 1
    f = f + LaurentPoly.cosine(R, pi_e, pi_coef / 2)
    return f + LaurentPoly(R, terms)


def race_function(cc: ClassCoeffs, r: int) -> LaurentPoly:
    terms = {}
    for k, a in enumerate(cc.a):
        if a != 0:
            e = [0] * (r + 1)
            e[k] = 1
            terms[tuple(e)] = terms.get(tuple(e), 0) - a
            e[k] = -1
            terms[tuple(e)] = terms.get(tuple(e), 0) - a.conjugate()
    return _race_poly(float(cc.r) + cc.z, cc.a_pi, terms, r)


@dataclass(frozen=True)
class BuiltRace:
    spec: RaceSpec
    race: RaceFunctions
    system: AngleSystem
    lattice: RelationLattice
    closure: ClosureDescription
    coeffs: ExplicitFormulaCoeffs | None


def build_race(spec: RaceSpec, max_coeff: int = DEFAULT_MAX_COEFF, precision_bits: int = DEFAULT_PRECISION,
               tol: float = DEFAULT_ZERO_TOL) -> BuiltRace:
    """Race functions f_C = r_C + z_C + a_pi(C) cos(pi n) - sum 2 Re(a_k(C) X_k)."""
    sys, reg = angles_from_spec(spec, tol)
    co = explicit_coeffs(spec, reg)
    fs = tuple(race_function(co.classes[c], reg.r) for c in spec.contestants)
    lat = detect_relations(sys, max_coeff, precision_bits)
    cd = extract_closure(sys, lat)
    rf = RaceFunctions(fs, error_term_present=True, names=spec.contestants)
    return BuiltRace(spec, rf, sys, lat, cd, co)


def _weight(g) -> complex:
    return complex(g / (g - 1))


def build_cumulative_race(spec: RaceSpec, max_coeff: int = DEFAULT_MAX_COEFF,
                          precision_bits: int = DEFAULT_PRECISION, tol: float = DEFAULT_ZERO_TOL) -> BuiltRace:
    """Race for counts of places of degree <= n, with weights gamma / (gamma - 1).

    The trivial-character sum runs over the inverse zeros of the zeta
    numerator of K, which must be supplied when genus_K > 0.
    """
    if spec.genus_K > 0 and spec.zeta_numerator is None:
        raise MissingZetaNumerator("genus_K > 0 requires zeta_numerator")
    sys, reg = angles_from_spec(spec, tol, include_zeta=True)
    r = reg.r
    q = spec.q
    sqrt_q = math.sqrt(q)
    sqs = spec.sqrt_sizes()
    with mp.workprec(_ROOT_PREC):
        w_pos = [_weight(g) for g in reg.gammas]
        w_neg = [_weight(mpmath.conj(g)) for g in reg.gammas]
        sq = mp.sqrt(q)
        w_plus = _weight(sq).real
        w_minus = _weight(-sq).real
    fs = []
    sources = [(x, None) for x in spec.characters[1:]]
    if "__zeta__" in reg.pos:
        sources.append(("__zeta__", 2.0))
    for c in spec.contestants:
        size = spec.size(c)
        rc = (size - sqs[c]) / (2 * size)
        const = rc * (q + sqrt_q) / (q - 1)
        pi_coef = rc * (q - sqrt_q) / (q - 1)
        terms: dict = {}
        for src, factor in sources:
            mult = factor if factor is not None else spec.chi(src, c).conjugate()
            # real zeros: +sqrt(q) is a constant term, -sqrt(q) rides on e^{i pi n}
            const = const - mult * reg.plus[src] * w_plus
            pi_coef = pi_coef - mult * reg.minus[src] * w_minus
            for k in range(r):
                for sign, orders, weights in ((1, reg.pos, w_pos), (-1, reg.neg, w_neg)):
                    o = orders[src][k]
                    if o:
                        e = [0] * (r + 1)
                        e[k] = sign
                        terms[tuple(e)] = terms.get(tuple(e), 0) - mult * o * weights[k]
        fs.append(_race_poly(_real(complex(const), "constant"), _real(complex(pi_coef), "pi coefficient"),
                             terms, r))
    lat = detect_relations(sys, max_coeff, precision_bits)
    cd = extract_closure(sys, lat)
    rf = RaceFunctions(tuple(fs), error_term_present=True, names=spec.contestants)
    return BuiltRace(spec, rf, sys, lat, cd, None)


def load_builtin(name: str = "s3_f7") -> RaceSpec:
    """A race spec shipped with the package (``kwrace/data/<name>.json``)."""
    path = Path(__file__).parent / "data" / f"{name}.json"
    if not path.exists():
        raise InputError(f"no built-in spec {name!r}")
    return RaceSpec.load(path)
