"""Asymptotic densities of orderings between functions on an orbit closure.

For race functions f_1..f_D on the torus, the density of
``{n : F_{s(1)}(n) > ... > F_{s(D)}(n)}`` equals the probability of the same
ordering under the closure measure, provided no two adjacent functions tie
with positive probability.  That proviso is certified coset by coset with a
witness search; uncertified cosets only yield bounds.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .angles import AngleSystem, ClosureDescription
from .errors import DimensionMismatch, InputError, TieMassWarning
from .laurent import (LaurentPoly, LikelyIdenticallyZero, Witness, coset_vanishing, line_vanishing,
                      orbit_phases)
from .sampler import (EstimateWithCI, Method, SamplerConfig, coset_draws, degenerate_phases,
                      eval_on_coset, normal_ci, quadrature_step, wilson_ci)

TIE_MASS_LIMIT = 1e-3

# tie status of an adjacent pair on one coset
WitnessFound = Witness
LikelyTied = LikelyIdenticallyZero


class Existence(str, enum.Enum):
    EXISTS = "Exists"
    BOUNDS_ONLY = "BoundsOnly"


@dataclass(frozen=True)
class RaceFunctions:
    fs: tuple
    error_term_present: bool = False
    names: tuple | None = None

    def __post_init__(self):
        fs = tuple(self.fs)
        if len(fs) < 2:
            raise InputError("a race needs at least two functions")
        r = fs[0].r
        for f in fs:
            if f.r != r:
                raise DimensionMismatch("race functions have different arities")
            if not f.is_real():
                raise InputError("race functions must be real on the torus")
        object.__setattr__(self, "fs", fs)
        names = tuple(self.names) if self.names is not None else tuple(f"f{i + 1}" for i in range(len(fs)))
        if len(names) != len(fs):
            raise InputError("one name per function")
        object.__setattr__(self, "names", names)

    @property
    def D(self) -> int:
        return len(self.fs)

    @property
    def r(self) -> int:
        return self.fs[0].r

    def tie_tol(self, i: int, j: int) -> float:
        return (self.fs[i] - self.fs[j]).imag_tol()


@dataclass(frozen=True)
class CosetResult:
    a: int
    ties: tuple
    estimate: float
    discarded: float

    @property
    def certified(self) -> bool:
        return all(t.found for t in self.ties)


@dataclass(frozen=True)
class DensityReport:
    ordering: tuple
    names: tuple
    value: EstimateWithCI
    lower: float
    upper: float
    per_coset: tuple
    existence: Existence
    positivity_witness: float | None = None
    violation_witness: float | None = None
    error_term_present: bool = False
    exact: Fraction | None = None

    @property
    def label(self) -> str:
        return ">".join(self.names[i] for i in self.ordering)

    def witnesses(self) -> str:
        out = []
        for c in self.per_coset:
            out.append("/".join(str(t.n) if t.found else "tied" for t in c.ties))
        return ";".join(out)

    def to_json(self) -> dict:
        return {
            "ordering": self.label,
            "value": self.value.to_json(),
            "lower": self.lower,
            "upper": self.upper,
            "existence": self.existence.value,
            "positivity_witness": self.positivity_witness,
            "violation_witness": self.violation_witness,
            "error_term_present": self.error_term_present,
            "exact": None if self.exact is None else str(self.exact),
            "per_coset": [
                {"a": c.a, "ties": [t.n if t.found else None for t in c.ties],
                 "estimate": c.estimate, "discarded": c.discarded}
                for c in self.per_coset
            ],
        }


def _normalize_orderings(rf: RaceFunctions, orderings) -> list[tuple]:
    if orderings is None:
        return [tuple(range(rf.D))]
    if orderings == "all":
        return list(itertools.permutations(range(rf.D)))
    out = []
    for s in orderings:
        s = tuple(int(i) for i in s)
        if sorted(s) != list(range(rf.D)):
            raise InputError(f"{s} is not a permutation of 0..{rf.D - 1}")
        out.append(s)
    return out


def _classify(V: np.ndarray, s: tuple, tols: np.ndarray, margin: float):
    """Boolean masks (strict, weak) for ordering s on rows of V (N x D)."""
    strict = np.ones(len(V), dtype=bool)
    weak = np.ones(len(V), dtype=bool)
    for i, j in zip(s, s[1:]):
        diff = V[:, i] - V[:, j]
        strict &= diff > tols[i, j] - margin
        weak &= diff >= -tols[i, j] - margin
    return strict, weak


def _tol_matrix(rf: RaceFunctions) -> np.ndarray:
    T = np.zeros((rf.D, rf.D))
    for i in range(rf.D):
        for j in range(rf.D):
            if i != j:
                T[i, j] = rf.tie_tol(i, j)
    return T


def _interval(p: float, se: float, n: int) -> tuple:
    if se == 0:
        return (p, p)
    if p < 5 * se or p > 1 - 5 * se:
        return wilson_ci(p * n, n)
    return normal_ci(p, se)


def _pair_ties(rf: RaceFunctions, cd: ClosureDescription, n_max, continuous: bool):
    """Witness search for every unordered pair on every coset."""
    ties = {}
    for i, j in itertools.combinations(range(rf.D), 2):
        g = rf.fs[i] - rf.fs[j]
        if continuous:
            ties[(i, j)] = [line_vanishing(g, cd.system, y_max=n_max)]
        else:
            ties[(i, j)] = [coset_vanishing(g, cd, a, n_max=n_max) for a in cd.cosets]
        ties[(j, i)] = ties[(i, j)]
    return ties


def densities(rf: RaceFunctions, cd: ClosureDescription, cfg: SamplerConfig | None = None,
              orderings=None, n_max=None, margin: float = 0.0, tag: int = 1,
              positivity_n_max: int | None = 10**4) -> list[DensityReport]:
    """Densities for several orderings, sharing one set of samples.

    ``orderings`` is None (identity), ``"all"``, or a list of permutations.
    ``margin`` relaxes every strict inequality to ``f_i > f_j - margin``.
    """
    cfg = cfg or SamplerConfig()
    if rf.r != cd.r:
        raise DimensionMismatch("race arity does not match the closure")
    perms = _normalize_orderings(rf, orderings)
    continuous = not cd.system.discrete
    tols = _tol_matrix(rf)
    if cd.degenerate:
        return [_degenerate_report(rf, cd, s, tols, margin, positivity_n_max) for s in perms]
    ties = _pair_ties(rf, cd, n_max, continuous)

    ncos = len(cd.cosets)
    strict_ct = np.zeros((len(perms), ncos))
    weak_ct = np.zeros((len(perms), ncos))
    viol_ct = np.zeros((len(perms), ncos))
    total = np.zeros(ncos)
    for a in cd.cosets:
        for u in coset_draws(cd, a, cfg, tag):
            V = eval_on_coset(list(rf.fs), cd, a, u)
            total[a] += len(V)
            for p, s in enumerate(perms):
                st, wk = _classify(V, s, tols, margin)
                strict_ct[p, a] += st.sum()
                weak_ct[p, a] += wk.sum()
                viol_ct[p, a] += (~wk).sum()

    reports = []
    for p, s in enumerate(perms):
        per = []
        lower = upper = 0.0
        point = []
        var = 0.0
        for a in cd.cosets:
            pair_status = tuple(ties[(i, j)][a] for i, j in zip(s, s[1:]))
            n = total[a]
            discarded = float((n - strict_ct[p, a] - viol_ct[p, a]) / n)
            certified = all(t.found for t in pair_status)
            if certified:
                if discarded >= TIE_MASS_LIMIT:
                    raise TieMassWarning(
                        f"ordering {s}, coset {a}: {discarded:.2e} of samples fall within the tie tolerance")
                kept = strict_ct[p, a] + viol_ct[p, a]
                est = float(strict_ct[p, a] / kept) if kept else 0.0
                lower += est
                upper += est
                var += est * (1 - est) / max(kept, 1)
            else:
                est = float(strict_ct[p, a] / n)
                upper += float(weak_ct[p, a] / n)
                var += est * (1 - est) / n
            point.append(est)
            per.append(CosetResult(a, pair_status, est, discarded))
        value = float(np.mean(point))
        se = math.sqrt(var) / ncos
        lower /= ncos
        upper /= ncos
        existence = Existence.EXISTS if all(c.certified for c in per) else Existence.BOUNDS_ONLY
        n_tot = int(total.sum())
        est = EstimateWithCI(value, se, n_tot, Method.MONTE_CARLO, ci=_interval(value, se, n_tot))
        pos = positivity_check(rf, cd, positivity_n_max, ordering=s) if positivity_n_max else None
        reports.append(DensityReport(
            s, rf.names, est, lower, upper, tuple(per), existence,
            positivity_witness=None if pos is None else pos.strict,
            violation_witness=None if pos is None else pos.violation,
            error_term_present=rf.error_term_present,
        ))
    return reports


def _degenerate_report(rf, cd, s, tols, margin, positivity_n_max) -> DensityReport:
    ph = degenerate_phases(cd)
    V = np.stack([f.eval_phases(ph) for f in rf.fs], axis=1)
    st, wk = _classify(V, s, tols, margin)
    exact = Fraction(int(st.sum()), cd.d)
    weak = Fraction(int(wk.sum()), cd.d)
    per = []
    for a in range(cd.d):
        pair_status = tuple(
            Witness(a) if abs(V[a, i] - V[a, j]) > tols[i, j] else LikelyIdenticallyZero(1)
            for i, j in zip(s, s[1:]))
        per.append(CosetResult(a, pair_status, float(st[a]), 0.0))
    # a periodic sequence always has a density; with an o(1) error term a tie
    # at some point of the orbit leaves that residue class undecided
    ties = any(not c.certified for c in per)
    if rf.error_term_present and ties:
        existence, lower, upper = Existence.BOUNDS_ONLY, float(exact), float(weak)
    else:
        existence, lower, upper = Existence.EXISTS, float(exact), float(exact)
    strict_n = next((a for a in range(cd.d) if st[a]), None)
    # without an error term a periodic orbit loses density wherever strictness fails
    fail = ~st if not rf.error_term_present else ~wk
    viol_n = next((a for a in range(cd.d) if fail[a]), None)
    est = EstimateWithCI(float(exact), 0.0, cd.d, Method.EXACT, exact=exact, ci=(float(exact), float(exact)))
    return DensityReport(s, rf.names, est, lower, upper, tuple(per), existence,
                         positivity_witness=strict_n, violation_witness=viol_n,
                         error_term_present=rf.error_term_present, exact=exact)


def density_discrete(rf: RaceFunctions, cd: ClosureDescription, cfg: SamplerConfig | None = None,
                     ordering: Sequence[int] | None = None, **kw) -> DensityReport:
    if not cd.system.discrete:
        raise InputError("closure was built for a continuous orbit")
    return densities(rf, cd, cfg, None if ordering is None else [ordering], **kw)[0]


def density_continuous(rf: RaceFunctions, cd: ClosureDescription, cfg: SamplerConfig | None = None,
                       ordering: Sequence[int] | None = None, **kw) -> DensityReport:
    if cd.system.discrete:
        raise InputError("closure was built for a discrete orbit")
    return densities(rf, cd, cfg, None if ordering is None else [ordering], **kw)[0]


def _race_values(rf: RaceFunctions | Callable, sys: AngleSystem, ts: np.ndarray) -> np.ndarray:
    if isinstance(rf, RaceFunctions):
        ph = orbit_phases(sys, ts)
        return np.stack([f.eval_phases(ph) for f in rf.fs], axis=1)
    return np.asarray(rf(ts), dtype=float)


def empirical_density(rf: RaceFunctions | Callable, sys: AngleSystem, X, ordering: Sequence[int] | None = None,
                      block: int = 1 << 17) -> EstimateWithCI:
    """Fraction of n = 1..X (or of the midpoint grid on [0, X]) where the ordering holds.

    ``rf`` may be a callback mapping an array of n to an (len(n), D) array.
    """
    if X < 1:
        raise InputError("X must be >= 1")
    if isinstance(rf, RaceFunctions):
        D = rf.D
        tols = _tol_matrix(rf)
        step = quadrature_step(rf.fs, sys.floats())
    else:
        D = np.asarray(rf(np.array([1.0]))).shape[1]
        tols = np.zeros((D, D))
        step = 0.1
    s = tuple(range(D)) if ordering is None else tuple(ordering)
    hits = 0
    if sys.discrete:
        count = int(X)
        grid = lambda k: k + 1.0
    else:
        count = int(math.ceil(X / step))
        h = X / count
        grid = lambda k: (k + 0.5) * h
    for start in range(0, count, block):
        ks = np.arange(start, min(start + block, count), dtype=np.float64)
        V = _race_values(rf, sys, grid(ks))
        st, _ = _classify(V, s, tols, 0.0)
        hits += int(st.sum())
    value = hits / count
    return EstimateWithCI(value, 0.0, count, Method.ORBIT)


@dataclass(frozen=True)
class PositivityResult:
    """Strict witness (lower density > 0) and violation witness (upper density < 1)."""

    strict: float | None
    violation: float | None
    scanned: int

    @property
    def outcome(self) -> str:
        if self.strict is not None:
            return "WitnessStrict"
        if self.violation is not None:
            return "WitnessViolation"
        return "NoneFound"


def positivity_check(rf: RaceFunctions, cd: ClosureDescription, n_max: int,
                     ordering: Sequence[int] | None = None, block: int = 4096) -> PositivityResult:
    """Scan n = 0..n_max (or the continuous grid on [0, n_max]) for the first
    point where the ordering holds strictly and the first where it fails.

    Failure means the weak ordering fails, except for a finite orbit without
    error term, where any failure of strictness already lowers the density."""
    if n_max < 1:
        raise InputError("n_max must be >= 1")
    s = tuple(range(rf.D)) if ordering is None else tuple(ordering)
    tols = _tol_matrix(rf)
    sys = cd.system
    if sys.discrete:
        count = int(n_max) + 1
        step = 1.0
    else:
        step = quadrature_step(rf.fs, sys.floats())
        count = int(math.ceil(n_max / step)) + 1
    exact_periodic = cd.degenerate and not rf.error_term_present
    strict = viol = None
    for start in range(0, count, block):
        ts = np.arange(start, min(start + block, count), dtype=float) * step
        V = _race_values(rf, sys, ts)
        st, wk = _classify(V, s, tols, 0.0)
        if strict is None and st.any():
            strict = ts[np.argmax(st)]
        fail = ~st if exact_periodic else ~wk
        if viol is None and fail.any():
            viol = ts[np.argmax(fail)]
        if strict is not None and viol is not None:
            break
    conv = int if sys.discrete else float
    return PositivityResult(None if strict is None else conv(strict),
                            None if viol is None else conv(viol), count)
