"""Finite truncations of almost periodic functions
``c + sum_n (a_n e^{i theta_n t} + conj(a_n) e^{-i theta_n t})``.

The frequencies are expressed over an incremental basis built from the
relations among them; the truncated random model is
``S_N = c + sum_{n <= N} 2 Re(a_n Z_{n,N})`` with
``Z_{n,N} = prod_theta Z_theta^{d_N c_{theta,n}}`` and independent uniform
``Z_theta`` on the circle.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from mpmath import mp

from . import _ratlin
from .angles import (DEFAULT_MAX_COEFF, DEFAULT_PRECISION, AngleSystem, Mode, RelationLattice,
                     detect_relations, parse_angle)
from .density import Existence
from .errors import (DimensionMismatch, HypothesisUnverified, InconsistentLattice, InputError,
                     NotDirectSum)
from .sampler import EstimateWithCI, Method, SamplerConfig, chunk_sizes, normal_ci, stream, wilson_ci


@dataclass(frozen=True)
class APSeries:
    c: float
    thetas: tuple
    a: tuple

    def __post_init__(self):
        thetas = tuple(self.thetas)
        a = tuple(complex(x) for x in self.a)
        if len(thetas) != len(a):
            raise DimensionMismatch("one coefficient per frequency")
        for t in thetas:
            if not t > 0:
                raise InputError("frequencies must be positive")
        fl = sorted(float(t) for t in thetas)
        if any(abs(x - y) <= 1e-12 * max(1.0, abs(y)) for x, y in zip(fl, fl[1:])):
            raise InputError("frequencies must be pairwise distinct")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", float(self.c))

    @property
    def N(self) -> int:
        return len(self.thetas)

    def system(self) -> AngleSystem:
        return AngleSystem(self.thetas, Mode.CONTINUOUS)

    def truncate(self, N: int) -> "APSeries":
        return APSeries(self.c, self.thetas[:N], self.a[:N])

    def closed_variance(self) -> float:
        return 2 * float(sum(abs(x) ** 2 for x in self.a))

    @classmethod
    def from_csv(cls, path) -> "APSeries":
        """Rows ``theta, re, im``; a row with theta = 0 sets the constant."""
        c = 0.0
        thetas, coeffs = [], []
        try:
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as exc:
            raise InputError(str(exc)) from exc
        for row in rows:
            if not row or row[0].strip().startswith("#") or row[0].strip().lower() == "theta":
                continue
            if len(row) < 2:
                raise InputError(f"{path}: expected theta, re[, im]")
            theta = parse_angle(row[0].strip())
            re = float(row[1])
            im = float(row[2]) if len(row) > 2 and row[2].strip() else 0.0
            if theta == 0:
                c += re
            else:
                thetas.append(theta)
                coeffs.append(complex(re, im))
        return cls(c, tuple(thetas), tuple(coeffs))


def align_series(series: Sequence[APSeries]) -> list[APSeries]:
    """Put several series on a common frequency list (missing coefficients are 0)."""
    merged: list = []
    for s in series:
        for t in s.thetas:
            if not any(abs(t - u) <= mp.mpf(2) ** -200 * max(1, abs(u)) for u in merged):
                merged.append(t)
    out = []
    for s in series:
        coeffs = []
        for t in merged:
            idx = next((i for i, u in enumerate(s.thetas) if abs(t - u) <= mp.mpf(2) ** -200 * max(1, abs(u))), None)
            coeffs.append(0j if idx is None else s.a[idx])
        out.append(APSeries(s.c, tuple(merged), tuple(coeffs)))
    return out


# ---------------------------------------------------------------------------
# incremental basis


@dataclass(frozen=True)
class IncrementalBasis:
    """``basis``: indices of basis frequencies; ``coeffs[n]``: {basis index: c}
    with theta_n = sum c theta_b; ``d_seq[j]``: lcm of denominators over the
    first j + 1 frequencies."""

    basis: tuple
    coeffs: tuple
    d_seq: tuple

    @property
    def N(self) -> int:
        return len(self.coeffs)

    def exponent_matrix(self, N: int | None = None) -> np.ndarray:
        """Integer matrix W (N x |basis|) with Z_{n,N} = prod Z_b^{W[n, b]}."""
        N = self.N if N is None else N
        d = self.d_seq[N - 1]
        cols = {b: i for i, b in enumerate(self.basis)}
        W = np.zeros((N, len(self.basis)), dtype=np.int64)
        for n in range(N):
            for b, cf in self.coeffs[n].items():
                v = cf * d
                if v.denominator != 1:
                    raise AssertionError("d_N does not clear denominators")
                W[n, cols[b]] = int(v)
        return W

    def coeff_vector(self, n: int) -> tuple:
        return tuple(self.coeffs[n].get(b, Fraction(0)) for b in self.basis)


def incremental_basis(series: APSeries, lat: RelationLattice) -> IncrementalBasis:
    """theta_n joins the basis iff no relation expresses it over theta_1..theta_{n-1}."""
    N = series.N
    for v in lat.relations:
        if len(v) != N:
            raise DimensionMismatch("lattice does not match the series")
    if lat.mode is not Mode.CONTINUOUS:
        raise InputError("frequency relations must be taken without 2 pi")
    try:
        piv = _ratlin.last_pivot_form(lat.relations, N)
    except AssertionError as exc:
        raise InconsistentLattice(str(exc)) from exc
    basis = tuple(n for n in range(N) if n not in piv)
    coeffs = []
    d = 1
    d_seq = []
    for n in range(N):
        if n in piv:
            row = piv[n]
            cn = {b: -row[b] for b in basis if b < n and row[b] != 0}
            if any(row[b] != 0 for b in basis if b > n):
                raise InconsistentLattice("relation involves later frequencies")
        else:
            cn = {n: Fraction(1)}
        coeffs.append(cn)
        d = math.lcm(d, _ratlin.lcm_denominators(list(cn.values())))
        d_seq.append(d)
    # numerical round trip
    for n in range(N):
        val = sum(float(cf) * float(series.thetas[b]) for b, cf in coeffs[n].items())
        if abs(val - float(series.thetas[n])) > 1e-9 * max(1.0, abs(float(series.thetas[n]))):
            raise InconsistentLattice(f"frequency {n + 1} is not reproduced by the relations")
    return IncrementalBasis(basis, tuple(coeffs), tuple(d_seq))


def lattice_for(series: APSeries, declared=None, max_coeff: int = DEFAULT_MAX_COEFF,
                precision_bits: int = DEFAULT_PRECISION) -> RelationLattice:
    """Detected relations, or the declared ones (verified) when given."""
    sys = series.system()
    if declared is not None:
        return RelationLattice.declared(sys, declared, precision_bits)
    return detect_relations(sys, max_coeff, precision_bits)


# ---------------------------------------------------------------------------
# sampling


def sample_S(series: APSeries, ib: IncrementalBasis, rng: np.random.Generator, size: int = 1,
             N: int | None = None) -> np.ndarray:
    """``size`` draws of S_N (N defaults to the full length)."""
    N = series.N if N is None else N
    W = ib.exponent_matrix(N).astype(float)
    a = np.array(series.a[:N])
    u = rng.random((size, len(ib.basis)))
    ph = 2 * np.pi * np.mod(u @ W.T, 1.0)
    return series.c + 2 * (np.exp(1j * ph) @ a).real


def _draw(series, ib, cfg: SamplerConfig, tag: int, N=None):
    for ci, size in chunk_sizes(cfg):
        yield sample_S(series, ib, stream(cfg.seed, tag, 0, ci), size, N)


@dataclass(frozen=True)
class APMoments:
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    n: int


def sample_moments(series: APSeries, ib: IncrementalBasis, cfg: SamplerConfig | None = None,
                   tag: int = 10, N: int | None = None) -> APMoments:
    cfg = cfg or SamplerConfig()
    v = np.concatenate(list(_draw(series, ib, cfg, tag, N)))
    n = len(v)
    mu = float(v.mean())
    dev = v - mu
    m2 = float(np.mean(dev**2))
    m4 = float(np.mean(dev**4))
    return APMoments(mu, math.sqrt(m2 / n), m2 * n / max(n - 1, 1), math.sqrt(max(m4 - m2 * m2, 0.0) / n), n)


# ---------------------------------------------------------------------------
# L2 increments


def _integer_multiple(u: tuple, v: tuple) -> bool:
    """True if the vector u is an integer multiple k*v with |k| >= 2 (or v = k*u)."""
    for x, y in ((u, v), (v, u)):
        k = None
        ok = True
        for p, q in zip(x, y):
            if q == 0:
                if p != 0:
                    ok = False
                    break
                continue
            ratio = p / q
            if k is None:
                k = ratio
            elif ratio != k:
                ok = False
                break
        if ok and k is not None and k.denominator == 1 and abs(k) >= 2:
            return True
    return False


def no_integer_multiples(ib: IncrementalBasis, m: int) -> bool:
    vecs = [ib.coeff_vector(n) for n in range(m)]
    return not any(_integer_multiple(vecs[i], vecs[j]) for i, j in itertools.combinations(range(m), 2))


def exact_l2_increment(series: APSeries, ib: IncrementalBasis, n: int, m: int) -> float:
    """E|S_m - S_n|^2 computed from the exponent maps, without hypotheses."""
    if not 0 <= n <= m <= series.N:
        raise InputError("need 0 <= n <= m <= N")
    a = series.a
    total = 2 * sum(abs(a[k]) ** 2 for k in range(m)) + 2 * sum(abs(a[k]) ** 2 for k in range(n))
    if n == 0:
        return float(total)
    dm, dn = ib.d_seq[m - 1], ib.d_seq[n - 1]
    cross = 0j
    for k in range(m):
        vk = tuple(dm * x for x in ib.coeff_vector(k))
        for j in range(n):
            if vk == tuple(dn * x for x in ib.coeff_vector(j)):
                cross += a[k] * np.conj(a[j])
    return float(total - 4 * cross.real)


@dataclass(frozen=True)
class L2Increment:
    closed_form: float
    exact: float
    hypothesis: str
    closed_form_valid: bool
    mc: float | None = None
    mc_se: float | None = None


def l2_increment(series: APSeries, ib: IncrementalBasis, n: int, m: int,
                 cfg: SamplerConfig | None = None) -> L2Increment:
    """2 sum_{k=n+1}^m |a_k|^2, with the hypothesis that supports it.

    Hypotheses: ``"bounded_d"`` (d_n = d_m, so S_m - S_n is the tail) or
    ``"no_integer_multiple"``.  Under the latter alone the closed form needs
    d_n = d_m as well; ``closed_form_valid`` reports whether it agrees with
    the exact pairing computation.  With ``cfg`` a Monte Carlo estimate is added.
    """
    if not 1 <= n <= m <= series.N:
        raise InputError("need 1 <= n <= m <= N")
    closed = 2 * float(sum(abs(series.a[k]) ** 2 for k in range(n, m)))
    exact = exact_l2_increment(series, ib, n, m)
    if ib.d_seq[n - 1] == ib.d_seq[m - 1]:
        hyp = "bounded_d"
    elif no_integer_multiples(ib, m):
        hyp = "no_integer_multiple"
    else:
        raise HypothesisUnverified(
            f"d_{n} = {ib.d_seq[n - 1]} != d_{m} = {ib.d_seq[m - 1]} and some frequency is an integer "
            f"multiple of another; use exact_l2_increment or Monte Carlo")
    valid = abs(exact - closed) <= 1e-12 * max(1.0, closed)
    mc = se = None
    if cfg is not None:
        diffs = []
        for ci, size in chunk_sizes(cfg):
            rng = stream(cfg.seed, 11, 0, ci)
            u = rng.random((size, len(ib.basis)))
            vals = []
            for N in (m, n):
                W = ib.exponent_matrix(N).astype(float)
                ph = 2 * np.pi * np.mod(u @ W.T, 1.0)
                vals.append(2 * (np.exp(1j * ph) @ np.array(series.a[:N])).real)
            diffs.append((vals[0] - vals[1]) ** 2)
        v = np.concatenate(diffs)
        mc, se = float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))
    return L2Increment(closed, exact, hyp, valid, mc, se)


# ---------------------------------------------------------------------------
# direct sums and convolution


def span_dimension(lat: RelationLattice, idx: Sequence[int], N: int) -> int:
    """dim_Q Span{theta_i : i in idx}."""
    idx = list(idx)
    rest = [i for i in range(N) if i not in idx]
    rels = [list(v) for v in lat.relations]
    rank_all = _ratlin.rank(rels)
    rank_rest = _ratlin.rank([[v[i] for i in rest] for v in rels]) if rest else 0
    return len(idx) - (rank_all - rank_rest)


def is_direct_sum(lat: RelationLattice, m_split: int, N: int) -> bool:
    """Span(theta_1..theta_m) and Span(theta_{m+1}..theta_N) intersect trivially."""
    T = range(m_split)
    R = range(m_split, N)
    return span_dimension(lat, T, N) + span_dimension(lat, R, N) == span_dimension(lat, range(N), N)


@dataclass(frozen=True)
class ConvolutionReport:
    grid: tuple
    deviation: tuple
    band: tuple
    max_deviation: float
    max_ratio: float

    @property
    def passed(self) -> bool:
        return all(d <= b for d, b in zip(self.deviation, self.band))


def _ecf(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.multiply.outer(samples, grid)).mean(axis=0)


def convolution_check(series: APSeries, lat: RelationLattice, m_split: int, cfg: SamplerConfig | None = None,
                      grid=None, ib: IncrementalBasis | None = None) -> ConvolutionReport:
    """Compare the characteristic function of S with the product of those of
    its two parts (frequencies <= m_split, and the rest), each part sampled
    independently."""
    N = series.N
    if not 1 <= m_split < N:
        raise InputError("split must leave both parts non-empty")
    if not is_direct_sum(lat, m_split, N):
        raise NotDirectSum(f"frequencies 1..{m_split} and {m_split + 1}..{N} have intersecting spans")
    cfg = cfg or SamplerConfig(n_samples=100_000)
    ib = ib or incremental_basis(series, lat)
    grid = np.linspace(-8, 8, 32) if grid is None else np.asarray(grid, dtype=float)
    head = APSeries(0.0, series.thetas, series.a[:m_split] + (0j,) * (N - m_split))
    tail = APSeries(series.c, series.thetas, (0j,) * m_split + series.a[m_split:])

    def ecf(s, tag):
        acc = np.zeros(len(grid), dtype=complex)
        n = 0
        for block in _draw(s, ib, cfg, tag):
            acc += np.exp(1j * np.multiply.outer(block, grid)).sum(axis=0)
            n += len(block)
        return acc / n, n

    phi, n = ecf(series, 20)
    phi_h, _ = ecf(head, 21)
    phi_t, _ = ecf(tail, 22)
    prod = phi_h * phi_t
    dev = np.abs(phi - prod)
    # E|phi_hat - phi|^2 = (1 - |phi|^2)/n for an empirical characteristic function
    var = (np.maximum(1 - np.abs(phi) ** 2, 0) + np.abs(phi_t) ** 2 * np.maximum(1 - np.abs(phi_h) ** 2, 0)
           + np.abs(phi_h) ** 2 * np.maximum(1 - np.abs(phi_t) ** 2, 0)) / n
    band = 3 * np.sqrt(var)
    ratio = dev / np.where(band > 0, band, np.inf)
    return ConvolutionReport(tuple(grid), tuple(dev), tuple(band), float(dev.max()), float(ratio.max()))


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class APDensityReport:
    value: EstimateWithCI
    lower: float
    upper: float
    existence: Existence
    N: int
    value_half: float
    delta: float
    separated: tuple

    def to_json(self) -> dict:
        return {
            "value": self.value.to_json(), "lower": self.lower, "upper": self.upper,
            "existence": self.existence.value, "truncation_N": self.N, "value_at_half_N": self.value_half,
            "sensitivity_delta": self.delta, "separated_pairs": list(self.separated),
        }


def _pair_separated(s1: APSeries, s2: APSeries, m_split: int) -> bool:
    """S1 - S2 is almost surely non-zero: some coefficient on T differs, or all
    coefficients agree and the constants differ."""
    if any(x != y for x, y in zip(s1.a[:m_split], s2.a[:m_split])):
        return True
    return all(x == y for x, y in zip(s1.a, s2.a)) and s1.c != s2.c


def _ordered_fraction(series, ib, cfg, N, tag):
    strict = weak = raw = total = 0
    for ci, size in chunk_sizes(cfg):
        rng = stream(cfg.seed, tag, 0, ci)
        u = rng.random((size, len(ib.basis)))
        W = ib.exponent_matrix(N).astype(float)
        Z = np.exp(1j * 2 * np.pi * np.mod(u @ W.T, 1.0))
        V = np.stack([s.c + 2 * (Z @ np.array(s.a[:N])).real for s in series], axis=1)
        scale = 2.0**-30 * (1 + max(abs(s.c) + 2 * sum(abs(x) for x in s.a[:N]) for s in series))
        st = np.ones(size, dtype=bool)
        wk = np.ones(size, dtype=bool)
        rw = np.ones(size, dtype=bool)
        for j in range(len(series) - 1):
            diff = V[:, j] - V[:, j + 1]
            st &= diff > scale
            wk &= diff >= -scale
            rw &= diff > 0
        strict += int(st.sum())
        weak += int(wk.sum())
        raw += int(rw.sum())
        total += size
    return strict, weak, raw, total


def ap_density(series: Sequence[APSeries], lat: RelationLattice, m_split: int,
               cfg: SamplerConfig | None = None, ib: IncrementalBasis | None = None) -> APDensityReport:
    """P(S_1 > ... > S_D) at truncation N, with the value at N // 2 for sensitivity."""
    series = list(series)
    if len(series) < 2:
        raise InputError("need at least two series")
    N = series[0].N
    for s in series:
        if s.N != N or any(abs(float(x) - float(y)) > 0 for x, y in zip(s.thetas, series[0].thetas)):
            raise DimensionMismatch("series must share the frequency list (see align_series)")
    cfg = cfg or SamplerConfig()
    ib = ib or incremental_basis(series[0], lat)
    direct = 1 <= m_split <= N and (m_split == N or is_direct_sum(lat, m_split, N))
    separated = tuple(direct and _pair_separated(s, t, m_split) for s, t in zip(series, series[1:]))
    exists = direct and all(separated)
    strict, weak, raw, total = _ordered_fraction(series, ib, cfg, N, 30)
    if exists:
        # ties are null events, so no tolerance band is needed
        strict = raw
    p = strict / total
    se = math.sqrt(p * (1 - p) / total)
    ci = wilson_ci(strict, total) if (p < 5 * se or p > 1 - 5 * se) else normal_ci(p, se)
    est = EstimateWithCI(p, se, total, Method.MONTE_CARLO, ci=ci)
    half = max(N // 2, 1)
    s_half, _, r_half, t_half = _ordered_fraction(series, ib, cfg, half, 31)
    p_half = (r_half if exists else s_half) / t_half
    if exists:
        lower = upper = p
        existence = Existence.EXISTS
    else:
        lower, upper = p, weak / total
        existence = Existence.BOUNDS_ONLY
    return APDensityReport(est, lower, upper, existence, N, p_half, abs(p - p_half), separated)
