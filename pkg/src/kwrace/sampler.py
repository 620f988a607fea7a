"""Sampling the closure measure and computing expectations.

Randomness comes from Philox streams keyed by ``(seed, tag, coset, chunk)``,
so an estimate depends only on the seed and chunk size, never on the order
in which chunks are evaluated.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Iterator

import numpy as np

from .angles import AngleSystem, ClosureDescription
from .errors import CosetOutOfRange, DimensionMismatch, InputError, NotDegenerate
from .laurent import LaurentPoly, orbit_phases


class Method(str, enum.Enum):
    MONTE_CARLO = "MonteCarlo"
    EXACT = "ExactEnumeration"
    ORBIT = "OrbitAverage"


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    n_samples: int = 100_000
    chunk: int = 1 << 16

    def __post_init__(self):
        if self.n_samples < 1 or self.chunk < 1:
            raise InputError("n_samples and chunk must be >= 1")


@dataclass(frozen=True)
class EstimateWithCI:
    value: float | complex
    stderr: float
    n: int
    method: Method
    exact: Fraction | None = None
    ci: tuple | None = None

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")
        if self.method is Method.EXACT and self.stderr != 0:
            raise ValueError("exact enumeration has zero stderr")

    def to_json(self) -> dict:
        v = self.value
        out = {"value": v if not isinstance(v, complex) else [v.real, v.imag],
               "stderr": self.stderr, "n": self.n, "method": self.method.value}
        if self.exact is not None:
            out["exact"] = str(self.exact)
        if self.ci is not None:
            out["ci"] = list(self.ci)
        return out


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for one (tag, coset, chunk) sub-stream."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(cfg: SamplerConfig) -> Iterator[tuple[int, int]]:
    full, rest = divmod(cfg.n_samples, cfg.chunk)
    for i in range(full):
        yield i, cfg.chunk
    if rest:
        yield full, rest


def _coset_generator(cd: ClosureDescription, a: int):
    if a not in cd.cosets:
        raise CosetOutOfRange(f"coset {a} outside 0..{len(cd.cosets) - 1}")
    if cd.degenerate:
        raise NotDegenerate("degenerate closure: use enumerate_orbit")


def sample_phases(cd: ClosureDescription, a: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Angles of ``size`` draws of nu^a Z_theta, shape (size, r)."""
    _coset_generator(cd, a)
    u = rng.random((size, cd.m))
    ph = 2 * np.pi * (u @ cd.h_matrix().T.astype(float)) + cd.coset_phases(a)
    return np.mod(ph, 2 * np.pi)


def sample_Z(cd: ClosureDescription, a: int, rng: np.random.Generator, size: int | None = None):
    """Draws of nu^a Z_theta as complex torus points (one point if size is None)."""
    ph = sample_phases(cd, a, rng, 1 if size is None else size)
    z = np.exp(1j * ph)
    return z[0] if size is None else z


def enumerate_orbit(cd: ClosureDescription) -> np.ndarray:
    """The d points nu^0, ..., nu^{d-1} of a finite orbit, as complex coordinates."""
    if not cd.degenerate:
        raise NotDegenerate("orbit is infinite")
    return np.exp(1j * degenerate_phases(cd))


def degenerate_phases(cd: ClosureDescription) -> np.ndarray:
    """Exact phases 2 pi frac(a c_j), shape (d, r)."""
    out = np.zeros((cd.d, cd.r))
    for a in range(cd.d):
        for j, cj in cd.c.items():
            frac = (a * cj) % 1
            out[a, j] = 2 * np.pi * float(frac)
    return out


def _monomial_plan(fs: list[LaurentPoly], cd: ClosureDescription):
    """Exponents composed with the H-parametrisation, shared across functions."""
    keys = sorted({e for f in fs for e in f.terms})
    E = np.array(keys, dtype=np.int64).reshape(len(keys), cd.r)
    coeff = np.array([[f.terms.get(k, 0) for f in fs] for k in keys], dtype=complex).reshape(len(keys), len(fs))
    return E, coeff


def eval_on_coset(fs: list[LaurentPoly], cd: ClosureDescription, a: int, u: np.ndarray,
                  complex_out: bool = False) -> np.ndarray:
    """Values of each f at nu^a phi(u) for uniform u in [0,1)^m; shape (N, len(fs))."""
    E, coeff = _monomial_plan(fs, cd)
    if len(E) == 0:
        out = np.zeros((len(u), len(fs)), dtype=complex)
        return out if complex_out else out.real
    W = E @ cd.h_matrix()  # exponents in the z-variables
    off = E.astype(float) @ cd.coset_phases(a)
    # integer part of W.u is irrelevant; keep phases small
    ph = 2 * np.pi * np.mod(u @ W.T.astype(float), 1.0) + off
    vals = np.exp(1j * ph) @ coeff
    return vals if complex_out else vals.real


def coset_draws(cd: ClosureDescription, a: int, cfg: SamplerConfig, tag: int = 0):
    """Yield uniform parameter blocks u (chunk, m) for coset a."""
    for ci, size in chunk_sizes(cfg):
        yield stream(cfg.seed, tag, a, ci).random((size, cd.m))


def expectation(f: LaurentPoly, cd: ClosureDescription, cfg: SamplerConfig | None = None,
                tag: int = 0) -> EstimateWithCI:
    """(1/d) sum_a E f(nu^a Z_theta).  Exact for constants and finite orbits."""
    cfg = cfg or SamplerConfig()
    if f.r != cd.r:
        raise DimensionMismatch("arity mismatch")
    real = f.is_real()
    if f.is_constant:
        c = f.constant_term
        return EstimateWithCI(c.real if real else c, 0.0, 1, Method.EXACT)
    if cd.degenerate:
        vals = f.eval_phases_complex(degenerate_phases(cd))
        v = vals.mean()
        return EstimateWithCI(float(v.real) if real else complex(v), 0.0, cd.d, Method.EXACT)
    means, variances, n = [], [], 0
    for a in cd.cosets:
        s1 = 0j
        s2 = 0.0
        cnt = 0
        for u in coset_draws(cd, a, cfg, tag):
            v = eval_on_coset([f], cd, a, u, complex_out=True)[:, 0]
            s1 += v.sum()
            s2 += float(np.sum(np.abs(v) ** 2))
            cnt += len(v)
        mean = s1 / cnt
        var = max(s2 / cnt - abs(mean) ** 2, 0.0) * cnt / max(cnt - 1, 1)
        means.append(mean)
        variances.append(var)
        n += cnt
    k = len(means)
    value = sum(means) / k
    stderr = math.sqrt(sum(v / cfg.n_samples for v in variances)) / k
    return EstimateWithCI(float(value.real) if real else complex(value), stderr, n, Method.MONTE_CARLO)


def coset_expectations(f: LaurentPoly, cd: ClosureDescription, cfg: SamplerConfig | None = None,
                       tag: int = 0) -> list[EstimateWithCI]:
    """E f(nu^a Z_theta) separately for every coset (complex values allowed)."""
    cfg = cfg or SamplerConfig()
    out = []
    if cd.degenerate:
        vals = f.eval_phases_complex(degenerate_phases(cd))
        return [EstimateWithCI(complex(v), 0.0, 1, Method.EXACT) for v in vals]
    for a in cd.cosets:
        chunks = [eval_on_coset([f], cd, a, u, complex_out=True)[:, 0] for u in coset_draws(cd, a, cfg, tag)]
        v = np.concatenate(chunks)
        se = float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        out.append(EstimateWithCI(complex(v.mean()), se, len(v), Method.MONTE_CARLO))
    return out


def quadrature_step(fs, theta) -> float:
    """Midpoint step resolving the fastest frequency present in the functions."""
    theta = np.asarray(theta, dtype=float)
    fmax = 0.0
    for f in fs:
        E, _ = f.arrays()
        if len(E):
            fmax = max(fmax, float(np.max(np.abs(E @ theta))))
    if fmax == 0:
        return 0.1
    return min(0.1, np.pi / (4 * fmax))


def orbit_average(f: LaurentPoly, sys: AngleSystem, X, block: int = 1 << 18) -> EstimateWithCI:
    """Deterministic average of f along the orbit: n = 1..X, or the integral over [0, X]."""
    if X < 1:
        raise InputError("X must be >= 1")
    if f.r != sys.r:
        raise DimensionMismatch("arity mismatch")
    real = f.is_real()
    total = 0j
    if sys.discrete:
        X = int(X)
        for start in range(1, X + 1, block):
            ns = np.arange(start, min(start + block, X + 1), dtype=np.int64)
            total += f.eval_phases_complex(orbit_phases(sys, ns)).sum()
        value = total / X
        count = X
    else:
        h = quadrature_step([f], sys.floats())
        count = int(math.ceil(X / h))
        h = X / count
        for start in range(0, count, block):
            ks = np.arange(start, min(start + block, count), dtype=np.float64)
            total += f.eval_phases_complex(orbit_phases(sys, (ks + 0.5) * h)).sum()
        value = total / count
    return EstimateWithCI(float(value.real) if real else complex(value), 0.0, count, Method.ORBIT)


def normal_ci(p: float, se: float, z: float = 1.96) -> tuple[float, float]:
    return max(0.0, p - z * se), min(1.0, p + z * se)


def wilson_ci(successes: float, n: float, z: float | None = None) -> tuple[float, float]:
    """Wilson score interval (95% unless z given)."""
    if z is None:
        z = NormalDist().inv_cdf(0.975)
    if n <= 0:
        return 0.0, 1.0
    p = successes / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)
