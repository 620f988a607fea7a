"""Closed-form mean and variance of degree-one race functions on each coset.

For ``f = c + sum_k (a_k X_k + conj(a_k) X_k^-1)``, a coordinate whose angle
lies in pi Q is constant on every coset, and the others have mean zero.  Only
the pairwise products ``W_i W_j`` and ``W_i conj(W_j)`` enter the variance, so
relations matter only through which ``theta_i +- theta_j`` lie in pi Q.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _ratlin
from .angles import ClosureDescription, RelationLattice
from .density import RaceFunctions
from .errors import DimensionMismatch, InputError, UnsupportedRelationShape
from .laurent import LaurentPoly
from .sampler import SamplerConfig, coset_draws, degenerate_phases, eval_on_coset


@dataclass(frozen=True)
class CosetMoments:
    mean: float
    variance: float


@dataclass(frozen=True)
class MomentReport:
    per_coset: tuple
    nondegenerate: tuple
    degenerate: tuple
    pair_relations: tuple  # (i, j, sign), theta_i + sign * theta_j in pi Q

    def to_json(self) -> dict:
        return {
            "per_coset": [{"a": a, "mean": m.mean, "variance": m.variance} for a, m in enumerate(self.per_coset)],
            "nondegenerate": [i + 1 for i in self.nondegenerate],
            "degenerate": [i + 1 for i in self.degenerate],
            "pair_relations": [[i + 1, j + 1, s] for i, j, s in self.pair_relations],
        }


def degree_one_coeffs(f: LaurentPoly) -> tuple[float, np.ndarray]:
    """``(c, a)`` with f = c + sum 2 Re(a_k X_k); raises if f has higher degree."""
    if not f.is_real():
        raise InputError("function must be real on the torus")
    a = np.zeros(f.r, dtype=complex)
    for e, coef in f.terms.items():
        nz = [k for k, x in enumerate(e) if x != 0]
        if not nz:
            continue
        if len(nz) != 1 or abs(e[nz[0]]) != 1:
            raise InputError(f"monomial {e} has degree above one")
        if e[nz[0]] == 1:
            a[nz[0]] = coef
    return f.constant_term.real, a


def _const_rows(lat: RelationLattice, r: int) -> list:
    """Rows spanning {e : <e, theta> in pi Q} (discrete) or {e : <e, theta> = 0}."""
    rows = [list(v) for v in lat.relations]
    if lat.mode.value == "discrete":
        rows.append([1] + [0] * r)
        return rows
    return [[0] + v for v in rows]


def _unit(r: int, coords: dict) -> list:
    v = [0] * (r + 1)
    for k, x in coords.items():
        v[k + 1] += x
    return v


def relation_structure(lat: RelationLattice, r: int):
    """Degenerate indices, pair relations, and whether the lattice is of pair form."""
    rows = _const_rows(lat, r)
    deg = tuple(k for k in range(r) if _ratlin.in_row_space(_unit(r, {k: 1}), rows))
    nondeg = tuple(k for k in range(r) if k not in deg)
    pairs = []
    for x, i in enumerate(nondeg):
        for j in nondeg[x + 1:]:
            for sign in (1, -1):
                if _ratlin.in_row_space(_unit(r, {i: 1, j: sign}), rows):
                    pairs.append((i, j, sign))
    # pair form: the constant space is spanned by the slot-0 direction, the
    # degenerate coordinates and the detected pairs
    gen = [[1] + [0] * r] + [_unit(r, {k: 1}) for k in deg] + [_unit(r, {i: 1, j: s}) for i, j, s in pairs]
    pair_form = all(_ratlin.in_row_space(v, gen) for v in rows)
    return deg, nondeg, tuple(pairs), pair_form


def closed_form_moments(f: LaurentPoly, cd: ClosureDescription, lat: RelationLattice,
                        allow_general_relations: bool = False) -> MomentReport:
    """Per-coset mean and variance of f(nu^a Z).

    Relations among non-degenerate angles that are not of the form
    theta_i +- theta_j in pi Q raise UnsupportedRelationShape unless
    ``allow_general_relations`` is set; the formula itself only uses the pairs.
    """
    if f.r != cd.r:
        raise DimensionMismatch("arity mismatch")
    c, a = degree_one_coeffs(f)
    deg, nondeg, pairs, pair_form = relation_structure(lat, cd.r)
    if not pair_form and not allow_general_relations:
        raise UnsupportedRelationShape("relations among non-degenerate angles are not all of pair form")
    base_var = 2 * float(sum(abs(a[k]) ** 2 for k in nondeg))
    out = []
    for coset in cd.cosets:
        ph = cd.coset_phases(coset)
        mean = c + sum(2 * (a[k] * np.exp(1j * ph[k])).real for k in deg)
        var = base_var
        for i, j, s in pairs:
            if s == 1:
                var += 4 * (a[i] * a[j] * np.exp(1j * (ph[i] + ph[j]))).real
            else:
                var += 4 * (a[i] * np.conj(a[j]) * np.exp(1j * (ph[i] - ph[j]))).real
        out.append(CosetMoments(float(mean), max(float(var), 0.0)))
    return MomentReport(tuple(out), nondeg, deg, pairs)


def moment_tie_exclusion(rf: RaceFunctions, cd: ClosureDescription, lat: RelationLattice,
                         allow_general_relations: bool = False) -> tuple[bool, ...]:
    """For each adjacent pair, True if mean or variance separates them on every coset."""
    reps = [closed_form_moments(f, cd, lat, allow_general_relations) for f in rf.fs]
    out = []
    for j in range(rf.D - 1):
        f, g = reps[j], reps[j + 1]
        tol = 2.0**-30 * (1 + rf.fs[j].l1() + rf.fs[j + 1].l1()) ** 2
        sep = all(abs(x.mean - y.mean) > tol or abs(x.variance - y.variance) > tol
                  for x, y in zip(f.per_coset, g.per_coset))
        out.append(sep)
    return tuple(out)


@dataclass(frozen=True)
class SampleMoments:
    mean: float
    mean_se: float
    variance: float
    variance_se: float


def mc_moments(f: LaurentPoly, cd: ClosureDescription, cfg: SamplerConfig | None = None,
               tag: int = 2) -> list[SampleMoments]:
    """Monte Carlo mean and variance per coset, with standard errors."""
    cfg = cfg or SamplerConfig()
    out = []
    for a in cd.cosets:
        if cd.degenerate:
            v = f.eval_phases(degenerate_phases(cd)[a:a + 1])
        else:
            v = np.concatenate([eval_on_coset([f], cd, a, u)[:, 0] for u in coset_draws(cd, a, cfg, tag)])
        n = len(v)
        mu = float(v.mean())
        dev = v - mu
        m2 = float(np.mean(dev**2))
        m4 = float(np.mean(dev**4))
        var = m2 * n / max(n - 1, 1)
        out.append(SampleMoments(mu, math.sqrt(m2 / n), var, math.sqrt(max(m4 - m2 * m2, 0.0) / n)))
    return out
