"""End-to-end acceptance checks.  Each test adds one PASS/FAIL line to the
"acceptance criteria" section of the pytest summary."""
import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from mpmath import mp, mpf

from helpers import degenerate_angles, degree_one, frozen_counts, random_angles, random_race
from kwrace import _ratlin
from kwrace.almost_periodic import (APSeries, convolution_check, incremental_basis, lattice_for,
                                    sample_moments)
from kwrace.angles import AngleSystem, RelationLattice, closure_from_system, detect_relations, extract_closure
from kwrace.density import RaceFunctions, densities, empirical_density, positivity_check
from kwrace.errors import NotDirectSum
from kwrace.ffrace import angles_from_spec
from kwrace.gfpoly import necklace
from kwrace.laurent import LaurentPoly, coset_vanishing
from kwrace.moments import closed_form_moments, mc_moments
from kwrace.oracle import count_places, count_places_bruteforce, residual_check
from kwrace.sampler import SamplerConfig, orbit_average

ORDERINGS = list(itertools.permutations(range(3)))


def test_01_worked_example_closure(s3_spec, report):
    t0 = time.perf_counter()
    sys, _ = angles_from_spec(s3_spec)
    lat = detect_relations(sys)
    cd = extract_closure(sys, lat)
    elapsed = time.perf_counter() - t0
    got = (cd.m, cd.d, cd.c[1], cd.b[(0, 1)], cd.c[2], cd.b[(0, 2)])
    want = (1, 6, Fraction(2, 3), Fraction(-1), Fraction(1, 2), Fraction(0))
    ok = got == want and elapsed < 1.0
    report(1, ok, f"(m, d, c2, b12, c3, b13) = {tuple(str(x) for x in got)} in {elapsed:.2f}s")
    assert got == want
    assert elapsed < 1.0


def test_02_weak_inclusiveness(s3_race, report):
    rf, cd = s3_race.race, s3_race.closure
    t0 = time.perf_counter()
    worst = 0
    missing = []
    for i, j in itertools.permutations(range(3), 2):
        g = rf.fs[i] - rf.fs[j]
        for a in range(6):
            w = coset_vanishing(g, cd, a, n_max=10**4)
            if not w.found or int(w.n) % 6 != a:
                missing.append((i, j, a))
            else:
                worst = max(worst, int(w.n))
    elapsed = time.perf_counter() - t0
    ok = not missing and elapsed < 1.0
    report(2, ok, f"30 pair/coset witnesses, largest n = {worst}, missing {missing}, {elapsed:.2f}s")
    assert not missing
    assert elapsed < 1.0


def test_03_inclusiveness_witnesses(s3_race, report):
    rf, cd = s3_race.race, s3_race.closure
    first = {}
    for s in ORDERINGS:
        res = positivity_check(rf, cd, 10**4, s)
        first[">".join(rf.names[i] for i in s)] = res.strict
    ok = all(n is not None and n <= 7 for n in first.values())
    report(3, ok, f"first strict n per ordering: {first}")
    assert ok, f"orderings without a witness n <= 7: {first}"


def test_04_density_normalisation(s3_race, report):
    t0 = time.perf_counter()
    reps = densities(s3_race.race, s3_race.closure, SamplerConfig(seed=4, n_samples=10**6), orderings="all")
    elapsed = time.perf_counter() - t0
    total = sum(r.value.value for r in reps)
    tol = 3 * sum(r.value.stderr for r in reps)
    inside = all(0.001 < r.value.value < 0.999 for r in reps)
    ok = abs(total - 1) <= tol and inside and elapsed < 120
    report(4, ok, f"sum = {total:.6f} (tol {tol:.2e}), values {[round(r.value.value, 4) for r in reps]}, "
                  f"{elapsed:.1f}s")
    assert abs(total - 1) <= tol
    assert inside
    assert elapsed < 120


def _agree(rf, sys, cd, X, cfg):
    """Largest |empirical - Monte Carlo| / combined stderr over all orderings."""
    reps = densities(rf, cd, cfg, orderings="all")
    worst = 0.0
    for rep in reps:
        emp = empirical_density(rf, sys, X, rep.ordering)
        p = emp.value
        se = math.sqrt(rep.value.stderr**2 + p * (1 - p) / X)
        worst = max(worst, abs(p - rep.value.value) / max(se, 1e-12))
    return worst


def test_05_orbit_vs_measure(s3_race, report):
    t0 = time.perf_counter()
    X = 10**6
    cfg = SamplerConfig(seed=5, n_samples=200_000)
    ratios = [_agree(s3_race.race, s3_race.system, s3_race.closure, X, cfg)]
    rng = np.random.default_rng(2024)
    for _ in range(10):
        r = int(rng.integers(2, 5))
        sys, _ = random_angles(rng, r, int(rng.integers(1, r)))
        lat, cd = closure_from_system(sys)
        rf = random_race(rng, r, D=int(rng.integers(2, 4)))
        ratios.append(_agree(rf, sys, cd, X, cfg))
    elapsed = time.perf_counter() - t0
    ok = max(ratios) <= 3 and elapsed < 300
    report(5, ok, f"max |emp - MC|/se over 11 races = {max(ratios):.2f}, {elapsed:.1f}s")
    assert max(ratios) <= 3
    assert elapsed < 300


def test_06_degenerate_exactness(report):
    sys = AngleSystem.parse(["pi/2"])
    lat, cd = closure_from_system(sys)
    rf = RaceFunctions((LaurentPoly.cosine(1, (1,), 1.0), LaurentPoly.constant(1, 0.0)))
    rep = densities(rf, cd)[0]
    quarter = rep.exact == Fraction(1, 4) and rep.value.value == 0.25
    pi2 = rep.exact
    rng = np.random.default_rng(6)
    multiples = True
    for _ in range(20):
        r = int(rng.integers(1, 4))
        sys = degenerate_angles(rng, r)
        lat, cd = closure_from_system(sys)
        for rep in densities(random_race(rng, r, 3), cd, orderings="all"):
            multiples &= rep.exact is not None and (rep.exact * cd.d).denominator == 1
    ok = quarter and multiples
    report(6, ok, f"pi/2 density = {pi2}, "
                  f"20 degenerate races give multiples of 1/d: {multiples}")
    assert quarter and multiples


def test_07_chebotarev_residuals(s3_spec, counts10, report):
    rows = residual_check(s3_spec, counts10, range(3, 11))
    worst = max(rows, key=lambda r: r.residual * 7 ** (r.n / 6))
    ok = all(r.ok for r in rows) and s3_spec.residual_constant <= 10
    report(7, ok, f"C = {s3_spec.residual_constant}, max residual*7^(n/6) = "
                  f"{worst.residual * 7 ** (worst.n / 6):.3f} at n={worst.n} {worst.cls}")
    assert ok


def test_08_place_counts(counts10, report):
    live = count_places(7, 10)
    necklace_ok = all(live[n] == necklace(n, 7) + (n == 1) for n in range(1, 11))
    brute_ok = all(count_places_bruteforce(7, n) == live[n] for n in range(1, 5))
    frozen = frozen_counts()
    table_ok = all(counts10.pi_K[n] == frozen[n]["pi_K"]
                   and all(counts10.pi_C[n][c] == frozen[n][f"pi_{c}"] for c in ("C1", "C2", "C3"))
                   and counts10.ramified[n] == frozen[n]["ramified"]
                   for n in range(1, 11))
    ok = necklace_ok and brute_ok and table_ok
    report(8, ok, f"necklace n<=10: {necklace_ok}, brute force n<=4: {brute_ok}, class table: {table_ok}")
    assert ok


def _moment_instance(rng, kind):
    r = 3
    if kind == "degenerate":
        base, _ = random_angles(rng, r - 1, 0)
        tail = mp.pi * int(rng.integers(1, 12)) / int(rng.integers(1, 7))
        sys = AngleSystem(tuple(base.angles) + (tail,))
    else:
        base, _ = random_angles(rng, r, 0)
        t = list(base.angles)
        shift = mp.pi * int(rng.integers(1, 12)) / int(rng.integers(1, 7))
        if kind == "sum":
            t[1] = shift - t[0]
        elif kind == "diff":
            t[1] = t[0] + shift
        sys = AngleSystem(tuple(t))
    return sys


def test_09_moment_formulas(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    kinds = ["none", "sum", "diff", "degenerate"]
    worst = 0.0
    seen = {k: 0 for k in kinds}
    for i in range(50):
        kind = kinds[i % 4]
        with mp.workprec(400):
            sys = _moment_instance(rng, kind)
        lat, cd = closure_from_system(sys)
        f = degree_one(rng, 3)
        rep = closed_form_moments(f, cd, lat)
        if (kind in ("sum", "diff")) == bool(rep.pair_relations) and (kind == "degenerate") == bool(rep.degenerate):
            seen[kind] += 1
        for cm, sm in zip(rep.per_coset, mc_moments(f, cd, SamplerConfig(seed=i, n_samples=100_000))):
            worst = max(worst, abs(cm.mean - sm.mean) / max(sm.mean_se, 1e-12),
                        abs(cm.variance - sm.variance) / max(sm.variance_se, 1e-12))
    elapsed = time.perf_counter() - t0
    ok = worst <= 3 and all(v == 12 or v == 13 for v in seen.values()) and elapsed < 120
    report(9, ok, f"max |closed - MC|/se = {worst:.2f} over 50 instances {seen}, {elapsed:.1f}s")
    assert worst <= 3
    assert all(v in (12, 13) for v in seen.values())
    assert elapsed < 120


def _primes(n):
    out, k = [], 2
    while len(out) < n:
        if all(k % p for p in out):
            out.append(k)
        k += 1
    return out


def _bounded_d_fixture(N):
    """theta = 1, 1/3, 2/3, 4/3, 5/3, 2, ... (k/3 without repeating 1)."""
    thetas = [mpf(1)] + [mpf(k) / 3 for k in range(1, 3 * N) if k != 3][: N - 1]
    rels = []
    for j in range(1, N):
        v = [0] * N
        v[0], v[j] = -int(round(thetas[j] * 3)), 3
        rels.append(v)
    return thetas, rels


def test_10_almost_periodic_variance(report):
    t0 = time.perf_counter()
    worst = 0.0
    details = []
    with mp.workprec(320):
        for N in (4, 16, 64):
            a = tuple(2.0 ** -(n + 1) for n in range(N))
            indep = APSeries(0.0, tuple(mp.log(p) for p in _primes(N)), a)
            lat = RelationLattice.declared(indep.system(), ())
            thetas, rels = _bounded_d_fixture(N)
            bounded = APSeries(0.0, tuple(thetas), a)
            lat_b = RelationLattice.declared(bounded.system(), rels)
            for name, s, lt in (("independent", indep, lat), ("bounded-d", bounded, lat_b)):
                m = sample_moments(s, incremental_basis(s, lt), SamplerConfig(seed=N, n_samples=10**6))
                z = abs(m.variance - s.closed_variance()) / m.variance_se
                worst = max(worst, z)
                details.append(f"{name} N={N}: {z:.2f}")
    elapsed = time.perf_counter() - t0
    ok = worst <= 3 and elapsed < 60
    report(10, ok, f"|var - 2 sum|a|^2|/se: {', '.join(details)}; {elapsed:.1f}s")
    assert worst <= 3
    assert elapsed < 60


def test_11_convolution(report):
    t0 = time.perf_counter()
    fixtures = [
        (["1", "sqrt(2)"], [1.0, 0.7], 1),
        (["1", "2", "sqrt(2)"], [0.8, 0.5, 0.6], 2),
        (["sqrt(2)", "sqrt(3)", "sqrt(5)", "sqrt(7)"], [0.5, 0.4, 0.3, 0.2], 2),
        (["1", "1/3", "sqrt(2)", "2*sqrt(2)"], [0.6, 0.3, 0.5, 0.25], 2),
        (["sqrt(2)", "sqrt(3)+sqrt(5)", "sqrt(3)-sqrt(5)+4"], [0.9, 0.4, 0.4], 1),
    ]
    ratios = []
    with mp.workprec(320):
        from kwrace.angles import parse_angle

        for k, (th, a, split) in enumerate(fixtures):
            s = APSeries(0.0, tuple(parse_angle(x) for x in th), tuple(a))
            rep = convolution_check(s, lattice_for(s), split, SamplerConfig(seed=k, n_samples=100_000))
            ratios.append(rep.max_ratio)
        bad = APSeries(0.0, tuple(parse_angle(x) for x in ["1", "sqrt(2)", "1+sqrt(2)"]), (0.5, 0.5, 0.5))
        try:
            convolution_check(bad, lattice_for(bad), 1)
            raised = False
        except NotDirectSum:
            raised = True
    elapsed = time.perf_counter() - t0
    ok = max(ratios) <= 1 and raised and elapsed < 60
    report(11, ok, f"max deviation / 3-stderr band = {[round(r, 2) for r in ratios]}, "
                   f"NotDirectSum raised: {raised}, {elapsed:.1f}s")
    assert max(ratios) <= 1
    assert raised
    assert elapsed < 60


def test_12_equidistribution(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(12)
    X = 10**6
    sys, _ = random_angles(rng, 3, 1)
    lat, cd = closure_from_system(sys)
    outside_ok, inside_ok = True, True
    worst_ratio = 0.0
    worst_inside = 0.0
    n_out = 0
    while n_out < 20:
        e = tuple(int(x) for x in rng.integers(-3, 4, size=3))
        with mp.workprec(320):
            w = mp.expj(mp.fsum(k * t for k, t in zip(e, sys.angles)))
        if abs(w - 1) < 1e-6:
            continue
        avg = orbit_average(LaurentPoly.monomial(3, e), sys, X).value
        bound = 10 * 2 / (X * float(abs(w - 1)))
        worst_ratio = max(worst_ratio, abs(avg) / bound * 10)
        outside_ok &= abs(avg) <= bound
        n_out += 1
    for _ in range(10):
        coeffs = rng.integers(-2, 3, size=lat.rank)
        v = [int(sum(int(c) * rel[k] for c, rel in zip(coeffs, lat.relations))) for k in range(4)]
        e = tuple(v[1:])
        if not any(e):
            continue
        assert _ratlin.in_row_space(v, lat.relations)
        exact = complex(np.prod([cd.nu[k] ** e[k] for k in range(3)]))
        avg = orbit_average(LaurentPoly.monomial(3, e), sys, X).value
        worst_inside = max(worst_inside, abs(avg - exact))
        inside_ok &= abs(avg - exact) <= 1e-10
    elapsed = time.perf_counter() - t0
    ok = outside_ok and inside_ok and elapsed < 60
    report(12, ok, f"outside: max |avg|/(2/(X|w-1|)) = {worst_ratio:.3f} (limit 10); "
                   f"inside: max error {worst_inside:.1e}; {elapsed:.1f}s")
    assert outside_ok and inside_ok
    assert elapsed < 60
