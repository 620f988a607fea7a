from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import degenerate_angles, random_angles, random_poly
from kwrace.angles import AngleSystem, Mode, closure_from_system
from kwrace.errors import CosetOutOfRange, NotDegenerate
from kwrace.laurent import LaurentPoly, orbit_phases
from kwrace.sampler import (EstimateWithCI, Method, SamplerConfig, coset_draws, degenerate_phases,
                            enumerate_orbit, eval_on_coset, expectation, orbit_average, sample_phases, sample_Z,
                            stream, wilson_ci)

S3 = AngleSystem.parse(["pi - atan(sqrt(3)/2)", "pi - atan(3*sqrt(3))", "pi"])


def _wrap(x):
    return np.abs((x + np.pi) % (2 * np.pi) - np.pi)


@given(st.integers(0, 10**6))
def test_closure_membership(seed):
    rng = np.random.default_rng(seed)
    sys, _ = random_angles(rng, 3, 1)
    _, cd = closure_from_system(sys)
    th = np.array(sys.floats())
    H = cd.h_matrix().astype(float)
    for n in rng.integers(0, 500, size=5):
        a, k = int(n) % cd.d, int(n) // cd.d
        u = k * th[list(cd.basis)] / (2 * np.pi)
        ph = 2 * np.pi * (H @ u) + cd.coset_phases(a)
        assert _wrap(ph - th * n).max() < 1e-8


@settings(max_examples=20)
@given(st.integers(0, 10**6))
def test_haar_invariance(seed):
    """E f(Z h) = E f(Z) for h drawn from the identity component."""
    rng = np.random.default_rng(seed)
    sys, _ = random_angles(rng, 3, 1)
    _, cd = closure_from_system(sys)
    f = random_poly(rng, 3, n_terms=3, max_deg=3)
    h = sample_phases(cd, 0, rng, 1)[0]
    g = LaurentPoly(3, {e: a * np.exp(1j * float(np.dot(e, h))) for e, a in f.terms.items()})
    cfg = SamplerConfig(seed=seed, n_samples=20_000)
    e1 = expectation(f, cd, cfg, tag=1)
    e2 = expectation(g, cd, cfg, tag=2)
    assert abs(e1.value - e2.value) <= 3 * np.hypot(e1.stderr, e2.stderr) + 1e-12


def test_monomial_law():
    """A monomial has mean zero unless it is trivial on H, in which case it is constant on cosets."""
    _, cd = closure_from_system(S3)
    cfg = SamplerConfig(seed=3, n_samples=20_000)
    mono = LaurentPoly.monomial(3, (1, 0, 0))
    e = expectation(mono, cd, cfg)
    assert abs(e.value) < 4 * e.stderr + 1e-12
    triv = LaurentPoly.monomial(3, (3, 3, 0))  # 3 theta_1 + 3 theta_2 = 4 pi
    assert abs(expectation(triv, cd, cfg).value - 1) < 1e-9
    u = np.random.default_rng(0).random((100, cd.m))
    for a in cd.cosets:
        vals = eval_on_coset([triv], cd, a, u, complex_out=True)[:, 0]
        assert np.allclose(vals, vals[0])


def test_reproducible_and_chunk_independent():
    _, cd = closure_from_system(S3)
    f = LaurentPoly.cosine(3, (1, 2, 0), 0.3 + 0.1j) + 1
    a = expectation(f, cd, SamplerConfig(seed=9, n_samples=5000, chunk=1000))
    b = expectation(f, cd, SamplerConfig(seed=9, n_samples=5000, chunk=1000))
    assert a == b
    cfg = SamplerConfig(seed=9, n_samples=5000, chunk=1000)
    blocks = list(coset_draws(cd, 2, cfg))
    # each chunk is its own sub-stream, so it can be regenerated in isolation
    assert np.array_equal(blocks[3], stream(9, 0, 2, 3).random((1000, cd.m)))
    c = expectation(f, cd, SamplerConfig(seed=10, n_samples=5000, chunk=1000))
    assert c.value != a.value


@given(st.integers(0, 10**6))
def test_degenerate_exact(seed):
    rng = np.random.default_rng(seed)
    sys = degenerate_angles(rng, 2)
    _, cd = closure_from_system(sys)
    assert cd.degenerate
    pts = enumerate_orbit(cd)
    assert pts.shape == (cd.d, 2)
    assert np.allclose(np.angle(pts), np.angle(np.exp(1j * orbit_phases(sys, np.arange(cd.d)))), atol=1e-9)
    f = LaurentPoly.cosine(2, (1, 0), 1.0)
    e = expectation(f, cd)
    assert e.method is Method.EXACT and e.stderr == 0
    assert e.value == pytest.approx(orbit_average(f, sys, cd.d * 50).value, abs=1e-9)
    with pytest.raises(NotDegenerate):
        sample_phases(cd, 0, rng, 1)


def test_degenerate_phases_exact_fractions():
    _, cd = closure_from_system(AngleSystem.parse(["pi/2"]))
    assert cd.d == 4 and cd.c[0] == Fraction(1, 4)
    assert np.allclose(degenerate_phases(cd)[:, 0], [0, np.pi / 2, np.pi, 3 * np.pi / 2])


def test_coset_out_of_range_and_infinite_orbit():
    _, cd = closure_from_system(S3)
    with pytest.raises(CosetOutOfRange):
        sample_Z(cd, cd.d, np.random.default_rng(0))
    with pytest.raises(NotDegenerate):
        enumerate_orbit(cd)
    assert abs(abs(sample_Z(cd, 1, np.random.default_rng(0))[2]) - 1) < 1e-12


def test_orbit_average_agrees_with_expectation():
    _, cd = closure_from_system(S3)
    f = LaurentPoly.cosine(3, (1, 1, 0), 1.0) + LaurentPoly.cosine(3, (3, 3, 0), 1.0)
    e = expectation(f, cd, SamplerConfig(seed=1, n_samples=50_000))
    o = orbit_average(f, S3, 10**6)
    assert o.method is Method.ORBIT
    assert abs(o.value - e.value) < 4 * e.stderr + 1e-3


def test_continuous_orbit_average():
    sys = AngleSystem.parse(["1", "sqrt(2)"], Mode.CONTINUOUS)
    f = LaurentPoly.cosine(2, (1, -1), 1.0) + 0.5
    o = orbit_average(f, sys, 2000.0)
    assert o.value == pytest.approx(0.5, abs=5e-3)


def test_estimate_invariants_and_ci():
    with pytest.raises(ValueError):
        EstimateWithCI(0.5, -1.0, 10, Method.MONTE_CARLO)
    with pytest.raises(ValueError):
        EstimateWithCI(0.5, 0.1, 10, Method.EXACT)
    lo, hi = wilson_ci(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(0.192, abs=0.005)
    assert wilson_ci(0, 100)[0] == 0.0
