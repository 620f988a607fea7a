from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from kwrace.almost_periodic import (APSeries, align_series, ap_density, convolution_check, exact_l2_increment,
                                    incremental_basis, is_direct_sum, l2_increment, lattice_for, sample_moments,
                                    sample_S, span_dimension)
from kwrace.angles import parse_angle
from kwrace.density import Existence
from kwrace.errors import DimensionMismatch, HypothesisUnverified, InputError, NotDirectSum
from kwrace.sampler import SamplerConfig

PRIMES = (2, 3, 5, 7, 11)


def _series(thetas, a, c=0.0):
    return APSeries(c, tuple(parse_angle(x, 320) for x in thetas), tuple(a))


def _mc_increment(s, ib, n, m, seed, size=40_000):
    """Monte Carlo E|S_m - S_n|^2 from shared torus draws."""
    sm = sample_S(s, ib, np.random.default_rng(seed), size, m)
    sn = sample_S(s, ib, np.random.default_rng(seed), size, n)
    v = (sm - sn) ** 2
    return v.mean(), v.std(ddof=1) / np.sqrt(size)


def _random_series(rng, N):
    """N positive frequencies: a few sqrt(p) multiples and positive rational combinations of them."""
    m = int(rng.integers(1, 3))
    with mp.workprec(320):
        base = [mp.sqrt(p) * mpf(int(rng.integers(1, 4))) / int(rng.integers(1, 4))
                for p in rng.choice(PRIMES, size=m, replace=False)]
        thetas = list(base)
        while len(thetas) < N:
            coeffs = [Fraction(int(rng.integers(0, 3)), int(rng.integers(1, 4))) for _ in range(m)]
            if not any(coeffs):
                continue
            t = sum(mpf(c.numerator) / c.denominator * b for c, b in zip(coeffs, base))
            if all(abs(t - u) > 1e-6 for u in thetas):
                thetas.append(t)
        order = rng.permutation(N)
        thetas = [thetas[i] for i in order]
    a = tuple(complex(rng.normal(), rng.normal()) / (k + 1) for k in range(N))
    return APSeries(float(rng.normal()), tuple(thetas), a)


def test_sample_moments_match_closed_variance():
    s = _series(["sqrt(2)", "sqrt(3)", "sqrt(2)+sqrt(3)"], [0.5, 0.3j, 0.2 + 0.1j], c=1.0)
    lat = lattice_for(s)
    ib = incremental_basis(s, lat)
    assert ib.basis == (0, 1) and ib.coeff_vector(2) == (Fraction(1), Fraction(1))
    m = sample_moments(s, ib, SamplerConfig(seed=1, n_samples=200_000))
    assert abs(m.mean - 1.0) < 4 * m.mean_se
    assert abs(m.variance - s.closed_variance()) < 4 * m.variance_se
    draws = sample_S(s, ib, np.random.default_rng(0), 10)
    assert draws.shape == (10,) and np.all(np.abs(draws - 1.0) <= 2 * (0.5 + 0.3 + abs(0.2 + 0.1j)) + 1e-12)


@settings(max_examples=20)
@given(st.integers(0, 10**6))
def test_l2_increment_against_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, 5))
    s = _random_series(rng, N)
    ib = incremental_basis(s, lattice_for(s))
    n = int(rng.integers(1, N))
    m = int(rng.integers(n + 1, N + 1))
    cfg = SamplerConfig(seed=seed, n_samples=40_000)
    try:
        res = l2_increment(s, ib, n, m, cfg)
    except HypothesisUnverified:
        res = None
    if res is None:
        mc, se = _mc_increment(s, ib, n, m, seed)
        assert abs(exact_l2_increment(s, ib, n, m) - mc) <= 4 * se + 1e-9
        return
    tol = 4 * res.mc_se + 1e-9
    assert abs(res.exact - res.mc) <= tol
    if res.closed_form_valid:
        assert abs(res.closed_form - res.mc) <= tol
    if res.hypothesis == "bounded_d":
        assert res.closed_form_valid


def test_closed_form_counterexample():
    # theta_2 = (2/3) theta_1: d_1 = 1, d_2 = 3 and no integer multiples
    s = _series(["1", "2/3"], [1.0, 0.5])
    ib = incremental_basis(s, lattice_for(s))
    assert ib.d_seq == (1, 3)
    res = l2_increment(s, ib, 1, 2, SamplerConfig(seed=2, n_samples=100_000))
    assert res.hypothesis == "no_integer_multiple" and not res.closed_form_valid
    assert res.closed_form == pytest.approx(0.5) and res.exact == pytest.approx(4.5)
    assert abs(res.mc - 4.5) < 4 * res.mc_se


def test_hypothesis_unverified():
    s = _series(["1", "1/2"], [1.0, 0.5])
    ib = incremental_basis(s, lattice_for(s))
    with pytest.raises(HypothesisUnverified):
        l2_increment(s, ib, 1, 2)
    mc, se = _mc_increment(s, ib, 1, 2, 7)
    assert abs(exact_l2_increment(s, ib, 1, 2) - mc) <= 4 * se


def test_span_dimensions_and_direct_sum():
    s = _series(["1", "sqrt(2)", "1+sqrt(2)"], [0.5, 0.5, 0.5])
    lat = lattice_for(s)
    assert span_dimension(lat, [0, 1, 2], 3) == 2
    assert span_dimension(lat, [0], 3) == 1 and span_dimension(lat, [1, 2], 3) == 2
    assert not is_direct_sum(lat, 1, 3)
    with pytest.raises(NotDirectSum):
        convolution_check(s, lat, 1)
    t = _series(["1", "2", "sqrt(2)"], [0.8, 0.5, 0.6])
    assert is_direct_sum(lattice_for(t), 2, 3)


def test_convolution_report_shape():
    s = _series(["1", "sqrt(2)"], [1.0, 0.7])
    rep = convolution_check(s, lattice_for(s), 1, SamplerConfig(seed=3, n_samples=20_000), grid=[0.0, 0.5, 1.0])
    assert len(rep.deviation) == 3 and rep.deviation[0] == pytest.approx(0.0, abs=1e-12)
    assert rep.max_ratio == pytest.approx(max(d / b for d, b in zip(rep.deviation, rep.band) if b > 0))


def test_shifted_series_density_one():
    s = _series(["sqrt(2)", "sqrt(3)"], [0.5, 0.4])
    shifted = APSeries(s.c + 1.0, s.thetas, s.a)
    rep = ap_density([shifted, s], lattice_for(s), 2, SamplerConfig(seed=4, n_samples=10_000))
    assert rep.existence is Existence.EXISTS and rep.value.value == 1.0 and rep.delta == 0.0


def test_two_series_antisymmetric():
    th = ["sqrt(2)", "sqrt(3)", "sqrt(5)"]
    s1 = _series(th, [0.5, 0.2, 0.1])
    s2 = _series(th, [0.1, 0.4, 0.3j])
    lat = lattice_for(s1)
    cfg = SamplerConfig(seed=5, n_samples=20_000)
    p12 = ap_density([s1, s2], lat, 1, cfg)
    p21 = ap_density([s2, s1], lat, 1, cfg)
    assert p12.existence is Existence.EXISTS and p12.separated == (True,)
    assert p12.value.value + p21.value.value == pytest.approx(1.0, abs=1e-12)
    assert p12.delta == abs(p12.value.value - p12.value_half)


def test_unseparated_pair_bounds_only():
    th = ["sqrt(2)", "sqrt(3)"]
    s1 = _series(th, [0.5, 0.2])
    s2 = _series(th, [0.5, 0.4])
    rep = ap_density([s1, s2], lattice_for(s1), 1, SamplerConfig(seed=6, n_samples=10_000))
    assert rep.existence is Existence.BOUNDS_ONLY and rep.lower <= rep.upper


def test_csv_ingestion(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("theta,re,im\n0,1.5,\nsqrt(2),0.5,0.1\n# comment\npi,0.25\n")
    s = APSeries.from_csv(p)
    assert s.c == 1.5 and s.N == 2 and s.a == (0.5 + 0.1j, 0.25 + 0j)
    assert float(s.thetas[1]) == pytest.approx(np.pi)
    bad = tmp_path / "bad.csv"
    bad.write_text("sqrt(2)\n")
    with pytest.raises(InputError):
        APSeries.from_csv(bad)
    with pytest.raises(InputError):
        APSeries.from_csv(tmp_path / "missing.csv")


def test_series_validation_and_alignment():
    with pytest.raises(InputError):
        _series(["-1"], [1.0])
    with pytest.raises(InputError):
        _series(["1", "1"], [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        _series(["1"], [1.0, 2.0])
    a, b = align_series([_series(["1", "sqrt(2)"], [1.0, 2.0]), _series(["sqrt(2)", "sqrt(3)"], [3.0, 4.0])])
    assert a.N == b.N == 3 and a.a == (1, 2, 0) and b.a == (0, 3, 4)
    with pytest.raises(DimensionMismatch):
        ap_density([_series(["1"], [1.0]), _series(["2"], [1.0])], lattice_for(_series(["1"], [1.0])), 1)
