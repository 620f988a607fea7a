import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from mpmath import mp, mpf

from helpers import DATA, degenerate_angles, random_angles
from kwrace import _ratlin
from kwrace.angles import (AngleSystem, Mode, RelationLattice, closure_from_system, detect_relations,
                           eval_expr, parse_angle, pi_rational_indices, relation_residual,
                           verify_relation)
from kwrace.errors import InconsistentLattice, InputError, PrecisionTooLow

S3 = json.loads((DATA / "s3_expected.json").read_text())
S3_EXPRS = ["pi - atan(sqrt(3)/2)", "pi - atan(3*sqrt(3))", "pi"]


def test_parse_expressions():
    assert parse_angle("2*pi/3") == pytest.approx(2.0943951023931953)
    assert parse_angle("-1/2") == -0.5
    with mp.workprec(300):
        x = parse_angle("0.1234567890123456789012345678901234567890", 300)
        assert abs(x - mpf("0.1234567890123456789012345678901234567890")) < mpf(2) ** -250
    assert eval_expr(3, 64) == 3


@pytest.mark.parametrize("bad", ["pi +", "foo(2)", "import os", "x"])
def test_parse_rejects(bad):
    with pytest.raises(InputError):
        parse_angle(bad)


def test_s3_relations_frozen():
    sys = AngleSystem.parse(S3_EXPRS)
    assert np.allclose(sys.floats(), S3["angles"], atol=1e-15)
    lat, cd = closure_from_system(sys)
    assert [list(v) for v in lat.relations] == S3["relations"]
    assert (cd.d, cd.m) == (S3["d"], S3["m"])
    assert {str(k + 1): str(v) for k, v in cd.c.items()} == S3["c"]
    assert {f"{k + 1},{j + 1}": str(v) for (k, j), v in cd.b.items()} == S3["b"]
    assert pi_rational_indices(lat, 3) == {2}


def test_generic_angle_has_no_relation():
    lat = detect_relations(AngleSystem.parse(["sqrt(2) - 1/7"]))
    assert lat.relations == ()


def test_continuous_relation():
    sys = AngleSystem.parse(["1", "sqrt(2)", "1 + sqrt(2)"], Mode.CONTINUOUS)
    lat, cd = closure_from_system(sys)
    assert lat.relations == ((-1, -1, 1),)
    assert cd.cosets == range(1) and cd.basis == (0, 1)


def test_precision_guard():
    sys = AngleSystem.parse([f"sqrt({p})" for p in (2, 3, 5, 7, 11, 13, 17, 19)])
    with pytest.raises(PrecisionTooLow):
        detect_relations(sys, max_coeff=10**4, precision_bits=128)


def test_declared_relation_checked():
    sys = AngleSystem.parse(["1", "sqrt(2)"], Mode.CONTINUOUS)
    with pytest.raises(InconsistentLattice):
        RelationLattice.declared(sys, [(1, 1)])
    assert RelationLattice.declared(sys, ()).rank == 0


def test_verify_relation_residual():
    sys = AngleSystem.parse(S3_EXPRS)
    assert verify_relation(sys, S3["relations"][0])
    assert relation_residual(sys, [0, 1, 0, 0], 256) > 0.01


@given(st.integers(0, 10**6), st.integers(2, 4))
def test_planted_round_trip(seed, r):
    rng = np.random.default_rng(seed)
    sys, planted = random_angles(rng, r, int(rng.integers(1, r)))
    lat, cd = closure_from_system(sys)
    assert lat.rank == len(planted)
    tol = mpf(2) ** (-(256 // 2) + 8) * 2 * mp.pi
    with mp.workprec(sys.prec):
        for j in cd.dependent:
            c = cd.c[j]
            rebuilt = 2 * mp.pi * mpf(c.numerator) / c.denominator + sum(
                mpf(cd.b[(k, j)].numerator) / cd.b[(k, j)].denominator * sys.angles[k] for k in cd.basis)
            assert abs(rebuilt - sys.angles[j]) <= tol
    # each relation, rewritten over the basis, is exactly zero
    for v in lat.relations:
        total = [Fraction(v[0])] + [Fraction(0)] * cd.m
        for k in cd.basis:
            total[1 + cd.basis.index(k)] += v[k + 1]
        for j in cd.dependent:
            total[0] += v[j + 1] * cd.c[j]
            for k in cd.basis:
                total[1 + cd.basis.index(k)] += v[j + 1] * cd.b[(k, j)]
        assert all(x == 0 for x in total[1:])
        assert total[0].denominator == 1


@given(st.integers(0, 10**6))
def test_d_invariant_under_permuting_dependents(seed):
    rng = np.random.default_rng(seed)
    sys, _ = random_angles(rng, 4, 2)
    _, cd = closure_from_system(sys)
    perm = list(range(sys.r))
    perm[2], perm[3] = perm[3], perm[2]
    _, cd2 = closure_from_system(AngleSystem(tuple(sys.angles[i] for i in perm)))
    assert cd2.d == cd.d


@given(st.integers(0, 10**6), st.booleans())
def test_degeneracy_flag(seed, degenerate):
    rng = np.random.default_rng(seed)
    sys = degenerate_angles(rng, 3) if degenerate else random_angles(rng, 3, 1)[0]
    lat, cd = closure_from_system(sys)
    # a relation supported on {2 pi, i} exists iff e_i lies in span(R, e_0)
    rows = [list(v) for v in lat.relations] + [[1, 0, 0, 0]]
    supported = all(_ratlin.in_row_space([int(k == i + 1) for k in range(4)], rows) for i in range(3))
    assert cd.degenerate == supported == degenerate


def test_closure_json_round():
    sys = AngleSystem.parse(S3_EXPRS)
    lat, cd = closure_from_system(sys)
    js = cd.to_json()
    assert js["d"] == 6 and js["h"] == {"1,2": -6, "1,3": 0} and js["l"] == {"2": 4, "3": 3}
    assert lat.to_json()["max_coeff"] == 10**4


def test_numpy_scalars_parse():
    assert parse_angle(np.float64(0.5)) == mpf("0.5")
    assert parse_angle(np.int64(3)) == 3
    assert eval_expr(np.float32(0.25), 64) == mpf("0.25")
