import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from szego_lab import PowerLaw, a0_e0, admissible_shift, coulomb, explicit, free, one_sided_step_rule, step_sum_rule

B1_2 = explicit({1: (1.0, 2.0)})


def test_free_all_zero():
    r = step_sum_rule(free(), 3, 200)
    for v in (r.lhs, r.coeff_term, r.eig_term, r.rhs_tail):
        assert abs(v) < 1e-8
    assert abs(r.residual) < 1e-8
    r = one_sided_step_rule(free(), "-", 2, 200)
    assert abs(r.lhs) < 1e-8 and abs(r.residual) < 1e-8 and r.eig_term == 0.0


def test_rank_one_step(frozen):
    r = step_sum_rule(B1_2, 1, 2000)
    assert r.lhs == pytest.approx(frozen["Z_b1_2"], abs=1e-3)
    assert r.coeff_term == 0.0
    assert r.eig_term == pytest.approx(math.log(2), abs=1e-9)
    assert abs(r.rhs_tail) < 1e-8
    assert abs(r.residual) < 1e-3
    assert not r.diverged


def test_rank_one_one_sided(frozen):
    r = one_sided_step_rule(B1_2, "+", 1, 2000)
    assert r.coeff_term == pytest.approx(-1.0, abs=1e-15)
    assert r.eig_term == pytest.approx(math.log(2) + 0.75, abs=1e-9)
    assert abs(r.rhs_tail) < 1e-8
    assert r.lhs == pytest.approx(frozen["Z1_plus_b1_2"], abs=1e-3)
    assert abs(r.residual) < 1e-3


def test_coulomb_step_against_oracle(frozen):
    ref = frozen["sumrule_coulomb_1_1_n5_N4000"]
    r = step_sum_rule(coulomb(1, 1), 5, 4000)
    assert abs(r.residual) < 5e-3
    assert abs(r.residual) <= r.error_budget
    assert r.lhs == pytest.approx(ref["Z_J"], abs=r.error_budget)
    assert r.rhs_tail == pytest.approx(ref["Z_J5"], abs=r.error_budget)
    assert r.eig_term == pytest.approx(ref["eig"], abs=1e-8)
    assert r.coeff_term == pytest.approx(ref["coeff"], abs=1e-14)
    # the oracle's own pieces close the identity
    assert ref["Z_J"] - (ref["coeff"] + ref["eig"] + ref["Z_J5"]) == pytest.approx(0, abs=1e-9)


def test_one_sided_finite_where_z_diverges():
    seq = coulomb(0, 1)
    r = one_sided_step_rule(seq, "+", 4, 4000)
    assert not r.diverged and abs(r.residual) < 1e-2
    z = step_sum_rule(seq, 4, 4000)
    assert z.diverged and math.isnan(z.residual)
    assert z.diverged_edges["J"]["-2"] and z.diverged_edges["J_n"]["-2"]


@settings(max_examples=8)
@given(st.floats(0, 2), st.floats(-2, 2), st.integers(1, 6))
def test_eig_term_nonnegative(alpha, beta, n):
    r = step_sum_rule(coulomb(alpha, beta), n, 400, per_unit=64)
    assert r.eig_term >= -1e-9


def test_strip_bounds_checked():
    with pytest.raises(ValueError):
        step_sum_rule(free(), 60, 200)


def test_a0_e0_free():
    partial, e0 = a0_e0(free(), 100)
    assert np.all(partial == 0) and e0 == 0


def test_a0_e0_separation_fails_for_shifted_coulomb():
    tilde = admissible_shift(coulomb(1, 0), PowerLaw(1.0, 1.0))
    sums = [a0_e0(tilde, h) for h in (500, 1000, 2000)]
    lasts = [p[-1] for p, _ in sums]
    e0s = [e for _, e in sums]
    # partial sums behave like -(alpha + c) ln k = -2 ln k
    assert lasts[2] - lasts[1] == pytest.approx(-2 * math.log(2), rel=0.02)
    assert lasts[1] - lasts[0] == pytest.approx(-2 * math.log(2), rel=0.02)
    # and the eigenvalue sum keeps growing by a comparable amount
    assert e0s[2] - e0s[1] > 1.0 and e0s[1] - e0s[0] > 1.0
