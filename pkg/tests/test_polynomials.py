import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from szego_lab import coulomb, envelope_bounds_check, envelope_run, free, state_at
from szego_lab.polynomials import (
    advance,
    block_monotonicity_check,
    dombrowski_residual,
    envelope_integrals,
    initial_state,
    tail_gap,
)

from oracles import coulomb_arrays, polys_mp


def test_free_first_steps():
    s0 = initial_state(free(), 0.0)
    s1 = advance(s0, free())
    s2 = advance(s1, free())
    assert s1.p_curr == 0.0 and s2.p_curr == -1.0


@given(st.floats(-2, 2), st.integers(0, 300))
def test_free_envelope_is_one_and_chebyshev(x, n):
    st_ = state_at(free(), x, n)
    assert st_.s == pytest.approx(1.0, abs=1e-12) and st_.t == pytest.approx(1.0, abs=1e-12)
    th = math.acos(max(-1.0, min(1.0, x / 2)))
    if math.sin(th) > 1e-3:
        ref = math.sin((n + 1) * th) / math.sin(th)
        assert st_.p_curr == pytest.approx(ref, abs=1e-9 * (n + 1) / math.sin(th))


@pytest.mark.parametrize(
    "key,alpha,beta,x,n",
    [("coulomb_1_1_x1.3", 1, 1, 1.3, 50), ("coulomb_0.5_-1_x-1.9", 0.5, -1, -1.9, 200)],
)
def test_against_mpmath(frozen, key, alpha, beta, x, n):
    ref = frozen[key]
    st_ = state_at(coulomb(alpha, beta), x, n)
    assert st_.p_curr == pytest.approx(ref[f"P{n}"], rel=1e-10)
    assert st_.s == pytest.approx(ref[f"S{n}"], rel=1e-10)
    assert st_.t == pytest.approx(ref[f"T{n}"], rel=1e-10)


@pytest.mark.parametrize(
    "seq,x,n,tol",
    [(free(), 0.5, 20, 1e-12), (coulomb(1, 1), 1.3, 50, 1e-10), (coulomb(0.5, -1), -1.9, 200, 1e-9)],
)
def test_dombrowski_examples(seq, x, n, tol):
    assert abs(dombrowski_residual(state_at(seq, x, n), seq, relative=True)) < tol


@given(st.floats(0, 2), st.floats(-2, 2), st.floats(-2, 2), st.integers(1, 2000))
def test_dombrowski_property(alpha, beta, x, n):
    seq = coulomb(alpha, beta)
    assert abs(dombrowski_residual(state_at(seq, x, n), seq, relative=True)) < 1e-9


@given(st.floats(0.01, 2), st.floats(-1, 1), st.floats(-1.99, 1.99), st.integers(1, 3000))
def test_T_dominates_S_when_floor_holds(alpha, beta, x, n):
    beta = beta * 2 * alpha
    st_ = state_at(coulomb(alpha, beta), x, n)
    assert st_.t >= st_.s


@pytest.mark.parametrize(
    "seq,x,n", [(coulomb(1, 0), 1.0, 100), (free(), 0.0, 5), (coulomb(1, 1.5), 1.99, 500)]
)
def test_envelope_bounds_examples(seq, x, n):
    assert envelope_bounds_check(seq, x, n).all_true


def test_envelope_free_reads_4P5sq_le_4():
    st_ = state_at(free(), 0.0, 5)
    assert 4 * st_.p_curr ** 2 <= 4


def test_envelope_inapplicable_when_floor_fails():
    rep = envelope_bounds_check(coulomb(0, 1), 0.3, 10)
    assert not rep.applicable and rep.pointwise_poly_bound is None


def _direct_sign(alpha, beta, x, n, K):
    a, b = coulomb_arrays(alpha, beta, n + K + 3)
    _, lo, _ = polys_mp(a, b, x, n - 1)
    _, hi, _ = polys_mp(a, b, x, n + K - 1)
    return int(np.sign(hi - lo))


@pytest.mark.parametrize("alpha,beta,x,n", [(1, -2.5, 1.97, 300), (1, -2.5, -1.97, 300), (0, 1, -1.99, 1000), (0, 1, 1.99, 1000)])
def test_block_monotonicity_matches_direct_sum(alpha, beta, x, n):
    # the signs themselves are pinned by the mpmath direct sum, not assumed
    assert block_monotonicity_check(coulomb(alpha, beta), x, n, 8) == _direct_sign(alpha, beta, x, n, 8)


def test_block_monotonicity_free_is_zero():
    assert block_monotonicity_check(free(), 0.7, 40, 8) == 0


def test_tail_gap_free():
    assert np.max(tail_gap(free(), np.linspace(-1.9, 1.9, 11), 1000)) < 1e-12


def test_envelope_integrals_free_vanish():
    res = envelope_integrals(free(), [10, 100, 1000], uniform=200, per_decade=20)
    assert np.all(np.abs(res.total) < 1e-10)


def test_envelope_max_decreasing_case():
    # a_n decreasing, b = 0: S_n = T_n is non-increasing in n, starting from a_1^2
    res = envelope_integrals(coulomb(1, 0), [10, 100, 1000], uniform=200, per_decade=20)
    assert np.all(res.max_t <= 4.0) and np.all(np.diff(res.max_t) <= 0)
