import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from szego_lab import (
    ParameterError,
    PowerLaw,
    admissibility,
    admissible_shift,
    coeffs_at,
    coulomb,
    delta_n,
    explicit,
    free,
    reflected,
    regularized_coulomb,
    stripped,
)
from szego_lab.coefficients import check_shift_hypotheses, deltas

from oracles import delta_exact


def test_coeffs_examples():
    assert coeffs_at(free(), 7) == (1.0, 0.0)
    assert coeffs_at(coulomb(1, 0), 4) == (1.25, 0.0)
    assert coeffs_at(coulomb(0, 1), 2) == (1.0, 0.5)


def test_nonpositive_a_names_index():
    with pytest.raises(ParameterError) as err:
        coulomb(-2, 0).arrays(10)
    assert "1" in str(err.value)


def test_regularized_coulomb_only_touches_low_entries():
    seq = regularized_coulomb(-1, -1)
    assert seq.table == ((1, 1.0, -1.0),)
    a, b = seq.arrays(50)
    ref_a, ref_b = coulomb(-1, -1)._raw(50)
    ref_b = ref_b.copy()
    ref_b[0] = 0.0
    assert np.array_equal(a[2:], ref_a[2:]) and np.array_equal(b, ref_b)
    assert regularized_coulomb(1, 0) == coulomb(1, 0)


def test_delta_examples(frozen):
    assert delta_n(free(), 5) == 0.0
    assert delta_n(coulomb(1, 0), 3) == 0.0
    assert delta_n(coulomb(0, 1), 1) == pytest.approx(frozen["delta_coulomb_0_1_n1"], abs=1e-15)
    assert frozen["delta_coulomb_0_1_n1"] == pytest.approx(1 / 3, abs=1e-15)


@given(
    st.floats(-0.9, 2), st.floats(-2, 2), st.integers(1, 300),
)
def test_delta_matches_exact_rationals(alpha, beta, n):
    alpha, beta = round(alpha, 3), round(beta, 3)
    got = delta_n(coulomb(alpha, beta), n)
    ref = float(delta_exact(str(alpha), str(beta), n))
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-15)


@given(st.floats(-0.9, 2), st.floats(-2, 2), st.integers(0, 20))
def test_stripping_and_reflection(alpha, beta, s):
    seq = coulomb(alpha, beta)
    a, b = seq.arrays(60)
    a2, b2 = stripped(seq, s).arrays(40)
    assert np.array_equal(a2[1:], a[1 + s : 41 + s]) and np.array_equal(b2[1:], b[1 + s : 41 + s])
    ar, br = reflected(seq).arrays(40)
    assert np.array_equal(ar, a[:41]) and np.array_equal(br[1:], -b[1:41])


def test_admissibility_examples():
    rep = admissibility(coulomb(1, 1.5), 10_000)
    assert rep.is_admissible_finite
    rep = admissibility(coulomb(0.4, 1), 10_000)
    assert not rep.is_admissible_finite
    # n * delta_n ~ const / n, so each doubling of the horizon adds the same amount
    sums = [admissibility(coulomb(0.4, 1), h).weighted_sum for h in (2_500, 5_000, 10_000)]
    assert sums[2] - sums[1] == pytest.approx(sums[1] - sums[0], rel=0.01)
    assert sums[2] - sums[1] > 0.1
    rep = admissibility(free(), 1000)
    assert rep.is_admissible_finite and rep.weighted_sum == 0.0


def test_floor_violation_reported():
    rep = admissibility(coulomb(0.2, 1), 1000)
    assert not rep.is_admissible_finite
    assert rep.first_violation == 1


def test_shift_examples():
    seq = coulomb(1, 0)
    same = admissible_shift(seq)
    assert np.array_equal(same.arrays(100)[0], seq.arrays(100)[0])
    eps = 0.5
    C = 1.0
    shifted = admissible_shift(seq, PowerLaw(6 * C, 1 + eps))
    assert admissibility(shifted, 10_000).is_admissible_finite
    assert all(check_shift_hypotheses(shifted).values())

    base = coulomb(0.5, 1)
    moved = admissible_shift(base, PowerLaw(1, 2), PowerLaw(1, 2))
    assert admissibility(moved, 10_000).is_admissible_finite == admissibility(base, 10_000).is_admissible_finite


def test_explicit_table():
    seq = explicit({1: (1.0, 2.0)})
    a, b = seq.arrays(5)
    assert b[1] == 2.0 and np.all(b[2:] == 0) and np.all(a[1:] == 1)


def test_seeded_errors_reproducible():
    s1 = coulomb(1, 1, error_amp=0.3, error_exp=0.5, error_seed=7)
    s2 = coulomb(1, 1, error_amp=0.3, error_exp=0.5, error_seed=7)
    a1, b1 = s1.arrays(1000)
    a2, b2 = s2.arrays(1000)
    assert np.array_equal(a1, a2) and np.array_equal(b1, b2)
    ref_a, _ = coulomb(1, 1).arrays(1000)
    n = np.arange(1, 1001)
    assert np.all(np.abs(a1[1:] - ref_a[1:]) <= 0.3 * n ** -1.5 + 1e-15)
