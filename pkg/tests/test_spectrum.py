import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from szego_lab import TruncatedJacobi, coulomb, eigenvalue, eigenvalues_outside, eigenvector_at, explicit, free, oscillation_count
from szego_lab.spectrum import (
    EigenSolveError,
    NotAnEigenvalueError,
    beta_of_energy,
    count_outside,
    energy_of_beta,
    xi,
)

from oracles import padded_eigs, rank_one_energy

B1_2 = explicit({1: (1.0, 2.0)})


def test_free_truncation_has_no_bound_states():
    es = eigenvalues_outside(TruncatedJacobi(free(), 100))
    assert es.above == [] and es.below == []


def test_rank_one_bound_state(frozen):
    es = eigenvalues_outside(TruncatedJacobi(B1_2, 2000))
    assert len(es.above) == 1 and es.below == []
    assert es.above[0] == pytest.approx(frozen["E_b1_2"], abs=1e-6)
    es = eigenvalues_outside(TruncatedJacobi(explicit({1: (1.0, 0.5)}), 2000))
    assert es.above == [] and es.below == []


@given(st.floats(1.05, 6), st.sampled_from([1, -1]))
def test_rank_one_property(t, sign):
    es = eigenvalues_outside(TruncatedJacobi(explicit({1: (1.0, sign * t)}), 400, boundary="free"))
    side = es.above if sign > 0 else es.below
    assert len(side) == 1
    assert side[0] == pytest.approx(sign * rank_one_energy(t), abs=1e-10)


def test_free_tail_matches_padded_dense(frozen):
    ref = frozen["eigs_coulomb_2_0.5_N400_free"]
    es = eigenvalues_outside(TruncatedJacobi(coulomb(2, 0.5), 400, boundary="free"), marginal_factor=0.0)
    # eigenvalues far enough from the edges to be insensitive to the finite padding
    for got, want in ((es.above, ref["above"]), (es.below, ref["below"])):
        far = [w for w in want if abs(w) > 2.01]
        assert len(got) >= len(far)
        assert np.allclose(got[: len(far)], far, atol=1e-9)


def test_beta_examples():
    assert beta_of_energy(2.5) == 2.0
    assert beta_of_energy(-2.5) == -2.0
    assert beta_of_energy(2.0) == 1.0 and beta_of_energy(-2.0) == -1.0
    with pytest.raises(ValueError):
        beta_of_energy(1.0)


@given(st.floats(2, 10), st.sampled_from([1, -1]))
def test_beta_round_trip(E, sign):
    E = sign * E
    beta = beta_of_energy(E)
    assert abs(beta) >= 1
    assert energy_of_beta(beta) == pytest.approx(E, abs=1e-14 * abs(E))


def test_xi_examples():
    assert xi("+", 1.0) == 0.0
    assert xi("+", 2.0) == pytest.approx(math.log(2) + 0.75, abs=1e-15)
    assert xi("+", -1.0) == 0.0
    assert xi("+", -2.0) == pytest.approx(math.log(2) - 0.75, abs=1e-15)
    assert xi("+", -2.0) < 0


@given(st.floats(1, 50), st.sampled_from([1, -1]))
def test_xi_identities(b, s):
    b = s * b
    assert xi("+", b) + xi("-", b) == pytest.approx(2 * math.log(abs(b)), abs=1e-12)
    assert xi("+", b) == pytest.approx(math.log(abs(b)) + 0.5 * (b - 1 / b), abs=1e-12)


def test_eigenvector_rank_one():
    J = TruncatedJacobi(B1_2, 2000)
    p = eigenvector_at(J, eigenvalue(J, 1, "+"))
    assert np.linalg.norm(p) == pytest.approx(1.0, abs=1e-12)
    ratios = p[1:30] / p[:29]
    assert np.allclose(ratios, 0.5, atol=1e-10)
    assert oscillation_count(p) == 0


def test_eigenvector_rejects_non_eigenvalue():
    with pytest.raises(NotAnEigenvalueError):
        eigenvector_at(TruncatedJacobi(B1_2, 200), 2.4)


def test_eigenvalue_index_out_of_range():
    with pytest.raises(EigenSolveError):
        eigenvalue(TruncatedJacobi(B1_2, 200), 2, "+")


def test_oscillation_count_examples():
    assert oscillation_count(np.ones(7)) == 0
    assert oscillation_count((-1.0) ** np.arange(9)) == 8


@given(st.floats(1.5, 4), st.floats(-3, 3), st.sampled_from([1, -1]))
def test_sturm_oscillation(alpha, beta, sign):
    J = TruncatedJacobi(coulomb(alpha, beta), 1500)
    es = eigenvalues_outside(J)
    side = es.above if sign > 0 else es.below
    for j, E in enumerate(side[:5], start=1):
        p = eigenvector_at(J, E)
        q = p * (sign ** np.arange(p.size))  # below -2 the natural object is (-1)^k p_k
        assert oscillation_count(q, atol=1e-13) == j - 1


@given(st.floats(-1, 3), st.floats(-3, 3))
def test_counts_are_certified_by_inertia(alpha, beta):
    seq = coulomb(max(alpha, -0.5), beta)
    J = TruncatedJacobi(seq, 300)
    es = eigenvalues_outside(J, marginal_factor=0.0)
    dense = np.linalg.eigvalsh(J.dense())
    assert len(es.above) == int(np.sum(dense > 2)) and len(es.below) == int(np.sum(dense < -2))
    assert count_outside(J, 2.0) == len(es.above)


def test_count_stabilizes_for_trace_class():
    seq = coulomb(0, 3, gamma=3.0)  # sum n |b_n| < inf: finitely many bound states
    counts = [len(eigenvalues_outside(TruncatedJacobi(seq, N, boundary="free")).above) for N in (500, 1000, 2000)]
    assert counts[0] == counts[1] == counts[2] >= 1
