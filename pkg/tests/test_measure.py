import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from szego_lab import coulomb, density_via_m, density_via_T, divergence_classify, explicit, free, reflected, regularized_coulomb, szego_integral, theta_grid
from szego_lab.measure import DEFAULT_LADDER, free_density

from oracles import cf_density, coulomb_arrays, density_b1

B1_2 = explicit({1: (1.0, 2.0)})
GRID = np.linspace(-1.9, 1.9, 101)


def test_free_densities_exact():
    ref = np.sqrt(4 - GRID**2) / (2 * np.pi)
    assert np.allclose(density_via_T(free(), GRID, 1000).values, ref, atol=1e-10)
    assert np.allclose(density_via_m(free(), GRID, 1).values, ref, atol=1e-10)
    assert density_via_T(free(), np.array([0.0]), 10).values[0] == pytest.approx(1 / math.pi, abs=1e-15)


def test_rank_one_density_closed_form(frozen):
    got = density_via_m(B1_2, np.array([0.0]), 10).values[0]
    assert got == pytest.approx(frozen["nu0_b1_2"], rel=1e-12)
    xs = np.linspace(-1.95, 1.95, 41)
    ref = [density_b1(2.0, x) for x in xs]
    assert np.allclose(density_via_m(B1_2, xs, 50).values, ref, rtol=1e-10)


def test_depth_doubling_stable():
    x = np.array([1.0])
    d16 = density_via_m(coulomb(0, 1), x, 2**16, doubling=False).values[0]
    d17 = density_via_m(coulomb(0, 1), x, 2**17, doubling=False).values[0]
    assert abs(d16 - d17) / d17 < 1e-4


def test_via_m_matches_plain_continued_fraction():
    a, b = coulomb_arrays(1, 1, 4096)
    theta = np.linspace(0.2, 2.9, 30)
    xs = np.sort(2 * np.cos(theta))
    ref = cf_density(a, b, 4096, np.arccos(xs / 2))
    got = density_via_m(coulomb(1, 1), xs, 4096, doubling=False).values
    assert np.allclose(got, ref, rtol=1e-10)


def test_via_T_vs_via_m_coulomb_1_0():
    x = np.array([0.0])
    t = density_via_T(coulomb(1, 0), x, 100_000).values[0]
    m = density_via_m(coulomb(1, 0), x).values[0]
    assert abs(t - m) / m < 1e-3


@settings(max_examples=6)
@given(st.floats(0.1, 1), st.floats(-1, 1))
def test_via_T_vs_via_m_property(alpha, frac):
    seq = coulomb(alpha, 2 * alpha * frac)
    dt = density_via_T(seq, GRID, 100_000)
    dm = density_via_m(seq, GRID)
    tol = np.maximum(1e-3 * dm.values, 3 * (dt.gap_hint + dm.gap_hint))
    assert np.all(np.abs(dt.values - dm.values) <= tol)


def test_free_szego_values_vanish():
    grid = theta_grid(DEFAULT_LADDER[-1])
    dens = density_via_m(free(), grid, 1)
    for kind in ("Z", "Z1_plus", "Z1_minus", "Z2_minus"):
        val = szego_integral(dens, kind)
        assert abs(val.value) < 1e-8 and val.edge == "none"


@pytest.mark.parametrize("kind", ["Z", "Z1_plus", "Z1_minus", "Z2_minus"])
def test_rank_one_szego_values(frozen, kind):
    grid = theta_grid(DEFAULT_LADDER[-1])
    val = szego_integral(density_via_m(B1_2, grid, 50), kind)
    assert val.value == pytest.approx(frozen[f"{kind}_b1_2"], abs=1e-3)
    assert not val.diverged


def test_oracle_constants(frozen):
    # closed forms the oracle reproduces independently
    assert frozen["Z_b1_2"] == pytest.approx(math.log(2), abs=1e-9)
    assert frozen["Z1_plus_b1_2"] == pytest.approx(math.log(2) - 0.25, abs=1e-9)


def test_divergence_examples():
    r = divergence_classify(coulomb(1, 0))
    assert (r.at_plus2, r.at_minus2) == ("converges", "converges")
    r = divergence_classify(coulomb(0, 1))
    assert (r.at_plus2, r.at_minus2) == ("converges", "diverges")
    r = divergence_classify(regularized_coulomb(-1, 0))
    assert (r.at_plus2, r.at_minus2) == ("diverges", "diverges")
    assert r.slope_plus > 0 and r.slope_minus > 0


def test_z_diverges_both_for_negative_alpha():
    grid = theta_grid(DEFAULT_LADDER[-1])
    val = szego_integral(density_via_m(regularized_coulomb(-1, 0), grid), "Z")
    assert val.diverged and val.edge == "both" and val.slope > 0


@settings(max_examples=5)
@given(st.floats(0, 1.5), st.floats(-1.5, 1.5))
def test_reflection_swaps_one_sided_values(alpha, beta):
    seq = coulomb(alpha, beta)
    grid = theta_grid(2.0**-10)
    fwd = density_via_m(seq, grid, 2**14)
    bwd = density_via_m(reflected(seq), grid, 2**14)
    ladder = DEFAULT_LADDER[:4]
    zp = szego_integral(fwd, "Z1_plus", ladder).value
    zm_ref = szego_integral(bwd, "Z1_minus", ladder).value
    assert zp == pytest.approx(zm_ref, abs=1e-6)


@settings(max_examples=6)
@given(st.floats(-0.9, 2), st.floats(-2, 2))
def test_lower_bounds(alpha, beta):
    seq = regularized_coulomb(alpha, beta)
    grid = theta_grid(2.0**-10)
    dens = density_via_m(seq, grid, 2**14)
    ladder = DEFAULT_LADDER[:4]
    assert szego_integral(dens, "Z", ladder).value >= -0.5 * math.log(2) - 1e-6
    assert szego_integral(dens, "Z2_minus", ladder).value >= -1e-6
