"""Orthonormal polynomials P_n(x) and the envelopes S_n(x), T_n(x).

``S_n`` is the Dombrowski-type quadratic form built from consecutive
polynomial values, and ``T_n = S_n + (a_{n+1}/2)|b_{n+2}-b_{n+1}| P_n^2``
is the modified envelope whose one-step growth is controlled by
``delta_n`` alone.  For ``|x| < 2`` and coefficient sequences of bounded
variation, ``T_n(x) -> sqrt(4 - x^2) / (2 pi nu'(x))``.

Two interfaces are offered: a scalar :class:`PolynomialState` that is
advanced one index at a time, and :func:`envelope_run`, which sweeps a
whole grid of x values to a list of checkpoints in compiled code.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import envelope_sweep
from .coefficients import deltas

__all__ = [
    "GrowthError",
    "PolynomialState",
    "EnvelopeRun",
    "EnvelopeCheck",
    "initial_state",
    "advance",
    "state_at",
    "envelope_run",
    "dombrowski_residual",
    "envelope_bounds_check",
    "block_monotonicity_check",
    "tail_gap",
    "write_trace",
    "EnvelopeIntegrals",
    "envelope_integrals",
]

MAGNITUDE_CAP = 1e150


class GrowthError(ArithmeticError):
    """|P_n(x)| passed the magnitude cap: x is outside [-2, 2] or resonant."""

    def __init__(self, index, x):
        super().__init__(f"|P_{index}({x})| exceeded the magnitude cap")
        self.index = index
        self.x = x


@functools.lru_cache(maxsize=16)
def _cached_arrays(seq, size):
    return seq.arrays(size)


def _coeffs(seq, n_needed):
    # round the request up to a power of two so stepping reuses one array
    size = 1 << max(6, int(n_needed).bit_length())
    return _cached_arrays(seq, size)


@dataclass(frozen=True)
class PolynomialState:
    n: int
    x: float
    p_curr: float
    p_prev: float
    s: float
    t: float


def initial_state(seq, x):
    """State at ``n = 0``: ``P_0 = 1``, ``P_{-1} = 0``, ``S_0 = a_1^2``."""
    a, b = _coeffs(seq, 3)
    s = a[1] ** 2
    t = s + 0.5 * a[1] * abs(b[2] - b[1])
    return PolynomialState(0, float(x), 1.0, 0.0, float(s), float(t))


def advance(state, seq, cap=MAGNITUDE_CAP):
    """Return the state at ``n + 1``."""
    n = state.n + 1
    a, b = _coeffs(seq, n + 3)
    x = state.x
    p = ((x - b[n]) * state.p_curr - a[n - 1] * state.p_prev) / a[n]
    if not abs(p) <= cap:
        raise GrowthError(n, x)
    s = state.s + (a[n + 1] ** 2 - a[n] ** 2) * p * p + a[n] * (b[n + 1] - b[n]) * p * state.p_curr
    t = s + 0.5 * a[n + 1] * abs(b[n + 2] - b[n + 1]) * p * p
    return PolynomialState(n, x, float(p), state.p_curr, float(s), float(t))


def state_at(seq, x, n, cap=MAGNITUDE_CAP):
    run = envelope_run(seq, [x], [n], cap=cap)
    if run.blown[0] >= 0:
        raise GrowthError(int(run.blown[0]), x)
    return PolynomialState(
        n, float(x), float(run.p[0, 0]), float(run.p_prev[0, 0]),
        float(run.s[0, 0]), float(run.t[0, 0]),
    )


@dataclass
class EnvelopeRun:
    """Grid sweep result; arrays have shape ``(len(checkpoints), len(x))``."""

    x: np.ndarray
    checkpoints: np.ndarray
    p: np.ndarray
    p_prev: np.ndarray
    s: np.ndarray
    t: np.ndarray
    blown: np.ndarray

    def at(self, n):
        i = int(np.searchsorted(self.checkpoints, n))
        if i >= self.checkpoints.size or self.checkpoints[i] != n:
            raise KeyError(n)
        return i


def envelope_run(seq, x, checkpoints, cap=MAGNITUDE_CAP):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cps = np.unique(np.asarray(checkpoints, dtype=np.int64))
    if cps.size == 0 or cps[0] < 0:
        raise ValueError("checkpoints must be non-negative")
    a, b = seq.arrays(int(cps[-1]) + 2)
    out, blown = envelope_sweep(a, b, x, cps, float(cap))
    return EnvelopeRun(x, cps, out[0], out[1], out[2], out[3], blown)


def dombrowski_residual(state, seq, relative=False):
    """``S_n - a_{n+1}^2 [P_{n+1}^2 - (x - b_{n+1})/a_{n+1} P_{n+1} P_n + P_n^2]``.

    This is an identity, so the value is rounding error.  With
    ``relative=True`` it is divided by the magnitude of the bracketed terms.
    """
    nxt = advance(state, seq)
    a, b = _coeffs(seq, state.n + 3)
    an1 = a[state.n + 1]
    c = (state.x - b[state.n + 1]) / an1
    terms = (nxt.p_curr ** 2, c * nxt.p_curr * state.p_curr, state.p_curr ** 2)
    res = state.s - an1 ** 2 * (terms[0] - terms[1] + terms[2])
    if relative:
        scale = an1 ** 2 * sum(abs(v) for v in terms) + abs(state.s)
        return res / scale if scale > 0 else res
    return res


@dataclass
class EnvelopeCheck:
    """Outcome of the four envelope inequalities at one (x, n).

    Each field is ``None`` when the floor hypothesis fails
    (``applicable`` is then False).
    """

    applicable: bool
    pointwise_poly_bound: bool | None = None
    sup_poly_bound: bool | None = None
    pointwise_growth: bool | None = None
    sup_growth: bool | None = None

    @property
    def all_true(self):
        return self.applicable and all(
            (self.pointwise_poly_bound, self.sup_poly_bound, self.pointwise_growth, self.sup_growth)
        )


def _chebyshev_nodes(count):
    k = np.arange(count)
    return 2.0 * np.cos((2 * k + 1) * np.pi / (2 * count))


def envelope_bounds_check(seq, x, n, nodes_factor=4, rtol=1e-12):
    """Check the envelope inequalities at ``(x, n)``, ``|x| <= 2``, ``n >= 1``.

    * ``(4 - x^2) P_n^2 <= 4 T_{n-1}`` at x,
    * ``max P_n^2 <= (n+1)^2 max T_{n-1}``,
    * ``0 <= T_n <= exp(4 delta_n / (4 - x^2)) T_{n-1}`` (skipped at ``|x| = 2``),
    * ``max T_n <= exp((n+1)^2 delta_n) max T_{n-1}``.

    The maxima over ``[-2, 2]`` are taken on ``nodes_factor * (n + 1)``
    Chebyshev nodes (plus the endpoints).  The hypothesis
    ``a_n >= 1 + |b_n|/2`` is checked at index n.
    """
    if abs(x) > 2:
        raise ValueError("x must lie in [-2, 2]")
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b = seq.arrays(n + 2)
    if not a[n] >= 1.0 + 0.5 * abs(b[n]) - 1e-15:
        return EnvelopeCheck(applicable=False)
    d = deltas(seq, n)[n]
    grid = np.concatenate(([float(x), -2.0, 2.0], _chebyshev_nodes(nodes_factor * (n + 1))))
    run = envelope_run(seq, grid, [n - 1, n])
    p_n, t_prev, t_n = run.p[1], run.t[0], run.t[1]
    slack = 1.0 + rtol

    pointwise_poly = (4 - x * x) * p_n[0] ** 2 <= 4 * t_prev[0] * slack + 1e-300
    sup_poly = np.max(p_n ** 2) <= (n + 1) ** 2 * np.max(t_prev) * slack
    if abs(x) < 2:
        bound = math.exp(min(4 * d / (4 - x * x), 700.0)) * t_prev[0]
        growth = (t_n[0] >= -rtol * abs(t_prev[0])) and t_n[0] <= bound * slack
    else:
        growth = True
    sup_growth = np.max(t_n) <= math.exp(min((n + 1) ** 2 * d, 700.0)) * np.max(t_prev) * slack
    return EnvelopeCheck(True, bool(pointwise_poly), bool(sup_poly), bool(growth), bool(sup_growth))


def block_monotonicity_check(seq, x, n, K, rtol=1e-14):
    """Sign of ``S_{n+K-1}(x) - S_{n-1}(x)``; 0 when equal to rounding."""
    if K < 3:
        raise ValueError("K must be >= 3")
    if n < 1:
        raise ValueError("n must be >= 1")
    run = envelope_run(seq, [x], [n - 1, n + K - 1])
    lo, hi = run.s[0, 0], run.s[1, 0]
    diff = hi - lo
    if abs(diff) <= rtol * max(abs(lo), abs(hi)):
        return 0
    return 1 if diff > 0 else -1


def tail_gap(seq, x, n):
    """``|T_n(x) - T_{n//2}(x)|`` on a grid; a Cauchy-style convergence hint."""
    run = envelope_run(seq, x, [n // 2, n])
    return np.abs(run.t[1] - run.t[0])


def write_trace(seq, x, n_max, path):
    """Dump ``(n, P_n, S_n, T_n)`` rows for ``n = 0..n_max`` to CSV."""
    run = envelope_run(seq, [x], np.arange(n_max + 1))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "P_n", "S_n", "T_n"])
        for i, n in enumerate(run.checkpoints):
            w.writerow([int(n), repr(float(run.p[i, 0])), repr(float(run.s[i, 0])), repr(float(run.t[i, 0]))])


@dataclass
class EnvelopeIntegrals:
    """``I_n^+ = int_0^{2-n^-2} ln+ T_n dx / sqrt(2-x)`` and its mirror at -2."""

    n: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    max_t: np.ndarray

    @property
    def total(self):
        return self.plus + self.minus


def envelope_integrals(seq, checkpoints, uniform=2000, per_decade=200):
    """``I_n^+-`` at each checkpoint ``n >= 1``.

    With ``x = +-(2 - u^2)`` the weight becomes ``2 du`` on
    ``[1/n, sqrt 2]``; the u-grid is uniform plus geometric down to
    ``1 / max(n)``, and the integral is the trapezoid rule on it.
    ``max_t`` is the largest ``T_n`` on the grid (both sides).
    """
    cps = np.unique(np.asarray(checkpoints, dtype=np.int64))
    if cps[0] < 1:
        raise ValueError("checkpoints must be >= 1")
    top = math.sqrt(2.0)
    u_min = 1.0 / float(cps[-1])
    decades = math.log10(top / u_min)
    u = np.unique(np.concatenate((
        np.linspace(u_min, top, uniform),
        np.logspace(math.log10(u_min), math.log10(top), int(decades * per_decade) + 2),
        1.0 / cps.astype(float),
    )))
    x_plus = 2.0 - u * u
    run = envelope_run(seq, np.concatenate((x_plus, -x_plus)), cps)
    m = u.size
    plus, minus = [], []
    for i, n in enumerate(cps):
        lnp = np.log(np.maximum(run.t[i], 1.0))
        keep = u >= 1.0 / n - 1e-15
        for side, vals in ((plus, lnp[:m]), (minus, lnp[m:])):
            side.append(2.0 * float(np.trapezoid(vals[keep], u[keep])))
    with np.errstate(invalid="ignore"):
        max_t = np.nanmax(run.t, axis=1)
    return EnvelopeIntegrals(cps, np.array(plus), np.array(minus), max_t)
