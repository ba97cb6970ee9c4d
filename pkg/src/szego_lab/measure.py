"""Absolutely continuous spectral density and Szegő-type integrals.

Two independent routes to ``nu'(x)`` on ``(-2, 2)``:

* :func:`density_via_T` uses the envelope limit
  ``T_n(x) -> sqrt(4 - x^2) / (2 pi nu'(x))``;
* :func:`density_via_m` evaluates the Weyl m-function
  ``m(z) = <delta_0, (J - z)^-1 delta_0>`` on the real axis by a backward
  continued fraction seeded with the free m-function, and takes
  ``nu' = Im m / pi``.  At depth K this is exact for the operator whose
  coefficients agree with J up to index K and are free beyond.

Integrals are computed in the angle ``x = 2 cos(theta)``, where the
weights become ``dtheta / 2pi`` (Z), ``(1 +- cos theta) dtheta / 2pi``
(Z1+-) and ``sin^2 theta dtheta / pi`` (Z2-).  Divergence at an edge is
detected as linear growth of the truncated integral in ``ln(1/eps)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels
from .coefficients import CoefficientSequence

__all__ = [
    "DensityEstimate",
    "SzegoValue",
    "EdgeVerdict",
    "free_density",
    "free_m",
    "m_function",
    "density_via_T",
    "density_via_m",
    "theta_grid",
    "theta_cut",
    "szego_integral",
    "divergence_classify",
    "DEFAULT_LADDER",
]

DEFAULT_LADDER = tuple(2.0 ** -k for k in range(4, 13))
DENSITY_FLOOR = 1e-300
KINDS = ("Z", "Z1_plus", "Z1_minus", "Z2_minus")


def free_density(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(4.0 - x * x) / (2.0 * np.pi)


def free_m(x):
    """Boundary value ``m_0(x + i0) = (-x + i sqrt(4 - x^2)) / 2`` on ``[-2, 2]``."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (-x + 1j * np.sqrt(np.clip(4.0 - x * x, 0.0, None)))


@dataclass
class DensityEstimate:
    grid: np.ndarray
    values: np.ndarray
    method: str
    depth: int
    gap_hint: np.ndarray
    flags: np.ndarray = None  # per-point bit mask, see FLAG_*
    reliable: bool = True

    FLAG_ABSENT = 1
    FLAG_RETRY = 2

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.gap_hint = np.asarray(self.gap_hint, dtype=float)
        if self.flags is None:
            self.flags = np.zeros(self.grid.size, dtype=np.int64)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "nu_prime", "gap_hint"])
            for x, v, g in zip(self.grid, self.values, self.gap_hint):
                w.writerow([repr(float(x)), repr(float(v)), repr(float(g))])

    @classmethod
    def from_csv(cls, path, method="via-m", depth=0):
        data = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], method, depth, data[:, 2])


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-d array")
    if np.any(np.abs(grid) >= 2):
        raise ValueError("grid must lie strictly inside (-2, 2)")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def _variation_reliable(seq, n):
    a, b = seq.arrays(n + 1)
    var = np.abs(np.diff(a[1:])) + np.abs(np.diff(b[1:]))
    partial = np.cumsum(var)
    total = partial[-1]
    tail = total - partial[n // 2 - 1]
    return bool(tail <= 0.05 * total + 1e-12)


def density_via_T(seq, grid, n=100_000):
    """``nu'(x) ~ sqrt(4 - x^2) / (2 pi T_n(x))``; gap hint from ``T_{n/2}``."""
    grid = _check_grid(grid)
    from .polynomials import envelope_run

    run = envelope_run(seq, grid, [n // 2, n])
    t_half, t_n = run.t[0], run.t[1]
    flags = np.zeros(grid.size, dtype=np.int64)
    bad = ~(t_n > 0) | (run.blown >= 0)
    flags[bad] |= DensityEstimate.FLAG_ABSENT
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(bad, np.nan, free_density(grid) / t_n)
        gap = np.abs(free_density(grid) / t_half - values)
    return DensityEstimate(grid, values, "via-T", n, gap, flags, _variation_reliable(seq, n))


def m_function(seq, z, depth, levels=1):
    """m-functions of ``J^(s)``, ``s < levels``, at points ``z``.

    ``z`` may be real (boundary values from above on ``(-2, 2)``) or
    complex with positive imaginary part.  Returns ``(m, retried)`` with
    ``m`` of shape ``(levels, len(z))``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    a, b = seq.arrays(depth)
    seed = np.where(np.abs(z.real) < 2, free_m(z.real), 0) if np.all(z.imag == 0) else _free_m_complex(z)
    seed = np.asarray(seed, dtype=complex)
    m, hit = _kernels.continued_fraction(a, b, z, seed, int(depth), int(levels))
    if np.any(hit):
        idx = np.flatnonzero(hit)
        z2 = z[idx] + 1e-9j
        m2, _ = _kernels.continued_fraction(a, b, z2, _free_m_complex(z2), int(depth), int(levels))
        m[:, idx] = m2
    return m, hit


def _free_m_complex(z):
    # branch with Im m > 0 for Im z > 0
    r = np.sqrt(z * z - 4.0 + 0j)
    m = 0.5 * (-z + r)
    flip = m.imag < 0
    m[flip] = 0.5 * (-z[flip] - r[flip])
    return m


def density_via_m(seq, grid, depth=2**16, doubling=True):
    """``nu'(x) = Im m(x + i0) / pi`` by the seeded backward continued fraction."""
    grid = _check_grid(grid)
    m, hit = m_function(seq, grid, depth)
    values = np.clip(m[0].imag, 0.0, None) / np.pi
    flags = np.where(hit, DensityEstimate.FLAG_RETRY, 0).astype(np.int64)
    if doubling:
        m2, _ = m_function(seq, grid, 2 * depth)
        gap = np.abs(np.clip(m2[0].imag, 0.0, None) / np.pi - values)
    else:
        gap = np.zeros_like(values)
    return DensityEstimate(grid, values, "via-m", depth, gap, flags)


def theta_cut(eps):
    """Angle ``theta`` with ``2 cos(theta) = 2 - eps``."""
    eps = np.asarray(eps, dtype=float)
    return 2.0 * np.arcsin(np.sqrt(eps / 4.0))


def theta_grid(eps_min, per_unit=64, per_decade=60):
    """x-grid for Szegő quadrature down to distance ``eps_min`` from both edges.

    Uniform in theta with ``per_unit`` points per radian, refined
    geometrically (``per_decade`` points per decade of theta) towards both
    endpoints.  Returned ascending in x.
    """
    t0 = float(theta_cut(eps_min))
    uniform = np.linspace(t0, np.pi - t0, max(8, int(math.ceil((np.pi - 2 * t0) * per_unit)) + 1))
    decades = max(0.0, math.log10(0.5 / t0))
    geo = t0 * np.logspace(0, decades, max(2, int(decades * per_decade) + 1))
    theta = np.unique(np.concatenate((uniform, geo, np.pi - geo)))
    x = np.sort(2.0 * np.cos(theta))
    return x[np.abs(x) < 2]


def _weight(kind, theta):
    if kind == "Z":
        return np.full_like(theta, 1.0 / (2 * np.pi))
    if kind == "Z1_plus":
        return (1 + np.cos(theta)) / (2 * np.pi)
    if kind == "Z1_minus":
        return (1 - np.cos(theta)) / (2 * np.pi)
    if kind == "Z2_minus":
        return np.sin(theta) ** 2 / np.pi
    raise ValueError(f"kind must be one of {KINDS}")


@dataclass
class EdgeVerdict:
    """Behaviour of one end of a truncated Szegő integral."""

    edge: str
    status: str  # converges / diverges / borderline
    slope: float
    noise: float
    partials: list
    extrapolated: float


@dataclass
class SzegoValue:
    kind: str
    value: float
    epsilon: float
    diverged: bool
    edge: str  # "+2", "-2", "both", "none"
    slope: float
    plus: EdgeVerdict = None
    minus: EdgeVerdict = None
    clamped: int = 0
    ladder: list = field(default_factory=list)
    partials: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


# slope (per unit ln(1/eps)) above which an edge is declared divergent; a
# convergent edge has slope O(sqrt(eps)), a divergent one at least ~0.1 on
# the Coulomb grid one step away from the critical lines
SLOPE_THRESHOLD = 0.02
FIT_POINTS = 4


def _slope(logs, vals):
    return float(np.polyfit(logs, vals, 1)[0])


def _edge_verdict(edge, ladder, partials, noise, threshold):
    eps = np.asarray(ladder)
    vals = np.asarray(partials)
    logs = np.log(1.0 / eps)
    k = min(FIT_POINTS, eps.size)
    slope = _slope(logs[-k:], vals[-k:]) if eps.size >= 2 else 0.0
    if slope > threshold + 2 * noise:
        status = "diverges"
    elif slope < threshold - 2 * noise:
        status = "converges"
    else:
        status = "borderline"
    # remaining piece behaves like c * theta_cut for a bounded integrand
    if eps.size >= 2:
        th = theta_cut(eps[-k:])
        extrapolated = float(np.polyfit(th, vals[-k:], 1)[1])
    else:
        extrapolated = float(vals[-1])
    return EdgeVerdict(edge, status, slope, float(noise), [float(v) for v in vals], extrapolated)


def szego_integral(density, kind="Z", epsilon_ladder=DEFAULT_LADDER, slope_threshold=SLOPE_THRESHOLD):
    """Truncated and extrapolated Szegő-type integral of a density estimate.

    For each ``eps`` in the ladder the integral is taken over
    ``[-2 + eps, 2 - eps]``; each half (split at ``x = 0``) is examined
    separately so that divergence is attributed to an edge.  ``value`` is
    the sum of the extrapolated halves when nothing diverges, otherwise the
    truncated value at the smallest ``eps``.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    ladder = sorted((float(e) for e in epsilon_ladder), reverse=True)
    x = np.asarray(density.grid, dtype=float)
    nu = np.asarray(density.values, dtype=float)
    ok = np.isfinite(nu)
    x, nu, gap = x[ok], nu[ok], np.asarray(density.gap_hint, dtype=float)[ok]
    theta = np.arccos(x / 2.0)
    order = np.argsort(theta)
    theta, nu, gap, x = theta[order], nu[order], gap[order], x[order]
    t_need = float(theta_cut(ladder[-1]))
    if theta[0] > t_need * (1 + 1e-9) or theta[-1] < np.pi - t_need * (1 + 1e-9):
        raise ValueError("density grid does not reach the smallest epsilon of the ladder")

    clamped = int(np.count_nonzero(nu < DENSITY_FLOOR))
    nu_c = np.maximum(nu, DENSITY_FLOOR)
    integrand = np.log(free_density(x) / nu_c) * _weight(kind, theta)
    F = CubicSpline(theta, integrand).antiderivative()
    # perturbation of the integrand implied by the density gap hints
    with np.errstate(divide="ignore", invalid="ignore"):
        dL = np.where(nu_c > 0, np.minimum(gap / nu_c, 1.0), 1.0) * np.abs(_weight(kind, theta))
    G = CubicSpline(theta, dL).antiderivative()

    mid = np.pi / 2
    cuts = theta_cut(np.asarray(ladder))
    plus = [float(F(mid) - F(c)) for c in cuts]
    minus = [float(F(np.pi - c) - F(mid)) for c in cuts]
    # noise for the slope: gap-implied error on the last ladder segment,
    # per unit ln(1/eps), plus trapezoid-vs-spline disagreement
    trap = _trapezoid_halves(theta, integrand, cuts)
    logs = np.log(1.0 / np.asarray(ladder))
    span = logs[-1] - logs[max(0, len(ladder) - FIT_POINTS)] if len(ladder) > 1 else 1.0

    def noise(idx_fn, trap_vals, spl_vals):
        last = idx_fn(cuts[-1])
        err_gap = abs(float(last))
        err_quad = max(abs(t - s) for t, s in zip(trap_vals, spl_vals))
        return (err_gap + err_quad) / max(span, 1e-12)

    n_plus = noise(lambda c: G(mid) - G(c), trap[0], plus)
    n_minus = noise(lambda c: G(np.pi - c) - G(mid), trap[1], minus)
    vp = _edge_verdict("+2", ladder, plus, n_plus, slope_threshold)
    vm = _edge_verdict("-2", ladder, minus, n_minus, slope_threshold)

    div_p, div_m = vp.status == "diverges", vm.status == "diverges"
    edge = {(True, True): "both", (True, False): "+2", (False, True): "-2", (False, False): "none"}[(div_p, div_m)]
    totals = [p + m for p, m in zip(plus, minus)]
    k = min(FIT_POINTS, len(ladder))
    slope = _slope(logs[-k:], totals[-k:]) if len(ladder) >= 2 else 0.0
    value = totals[-1] if (div_p or div_m) else vp.extrapolated + vm.extrapolated
    return SzegoValue(
        kind=kind,
        value=float(value),
        epsilon=ladder[-1],
        diverged=bool(div_p or div_m),
        edge=edge,
        slope=slope,
        plus=vp,
        minus=vm,
        clamped=clamped,
        ladder=list(ladder),
        partials=[float(t) for t in totals],
    )


def _trapezoid_halves(theta, f, cuts):
    mid = np.pi / 2
    out_p, out_m = [], []
    for c in cuts:
        out_p.append(_trapezoid_between(theta, f, c, mid))
        out_m.append(_trapezoid_between(theta, f, mid, np.pi - c))
    return out_p, out_m


def _trapezoid_between(theta, f, lo, hi):
    sel = (theta > lo) & (theta < hi)
    t = np.concatenate(([lo], theta[sel], [hi]))
    y = np.concatenate(([np.interp(lo, theta, f)], f[sel], [np.interp(hi, theta, f)]))
    return float(np.trapezoid(y, t))


@dataclass
class DivergenceReport:
    at_plus2: str
    at_minus2: str
    z1_plus: SzegoValue
    z1_minus: SzegoValue

    @property
    def slope_plus(self):
        return self.z1_plus.plus.slope

    @property
    def slope_minus(self):
        return self.z1_minus.minus.slope


def divergence_classify(seq, epsilon_ladder=DEFAULT_LADDER, depth=2**16, per_unit=64):
    """Classify each edge of ``seq`` as converges / diverges / borderline."""
    grid = theta_grid(min(epsilon_ladder), per_unit=per_unit)
    dens = density_via_m(seq, grid, depth=depth)
    zp = szego_integral(dens, "Z1_plus", epsilon_ladder)
    zm = szego_integral(dens, "Z1_minus", epsilon_ladder)
    return DivergenceReport(zp.plus.status, zm.minus.status, zp, zm)
