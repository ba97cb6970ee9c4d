"""Step-by-step sum rules and the quantities behind them.

For a Jacobi matrix J and its n-fold strip J^(n),

    Z(J) = -sum_{j<=n} ln a_j + sum_{j,+-} (ln|beta_j(J)| - ln|beta_j(J^(n))|) + Z(J^(n))

and the one-sided versions for Z1+- replace ``ln a_j`` by ``ln a_j +- b_j/2``
and ``ln|beta|`` by ``xi+-(beta)``.  Here ``E = beta + 1/beta`` with
``|beta| > 1`` labels the eigenvalues outside [-2, 2].

Both sides are evaluated for the operator that agrees with J on its first
N sites and is free beyond them.  Its m-function is what the backward
continued fraction of :mod:`szego_lab.measure` computes at depth N, and
its bound states are those of the free-tail :class:`TruncatedJacobi`, so
the identity holds exactly and the residual measures numerical error only.
Divergence flags come from the usual slope test on the same density, which
sees the behaviour of J itself as long as ``1/N`` is well below the
smallest cutoff angle of the ladder.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .measure import DEFAULT_LADDER, DensityEstimate, m_function, szego_integral, theta_grid
from .spectrum import TruncatedJacobi, eigenvalues_outside, xi

__all__ = ["SumRuleReport", "step_sum_rule", "one_sided_step_rule", "a0_e0", "DEEP_LADDER"]

# cutoffs for the value itself: the free-tail density has no edge
# singularity beyond a logarithm, so integrating to eps = 2^-36 leaves a
# remainder of order theta * ln(theta) ~ 1e-4 before extrapolation.  The
# density of the N-site operator oscillates on the angular scale 1/N, so
# the uniform part of the grid defaults to N points per radian.
DEEP_LADDER = tuple(2.0 ** -k for k in range(4, 37, 2))
EIG_TOL = 1e-12


@dataclass
class SumRuleReport:
    kind: str
    n: int
    N: int
    lhs: float
    coeff_term: float
    eig_term: float
    rhs_tail: float
    residual: float
    marginal_count: int
    diverged: bool = False
    diverged_edges: dict = field(default_factory=dict)
    error_budget: float = 0.0
    pairs: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _densities(seq, n, N, eps_min, per_unit):
    grid = theta_grid(eps_min, per_unit=per_unit)
    m, _ = m_function(seq, grid, N, levels=n + 1)
    zero = np.zeros(grid.size)
    out = []
    for level in (0, n):
        nu = np.clip(m[level].imag, 0.0, None) / np.pi
        out.append(DensityEstimate(grid, nu, "via-m", N - level, zero))
    return out


def _z_value(dens, kind, edges):
    """(value, quadrature error, divergence flags of the relevant edges)."""
    deep = szego_integral(dens, kind, DEEP_LADDER)
    flags = szego_integral(dens, kind, DEFAULT_LADDER)
    div = {}
    if "+2" in edges:
        div["+2"] = flags.plus.status == "diverges"
    if "-2" in edges:
        div["-2"] = flags.minus.status == "diverges"
    err = abs(deep.plus.extrapolated - deep.plus.partials[-1])
    err += abs(deep.minus.extrapolated - deep.minus.partials[-1])
    return deep.plus.extrapolated + deep.minus.extrapolated, err, div


def _paired(sets, weight):
    """Rank-paired terms ``weight(beta_j(J)) - weight(beta_j(J^(n)))``, both sides."""
    full, strip = sets
    pairs = []
    total = 0.0
    for sign in (1, -1):
        b_full = full.betas(sign)
        b_strip = strip.betas(sign)
        count = max(len(b_full), len(b_strip))
        pad = float(sign)
        for j in range(count):
            u = b_full[j] if j < len(b_full) else pad
            v = b_strip[j] if j < len(b_strip) else pad
            term = weight(u) - weight(v)
            pairs.append((sign, j + 1, u, v, term))
            total += term
    return total, pairs


def _check(n, N):
    if n < 0:
        raise ValueError("strip count must be >= 0")
    if not 4 * n < N:
        raise ValueError("need n < N/4")


def _rule(seq, n, N, kind, coeff, weight, edges, per_unit, tol):
    _check(n, N)
    if per_unit is None:
        per_unit = max(64, N)
    a, b = seq.arrays(N)
    coeff_term = -float(sum(coeff(a[j], b[j]) for j in range(1, n + 1)))

    sets = []
    marginal = 0
    for s in (0, n):
        es = eigenvalues_outside(TruncatedJacobi(seq, N - s, s, "free"), tol=tol)
        marginal += len(es.marginal_above) + len(es.marginal_below)
        sets.append(es)
    eig_term, pairs = _paired(sets, weight)

    d_full, d_strip = _densities(seq, n, N, DEEP_LADDER[-1], per_unit)
    z_kind = {"Z_step": "Z", "Z1_plus_step": "Z1_plus", "Z1_minus_step": "Z1_minus"}[kind]
    lhs, err_l, div_l = _z_value(d_full, z_kind, edges)
    rhs_tail, err_r, div_r = _z_value(d_strip, z_kind, edges)

    # sampling error: repeat the quadrature on a grid half as dense
    coarse = _densities(seq, n, N, DEEP_LADDER[-1], max(8, per_unit // 2))
    err_grid = abs(_z_value(coarse[0], z_kind, ())[0] - lhs)
    err_grid += abs(_z_value(coarse[1], z_kind, ())[0] - rhs_tail)

    # eigenvalue error enters through d ln|beta| / dE = 1/sqrt(E^2 - 4)
    err_eig = 0.0
    for es in sets:
        for E in es.above + es.below:
            err_eig += tol / math.sqrt(max(E * E - 4.0, tol))
    budget = err_l + err_r + err_grid + err_eig + 10 * marginal * math.sqrt(tol)

    diverged = any(div_l.values()) or any(div_r.values())
    residual = lhs - (coeff_term + eig_term + rhs_tail)
    return SumRuleReport(
        kind=kind,
        n=int(n),
        N=int(N),
        lhs=float(lhs),
        coeff_term=coeff_term,
        eig_term=float(eig_term),
        rhs_tail=float(rhs_tail),
        residual=float("nan") if diverged else float(residual),
        marginal_count=marginal,
        diverged=diverged,
        diverged_edges={"J": div_l, "J_n": div_r},
        error_budget=float(budget),
        pairs=[list(p) for p in pairs],
    )


def step_sum_rule(seq, n, N, per_unit=None, tol=EIG_TOL):
    """Every term of the Z step-by-step sum rule at strip count ``n``.

    ``per_unit`` (default ``max(64, N)``) sets the angular grid density.
    When either Z value is detected as divergent the residual is NaN and
    ``diverged`` is set; the identity then reads infinity = infinity.
    """
    return _rule(
        seq, n, N, "Z_step",
        coeff=lambda a_j, b_j: math.log(a_j),
        weight=lambda beta: math.log(abs(beta)),
        edges=("+2", "-2"), per_unit=per_unit, tol=tol,
    )


def one_sided_step_rule(seq, sign, n, N, per_unit=None, tol=EIG_TOL):
    """The Z1+- step-by-step sum rule; only the ``sign * 2`` edge can diverge."""
    s = 1 if sign in ("+", 1) else -1 if sign in ("-", -1) else None
    if s is None:
        raise ValueError(f"sign must be + or -, got {sign!r}")
    return _rule(
        seq, n, N, "Z1_plus_step" if s > 0 else "Z1_minus_step",
        coeff=lambda a_j, b_j: math.log(a_j) + 0.5 * s * b_j,
        weight=lambda beta: xi(s, beta),
        edges=("+2",) if s > 0 else ("-2",), per_unit=per_unit, tol=tol,
    )


def a0_e0(seq, horizon, tol=EIG_TOL):
    """Partial sums ``-sum_{j<=k} ln a_j`` (k = 1..horizon) and ``sum ln|beta_j|``.

    The eigenvalue sum is over the Dirichlet truncation of size ``horizon``.
    """
    if horizon < 10:
        raise ValueError("horizon must be >= 10")
    a, _ = seq.arrays(horizon)
    partial = -np.cumsum(np.log(a[1:]))
    es = eigenvalues_outside(TruncatedJacobi(seq, horizon), tol=tol)
    e0 = sum(math.log(abs(v)) for v in es.betas_above + es.betas_below)
    return partial, float(e0)
