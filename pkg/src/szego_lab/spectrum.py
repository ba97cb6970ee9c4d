"""Bound states of Jacobi matrices outside [-2, 2].

Eigenvalues are found by bisection on LDL^T pivot counts (Sturm
sequences), so every reported count is certified by inertia.  A
:class:`TruncatedJacobi` is either the plain N x N corner of ``J^(strip)``
(``boundary="dirichlet"``) or the half-line operator that agrees with
``J^(strip)`` on the first N sites and is free beyond
(``boundary="free"``).  The second is handled exactly through the Schur
complement of the free tail, whose resolvent entry at ``|E| > 2`` is
``-1/beta(E)``; it has no spurious box states and is the operator whose
m-function the backward continued fraction of :mod:`szego_lab.measure`
evaluates.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .coefficients import CoefficientSequence

__all__ = [
    "EigenSolveError",
    "NotAnEigenvalueError",
    "TruncatedJacobi",
    "EigenvalueSet",
    "eigenvalues_outside",
    "eigenvalue",
    "beta_of_energy",
    "energy_of_beta",
    "xi",
    "eigenvector_at",
    "oscillation_count",
    "count_outside",
]

DEFAULT_TOL = 1e-12
MAX_BISECT = 400


class EigenSolveError(RuntimeError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class NotAnEigenvalueError(ValueError):
    pass


@dataclass(frozen=True)
class TruncatedJacobi:
    seq: CoefficientSequence
    size: int
    strip: int = 0
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("truncation size must be >= 2")
        if self.boundary not in ("dirichlet", "free"):
            raise ValueError("boundary is 'dirichlet' or 'free'")

    def bands(self):
        """``(diag, off)``: ``b_{strip+1..strip+N}`` and ``a_{strip+1..strip+N-1}``."""
        a, b = self.seq.arrays(self.strip + self.size)
        s = self.strip
        return b[s + 1 : s + self.size + 1].copy(), a[s + 1 : s + self.size].copy()

    def tail_coupling(self):
        """Coupling to the free tail (``a_{strip+N}``), 0 for Dirichlet."""
        if self.boundary == "dirichlet":
            return 0.0
        a, _ = self.seq.arrays(self.strip + self.size)
        return float(a[self.strip + self.size])

    def dense(self):
        diag, off = self.bands()
        return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)

    def stripped(self, n):
        return TruncatedJacobi(self.seq, self.size, self.strip + n, self.boundary)


def beta_of_energy(E):
    """Root of ``beta + 1/beta = E`` with ``|beta| >= 1``, ``sign(beta) = sign(E)``."""
    E = float(E)
    if abs(E) < 2:
        raise ValueError(f"|E| = {abs(E)} < 2 has no real beta")
    if abs(E) == 2:
        return math.copysign(1.0, E)
    return 0.5 * (E + math.copysign(math.sqrt(E * E - 4.0), E))


def energy_of_beta(beta):
    return beta + 1.0 / beta


def xi(sign, beta):
    """``ln|beta| + sign * (beta - 1/beta)/2`` for ``|beta| >= 1``.

    ``sign`` is ``+1``/``-1`` or the strings ``"+"``/``"-"``.
    """
    s = _sign(sign)
    beta = float(beta)
    if abs(beta) < 1:
        raise ValueError("|beta| must be >= 1")
    return math.log(abs(beta)) + 0.5 * s * (beta - 1.0 / beta)


def _sign(sign):
    if sign in ("+", 1, +1.0):
        return 1
    if sign in ("-", -1, -1.0):
        return -1
    raise ValueError(f"sign must be + or -, got {sign!r}")


@dataclass
class EigenvalueSet:
    above: list
    below: list
    betas_above: list
    betas_below: list
    tolerance: float
    N: int
    strip: int
    boundary: str = "dirichlet"
    marginal_above: list = field(default_factory=list)
    marginal_below: list = field(default_factory=list)
    edge_above: list = field(default_factory=list)
    edge_below: list = field(default_factory=list)

    def side(self, sign):
        return self.above if _sign(sign) > 0 else self.below

    def betas(self, sign):
        return self.betas_above if _sign(sign) > 0 else self.betas_below

    def padded(self, sign, count):
        """Energies on one side padded with ``+-2`` to length ``count``."""
        s = _sign(sign)
        vals = list(self.side(s))
        return vals + [2.0 * s] * max(0, count - len(vals))

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _upper_bound(diag, off, tail):
    r = np.abs(diag) + np.concatenate(([0.0], np.abs(off))) + np.concatenate((np.abs(off), [0.0]))
    return float(np.max(r) + tail * tail + 1.0)


def count_outside(J, level):
    """Number of eigenvalues above ``level`` (if > 0) or below it (if < 0)."""
    diag, off = J.bands()
    tail = J.tail_coupling()
    if tail and abs(level) < 2:
        raise ValueError("free-tail counts need |level| >= 2")
    neg, pos = _kernels.pivot_counts(diag, off * off, tail * tail, float(level))
    return pos if level > 0 else neg


def eigenvalues_outside(J, window=0.0, tol=DEFAULT_TOL, marginal_factor=10.0):
    """All eigenvalues of ``J`` with ``|E| > 2``, by bisection.

    Eigenvalues within ``marginal_factor * tol`` of ``+-2`` go into the
    ``marginal_*`` buckets and out of the main lists.  With ``window > 0``
    (Dirichlet only) eigenvalues in ``(2 - window, 2]`` and
    ``[-2, -2 + window)`` are reported in ``edge_*``.
    """
    diag, off = J.bands()
    off2 = off * off
    tail = J.tail_coupling()
    c2 = tail * tail
    bound = _upper_bound(diag, off, tail)
    edge = 2.0 + marginal_factor * tol

    def solve(from_top, edge_level, count_level):
        sgn = 1.0 if from_top else -1.0
        neg, pos = _kernels.pivot_counts(diag, off2, c2, sgn * edge_level)
        n_out = pos if from_top else neg
        neg2, pos2 = _kernels.pivot_counts(diag, off2, c2, sgn * count_level)
        n_all = pos2 if from_top else neg2
        vals = []
        for j in range(1, n_all + 1):
            if from_top:
                lo, hi = sgn * count_level, bound
            else:
                lo, hi = -bound, sgn * count_level
            E, it = _kernels.bisect_eigenvalue(diag, off2, c2, j, from_top, lo, hi, tol, MAX_BISECT)
            if it >= MAX_BISECT:
                raise EigenSolveError(f"bisection did not converge for eigenvalue {j}", (lo, hi))
            vals.append(float(E))
        return vals[:n_out], vals[n_out:]

    above, marg_above = solve(True, edge, 2.0)
    below, marg_below = solve(False, edge, 2.0)
    edge_above, edge_below = [], []
    if window > 0:
        if J.boundary != "dirichlet":
            raise ValueError("edge window is only meaningful for Dirichlet truncations")
        lo_count = len(above) + len(marg_above)
        ea, _ = solve(True, 2.0 - window, 2.0 - window)
        eb, _ = solve(False, 2.0 - window, 2.0 - window)
        edge_above = ea[lo_count:]
        edge_below = eb[len(below) + len(marg_below):]
    return EigenvalueSet(
        above=above,
        below=below,
        betas_above=[beta_of_energy(E) for E in above],
        betas_below=[beta_of_energy(E) for E in below],
        tolerance=tol,
        N=J.size,
        strip=J.strip,
        boundary=J.boundary,
        marginal_above=marg_above,
        marginal_below=marg_below,
        edge_above=edge_above,
        edge_below=edge_below,
    )


def eigenvalue(J, j, sign, tol=0.0):
    """The j-th eigenvalue outside ``[-2, 2]`` on one side (1-based).

    ``tol = 0`` bisects to machine precision.
    """
    s = _sign(sign)
    diag, off = J.bands()
    off2 = off * off
    tail = J.tail_coupling()
    neg, pos = _kernels.pivot_counts(diag, off2, tail * tail, 2.0 * s)
    have = pos if s > 0 else neg
    if j < 1 or j > have:
        raise EigenSolveError(f"only {have} eigenvalues beyond {2 * s}; asked for j={j}")
    bound = _upper_bound(diag, off, tail)
    lo, hi = (2.0, bound) if s > 0 else (-bound, -2.0)
    E, it = _kernels.bisect_eigenvalue(diag, off2, tail * tail, j, s > 0, lo, hi, tol, MAX_BISECT)
    if it >= MAX_BISECT:
        raise EigenSolveError(f"bisection did not converge for eigenvalue {j}", (lo, hi))
    return float(E)


def eigenvector_at(J, E, tol=1e-9):
    """Unit eigenvector of ``J`` at the eigenvalue ``E``.

    Sign convention: the first non-zero entry is positive.  For a
    free-tail operator the vector covers the first N sites and is
    normalized including the geometric tail mass beyond them.  Raises
    :class:`NotAnEigenvalueError` when the residual exceeds ``tol``.
    """
    diag, off = J.bands()
    tail = J.tail_coupling()
    diag = diag.copy()
    if tail:
        if abs(E) <= 2:
            raise NotAnEigenvalueError("free-tail eigenvalues lie outside [-2, 2]")
        diag[-1] -= tail * tail * _kernels.free_m(float(E))
    z, r, gamma = _kernels.twisted_vector(diag, off, float(E))
    zmax = np.max(np.abs(z))
    z = z / zmax
    norm2 = float(np.dot(z, z))
    if tail:
        beta = beta_of_energy(E)
        norm2 += (tail * z[-1] / abs(beta)) ** 2 / (1.0 - 1.0 / beta**2) if abs(beta) > 1 else math.inf
    p = z / math.sqrt(norm2)
    nz = np.flatnonzero(p)
    if nz.size and p[nz[0]] < 0:
        p = -p
    Jp = diag * p
    Jp[:-1] += off * p[1:]
    Jp[1:] += off * p[:-1]
    residual = float(np.linalg.norm(Jp - E * p))
    if not residual <= tol:
        raise NotAnEigenvalueError(f"residual {residual:.3e} at E={E!r} exceeds {tol:.1e}")
    return p


def oscillation_count(p, atol=0.0):
    """Strict sign changes between consecutive entries with ``|p_k| > atol``."""
    p = np.asarray(p, dtype=float)
    if not np.any(p):
        raise ValueError("zero vector")
    s = np.sign(p[np.abs(p) > atol])
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))
