"""Eigenvalue motion under finite-rank perturbations, and minoration audits.

A :class:`PerturbationSpec` describes a straight path ``J(t) = J + t A``
for ``t`` in ``[0, T]`` with a fixed direction matrix ``A``:

=============  ===========================================  ==========
kind           A (sites are coefficient indices)             T
=============  ===========================================  ==========
rank-one-a     -1 on a_n                                     c
rank-one-b     sign(d) on b_n                                |d|
L33            -c/d on a_n, -1 on a_{n+k} (k=2 by default)   d
L34            -1 on a_n, ..., a_{n+k}                       c
L35            -1 on a_n and a_{n+2}, d/c on b_n             c
=============  ===========================================  ==========

so that ``J(T)`` is the perturbed matrix.  Along the path
``dE/dt = <p, A p>`` with ``p`` the unit eigenvector; :func:`dE_dt`
evaluates it and :func:`dE_dt_fd` re-solves eigenvalues for a centered
difference.

``J~`` delta-minorates ``J`` when ``|E_j(J~)| <= |E_j(J)|`` for every
eigenvalue with ``|E_j(J)| < 2 + delta``, eigenvalues being ranked from
the outside in on each side and missing ones read as ``+-2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .coefficients import CoefficientSequence, coulomb, with_overrides
from .measure import DensityEstimate, m_function, szego_integral, theta_grid
from .spectrum import EigenSolveError, TruncatedJacobi, eigenvalue, eigenvalues_outside, eigenvector_at

__all__ = [
    "PerturbationSpec",
    "WindowError",
    "MinorationAudit",
    "StagedAudit",
    "apply_perturbation",
    "perturbed_at",
    "direction",
    "dE_dt",
    "dE_dt_fd",
    "minoration_audit",
    "minoration_flow",
    "staged_audit",
    "askey_classify",
    "askey_edges",
    "phase_class",
]

SPEC_KINDS = ("L33", "L34", "L35", "rank-one-a", "rank-one-b")
EIG_TOL = 1e-12
RATIO_SLACK = 1e-9


class WindowError(ValueError):
    """A perturbation violates the parameter window of its construction."""

    def __init__(self, message, bound):
        super().__init__(message)
        self.bound = bound


def l33_window(k):
    """Admissible ``c/d`` interval when the second site is ``a_{n+k}``."""
    top = 4 * k * k - 3
    return 1.0 / top, float(top)


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    site: int
    c: float = 0.0
    d: float = 0.0
    generalized_k: Optional[int] = None

    def __post_init__(self):
        if self.kind not in SPEC_KINDS:
            raise ValueError(f"kind must be one of {SPEC_KINDS}")
        if self.site < 1:
            raise ValueError("site must be >= 1")
        if self.c < 0:
            raise WindowError("c must be non-negative", ("c", 0.0))
        k = self.generalized_k
        if k is not None:
            if self.kind not in ("L33", "L34"):
                raise ValueError("generalized_k applies to L33 and L34 only")
            if k < 2:
                raise ValueError("generalized_k must be >= 2")
        if self.kind == "L33":
            if self.d < 0:
                raise WindowError("L33 needs d >= 0", ("d", 0.0))
            if (self.c == 0) != (self.d == 0):
                raise WindowError("L33 needs c and d both zero or both positive", ("c/d", None))
            if self.c > 0:
                lo, hi = l33_window(self.k)
                q = self.c / self.d
                if q < lo * (1 - RATIO_SLACK):
                    raise WindowError(f"c/d = {q:g} below {lo:g}", ("c/d", lo))
                if q > hi * (1 + RATIO_SLACK):
                    raise WindowError(f"c/d = {q:g} above {hi:g}", ("c/d", hi))
        if self.kind == "L35" and abs(self.d) > 0.5 * self.c * (1 + RATIO_SLACK):
            raise WindowError(f"|d| = {abs(self.d):g} exceeds c/2 = {0.5 * self.c:g}", ("d", 0.5 * self.c))
        if self.kind == "rank-one-a" and self.d != 0:
            raise ValueError("rank-one-a uses c only")
        if self.kind == "rank-one-b" and self.c != 0:
            raise ValueError("rank-one-b uses d only")

    @property
    def k(self):
        return self.generalized_k or 2

    @property
    def remark_based(self):
        """True for the k > 2 variants, whose window is stated without proof."""
        return self.generalized_k is not None and self.generalized_k > 2

    @property
    def length(self):
        """Path length ``T`` with ``J(T)`` the perturbed matrix."""
        if self.kind == "L33":
            return self.d
        if self.kind == "rank-one-b":
            return abs(self.d)
        return self.c

    @property
    def is_zero(self):
        return self.length == 0

    def touched(self):
        """Coefficient indices whose a_n or b_n change."""
        n = self.site
        if self.kind in ("rank-one-a", "rank-one-b"):
            return [n]
        if self.kind == "L33":
            return [n, n + self.k]
        if self.kind == "L34":
            return list(range(n, n + self.k + 1))
        return [n, n + 2]

    def to_dict(self):
        return asdict(self)


def direction(spec):
    """Unit-rate direction as ``({n: da_n}, {n: db_n})``."""
    n = spec.site
    if spec.kind == "rank-one-a":
        return {n: -1.0}, {}
    if spec.kind == "rank-one-b":
        return {}, {n: 1.0 if spec.d >= 0 else -1.0}
    if spec.kind == "L33":
        q = spec.c / spec.d if spec.d > 0 else 1.0
        return {n: -q, n + spec.k: -1.0}, {}
    if spec.kind == "L34":
        return {m: -1.0 for m in range(n, n + spec.k + 1)}, {}
    q = spec.d / spec.c if spec.c > 0 else 0.0
    return {n: -1.0, n + 2: -1.0}, {n: q}


def perturbed_at(seq, spec, t):
    """``J + t A`` for any real ``t`` (no window checks)."""
    da, db = direction(spec)
    sites = sorted(set(da) | set(db))
    a, b = seq.arrays(max(sites))
    over = {m: (a[m] + t * da.get(m, 0.0), b[m] + t * db.get(m, 0.0)) for m in sites}
    return with_overrides(seq, over)


def apply_perturbation(seq, spec):
    """The perturbed sequence; perturbed a-entries must stay positive."""
    if spec.is_zero:
        return seq
    out = perturbed_at(seq, spec, spec.length)
    out.arrays(max(spec.touched()))
    return out


def _vector(J, j, sign):
    E = eigenvalue(J, j, sign)
    return E, eigenvector_at(J, E, tol=1e-8)


def dE_dt(J, spec, j, sign):
    """``<p, A p>`` at the j-th eigenvalue beyond ``sign * 2`` of ``J``."""
    _check_inside(J, spec)
    _, p = _vector(J, j, sign)
    da, db = direction(spec)
    s = J.strip
    val = 0.0
    for m, w in da.items():
        # a_m couples sites m-1 and m (0-based rows of the corner)
        val += 2.0 * w * p[m - 1 - s] * p[m - s]
    for m, w in db.items():
        val += w * p[m - 1 - s] ** 2
    return float(val)


def dE_dt_fd(J, spec, j, sign, h=1e-6):
    """Centered difference ``(E(h) - E(-h)) / 2h`` by re-solving eigenvalues."""
    _check_inside(J, spec)
    vals = []
    for t in (h, -h):
        Jt = TruncatedJacobi(perturbed_at(J.seq, spec, t), J.size, J.strip, J.boundary)
        vals.append(eigenvalue(Jt, j, sign))
    return (vals[0] - vals[1]) / (2 * h)


def _check_inside(J, spec):
    top = max(spec.touched())
    if spec.site <= J.strip or top >= J.strip + J.size:
        raise ValueError("perturbation must act inside the truncation")


@dataclass
class MinorationAudit:
    delta: float
    tracked_pairs: dict
    verdict: bool
    hypothesis_ok: bool
    spec: list = field(default_factory=list)
    remark_based: bool = False
    flow: Optional[dict] = None

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _hypothesis(seqs, sites, delta):
    top = max(sites)
    for seq in seqs:
        a, b = seq.arrays(top)
        for m in sites:
            if not (abs(a[m] - 1.0) < delta and abs(b[m]) < delta):
                return False
    return True


def _ranked(es, sign):
    return es.above if sign > 0 else es.below


def _compare(before, after, delta, tol):
    """Pairs inside the window and whether each moved inward."""
    pairs = {}
    ok = True
    for sign, key in ((1, "+"), (-1, "-")):
        u, v = _ranked(before, sign), _ranked(after, sign)
        count = max(len(u), len(v))
        rows = []
        for j in range(count):
            e0 = u[j] if j < len(u) else 2.0 * sign
            e1 = v[j] if j < len(v) else 2.0 * sign
            if abs(e0) < 2 + delta:
                rows.append((e0, e1))
                if abs(e1) > abs(e0) + tol:
                    ok = False
        pairs[key] = rows
    return pairs, ok


def _spectrum(seq, N, boundary):
    return eigenvalues_outside(TruncatedJacobi(seq, N, 0, boundary), tol=EIG_TOL, marginal_factor=0.0)


def minoration_audit(seq, specs, delta=0.01, N=4000, boundary="free"):
    """Does applying ``specs`` (in order) delta-minorate ``seq``?

    The comparison uses the N-site matrices with the chosen boundary.
    ``hypothesis_ok`` reports ``|a_m - 1| < delta`` and ``|b_m| < delta``
    at every touched site, before and after each spec.
    """
    if isinstance(specs, PerturbationSpec):
        specs = [specs]
    tol = 10 * EIG_TOL
    current = seq
    hyp = True
    for spec in specs:
        if max(spec.touched()) >= N:
            raise ValueError("perturbation must act inside the truncation")
        nxt = apply_perturbation(current, spec)
        hyp = hyp and _hypothesis((current, nxt), spec.touched(), delta)
        current = nxt
    before = _spectrum(seq, N, boundary)
    after = _spectrum(current, N, boundary)
    pairs, ok = _compare(before, after, delta, tol)
    return MinorationAudit(
        delta=delta,
        tracked_pairs=pairs,
        verdict=ok,
        hypothesis_ok=hyp,
        spec=[s.to_dict() for s in specs],
        remark_based=any(s.remark_based for s in specs),
    )


def minoration_flow(seq, spec, delta=0.01, N=4000, steps=16, boundary="free"):
    """Audit along ``t = 0, T/steps, ..., T``; each step must move inward.

    Eigenvalues are re-solved at every step.  The returned audit carries the
    tracked trajectories in ``flow``.
    """
    tol = 10 * EIG_TOL
    ts = np.linspace(0.0, spec.length, steps + 1)
    spectra = [_spectrum(perturbed_at(seq, spec, t) if t else seq, N, boundary) for t in ts]
    ok = True
    for s0, s1 in zip(spectra, spectra[1:]):
        _, step_ok = _compare(s0, s1, delta, tol)
        ok = ok and step_ok
    pairs, end_ok = _compare(spectra[0], spectra[-1], delta, tol)
    traj = {}
    for sign, key in ((1, "+"), (-1, "-")):
        count = len(pairs[key])
        traj[key] = [
            [(_ranked(es, sign)[j] if j < len(_ranked(es, sign)) else 2.0 * sign) for es in spectra]
            for j in range(count)
        ]
    hyp = _hypothesis((seq, apply_perturbation(seq, spec)), spec.touched(), delta)
    return MinorationAudit(
        delta=delta,
        tracked_pairs=pairs,
        verdict=bool(ok and end_ok),
        hypothesis_ok=hyp,
        spec=[spec.to_dict()],
        remark_based=spec.remark_based,
        flow={"t": ts.tolist(), "E": traj},
    )


# -- staged procedure for O(n^-1-eps) errors ------------------------------------

@dataclass
class StagedAudit:
    C: float
    eps: float
    start: int
    stages: list
    z_values: list
    verdict: bool
    hypothesis_ok: bool
    z_bound: float

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _free_tail_z(seq, N, per_unit=32):
    grid = theta_grid(2.0 ** -24, per_unit=per_unit)
    m, _ = m_function(seq, grid, N)
    nu = np.clip(m[0].imag, 0.0, None) / np.pi
    dens = DensityEstimate(grid, nu, "via-m", N, np.zeros(grid.size))
    v = szego_integral(dens, "Z", tuple(2.0 ** -k for k in range(4, 25, 4)))
    return v.plus.extrapolated + v.minus.extrapolated


def staged_audit(target, base, eps, stages=16, delta=0.01, N=4000, start=None, z_every=4):
    """Walk from ``base`` (shifted up by ``6 C n^(-1-eps)``) towards ``target``.

    ``C`` is the sup of ``n^(1+eps)`` times the coefficient differences over
    the first N indices.  Before stage ``start`` the entries are those of
    ``target``; stage n first trades ``b_n`` for ``b~_n`` while lowering
    ``a_n, a_{n+2}`` by ``2|b_n - b~_n|``, then lowers ``a_n`` to ``a~_n``
    and ``a_{n+2}`` by a thirteenth of that.  Every step is audited for
    delta-minoration; free-tail Z values are recorded every ``z_every``
    stages.
    """
    a_t, b_t = target.arrays(N)
    a_0, b_0 = base.arrays(N)
    n = np.arange(N + 1, dtype=float)
    n[0] = 1.0
    w = n ** (1.0 + eps)
    C = float(max(np.max(np.abs(a_t[1:] - a_0[1:]) * w[1:]), np.max(np.abs(b_t[1:] - b_0[1:]) * w[1:])))
    a_s = a_0 + 6.0 * C * n ** (-1.0 - eps)
    a_s[0] = 0.0
    if start is None:
        near = (np.abs(a_s - 1) < delta) & (np.abs(a_t - 1) < delta) & (np.abs(b_0) < delta) & (np.abs(b_t) < delta)
        bad = np.flatnonzero(~near[1:]) + 1
        start = int(bad[-1] + 1) if bad.size else 1
    if start + stages + 2 >= N:
        raise ValueError("stages run past the truncation")

    table = {m: (a_t[m], b_t[m]) for m in range(1, start)}
    table.update({m: (a_s[m], b_0[m]) for m in range(start, N + 1)})
    current = coulomb(0.0, 0.0, table=tuple((m, av, bv) for m, (av, bv) in table.items()))

    records = []
    z_values = [_free_tail_z(current, N)]
    all_ok = True
    hyp_ok = True
    for k in range(stages):
        m = start + k
        a, b = current.arrays(m + 2)
        gap_b = abs(b[m] - b_t[m])
        specs = [PerturbationSpec("L35", m, c=2 * gap_b, d=b_t[m] - b[m])]
        after = apply_perturbation(current, specs[0])
        a2, _ = after.arrays(m + 2)
        drop = a2[m] - a_t[m]
        specs.append(PerturbationSpec("L33", m, c=drop, d=drop / 13.0))
        row = {"site": m, "steps": []}
        for spec in specs:
            audit = minoration_audit(current, spec, delta=delta, N=N)
            current = apply_perturbation(current, spec)
            row["steps"].append({"spec": spec.to_dict(), "verdict": audit.verdict, "hypothesis_ok": audit.hypothesis_ok})
            all_ok = all_ok and audit.verdict
            hyp_ok = hyp_ok and audit.hypothesis_ok
        records.append(row)
        if (k + 1) % z_every == 0 or k == stages - 1:
            z_values.append(_free_tail_z(current, N))
    tail = np.arange(start, N + 1, dtype=float)
    bound = z_values[0] + 14 * C * float(np.sum(tail ** (-1.0 - eps)))
    return StagedAudit(C, eps, start, records, z_values, all_ok, hyp_ok, bound)


# -- the four-region picture ------------------------------------------------------

LINE_TOL = 1e-12


def askey_edges(alpha, beta):
    """Predicted status at ``+2`` and ``-2``: converges / diverges / open."""
    out = []
    for s in (1, -1):
        g = 2 * alpha + s * beta
        if g > LINE_TOL:
            out.append("converges")
        elif g < -LINE_TOL:
            out.append("diverges")
        else:
            out.append("converges" if alpha >= 0 else "open")
    return tuple(out)


def phase_class(at_plus2, at_minus2):
    """Class name from two edge statuses; anything undecided is borderline_open."""
    if "open" in (at_plus2, at_minus2) or "borderline" in (at_plus2, at_minus2):
        return "borderline_open"
    table = {
        ("converges", "converges"): "szego_both",
        ("converges", "diverges"): "szego_at_plus2_only",
        ("diverges", "converges"): "szego_at_minus2_only",
        ("diverges", "diverges"): "szego_neither",
    }
    return table[(at_plus2, at_minus2)]


def askey_classify(alpha, beta):
    return phase_class(*askey_edges(alpha, beta))
