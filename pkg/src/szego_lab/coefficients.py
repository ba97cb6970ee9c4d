"""Jacobi coefficient sequences (a_n, b_n), n >= 1.

A :class:`CoefficientSequence` is an immutable rule that produces the
off-diagonal entries ``a_n > 0`` and the diagonal entries ``b_n`` of a
half-infinite Jacobi matrix for any index range.  Besides the free matrix
and the Coulomb family ``a_n = 1 + alpha n^-gamma``, ``b_n = beta n^-gamma``
(optionally with a seeded ``O(n^{-1-eps})`` error), sequences can be
stripped, shifted, reflected and overridden entry-wise; all of these
compose into a ``kind="transformed"`` sequence that keeps a reference to
its base.

Arrays returned by :meth:`CoefficientSequence.arrays` are indexed by ``n``
directly: element 0 holds the convention ``a_0 = b_0 = 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

import numpy as np

__all__ = [
    "ParameterError",
    "PowerLaw",
    "CoefficientSequence",
    "AdmissibilityReport",
    "free",
    "coulomb",
    "regularized_coulomb",
    "explicit",
    "coeffs_at",
    "delta_n",
    "deltas",
    "admissibility",
    "admissible_shift",
    "check_shift_hypotheses",
    "stripped",
    "reflected",
    "with_overrides",
]

KINDS = ("free", "coulomb", "explicit-table", "transformed")
SHIFT_HYPOTHESES = ("dominated", "monotone")


class ParameterError(ValueError):
    """A parameterization produced a non-positive off-diagonal entry."""

    def __init__(self, index, value):
        super().__init__(f"a_{index} = {value!r} is not positive")
        self.index = int(index)
        self.value = float(value)


@dataclass(frozen=True)
class PowerLaw:
    """The rule ``n -> amp * n**(-exp)``; used for coefficient shifts."""

    amp: float
    exp: float

    def __call__(self, n):
        return self.amp * np.asarray(n, dtype=float) ** (-self.exp)

    def to_dict(self):
        return {"amp": self.amp, "exp": self.exp}


@dataclass(frozen=True)
class CoefficientSequence:
    kind: str = "free"
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 1.0
    error_amp: float = 0.0
    error_exp: float = 1.0
    error_seed: int = 0
    # sorted tuple of (n, a_n, b_n) overrides; applied after everything else
    table: tuple = ()
    # transformed kind only
    base: Optional["CoefficientSequence"] = None
    offset: int = 0
    shift_a: Optional[Callable] = None
    shift_b: Optional[Callable] = None
    b_sign: int = 1
    shift_hypothesis: Optional[str] = None
    _table_map: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if not 0.0 < self.gamma:
            raise ValueError("gamma must be positive")
        if self.error_amp < 0 or self.error_exp <= 0:
            raise ValueError("need error_amp >= 0 and error_exp > 0")
        if self.kind == "transformed" and self.base is None:
            raise ValueError("transformed sequence needs a base")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")
        table = tuple(sorted((int(n), float(a), float(b)) for n, a, b in self.table))
        if any(n < 1 for n, _, _ in table):
            raise ValueError("table indices start at 1")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "_table_map", {n: (a, b) for n, a, b in table})

    # -- evaluation ---------------------------------------------------------

    def _raw(self, n_max):
        """Values before table overrides, indices 0..n_max (0 is filler)."""
        n = np.arange(n_max + 1, dtype=float)
        n[0] = 1.0
        if self.kind in ("free", "explicit-table"):
            a = np.ones(n_max + 1)
            b = np.zeros(n_max + 1)
        elif self.kind == "coulomb":
            decay = n ** (-self.gamma)
            a = 1.0 + self.alpha * decay
            b = self.beta * decay
            if self.error_amp > 0:
                scale = self.error_amp * n ** (-1.0 - self.error_exp)
                a = a + scale * _unit_noise(self.error_seed, 0, n_max)
                b = b + scale * _unit_noise(self.error_seed, 1, n_max)
        else:
            a_base, b_base = self.base.arrays(n_max + self.offset)
            a = a_base[self.offset:].copy()
            b = self.b_sign * b_base[self.offset:]
            if self.shift_a is not None:
                a = a + np.asarray(self.shift_a(n), dtype=float)
            if self.shift_b is not None:
                b = b + np.asarray(self.shift_b(n), dtype=float)
        return a, b

    def arrays(self, n_max):
        """Return ``(a, b)`` of length ``n_max + 1`` with ``a[n] = a_n``.

        Index 0 carries ``a_0 = b_0 = 0``.  Raises :class:`ParameterError`
        if any ``a_n`` with ``1 <= n <= n_max`` is not positive.
        """
        n_max = int(n_max)
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        a, b = self._raw(n_max)
        a = np.array(a, dtype=float)
        b = np.array(b, dtype=float)
        for n, (an, bn) in self._table_map.items():
            if n <= n_max:
                a[n] = an
                b[n] = bn
        a[0] = 0.0
        b[0] = 0.0
        bad = np.flatnonzero(~(a[1:] > 0))
        if bad.size:
            i = bad[0] + 1
            raise ParameterError(i, a[i])
        return a, b

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        d = {
            "kind": self.kind,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "error_amp": self.error_amp,
            "error_exp": self.error_exp,
            "error_seed": self.error_seed,
            "table": [list(row) for row in self.table],
        }
        if self.kind == "transformed":
            d["base"] = self.base.to_dict()
            d["offset"] = self.offset
            d["b_sign"] = self.b_sign
            d["shift_hypothesis"] = self.shift_hypothesis
            for name in ("shift_a", "shift_b"):
                rule = getattr(self, name)
                if rule is None:
                    d[name] = None
                elif isinstance(rule, PowerLaw):
                    d[name] = rule.to_dict()
                else:
                    raise TypeError(f"{name} is not serializable: {rule!r}")
        return d

    @classmethod
    def from_dict(cls, d):
        kw = dict(
            kind=d.get("kind", "free"),
            alpha=float(d.get("alpha", 0.0)),
            beta=float(d.get("beta", 0.0)),
            gamma=float(d.get("gamma", 1.0)),
            error_amp=float(d.get("error_amp", 0.0)),
            error_exp=float(d.get("error_exp", 1.0)),
            error_seed=int(d.get("error_seed", 0)),
            table=tuple(tuple(row) for row in d.get("table") or ()),
        )
        if kw["kind"] == "transformed":
            kw["base"] = cls.from_dict(d["base"])
            kw["offset"] = int(d.get("offset", 0))
            kw["b_sign"] = int(d.get("b_sign", 1))
            kw["shift_hypothesis"] = d.get("shift_hypothesis")
            for name in ("shift_a", "shift_b"):
                if d.get(name):
                    kw[name] = PowerLaw(**d[name])
        return cls(**kw)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _unit_noise(seed, stream, n_max):
    # prefix-stable: the first k draws do not depend on n_max
    rng = np.random.default_rng([int(seed), stream])
    u = np.empty(n_max + 1)
    u[0] = 0.0
    u[1:] = rng.uniform(-1.0, 1.0, n_max)
    return u


# -- constructors -------------------------------------------------------------

def free():
    return CoefficientSequence("free")


def coulomb(alpha, beta, gamma=1.0, error_amp=0.0, error_exp=1.0, error_seed=0, table=()):
    return CoefficientSequence(
        "coulomb", alpha=alpha, beta=beta, gamma=gamma, error_amp=error_amp,
        error_exp=error_exp, error_seed=error_seed, table=tuple(table),
    )


def regularized_coulomb(alpha, beta, gamma=1.0, error_amp=0.0, error_exp=1.0, error_seed=0, a_min=0.25):
    """Coulomb sequence whose leading entries with ``a_n < a_min`` are set to 1.

    Only finitely many entries change, so Szegő behaviour at both edges is
    that of the plain Coulomb rule; this admits ``alpha <= -1``.
    """
    base = coulomb(alpha, beta, gamma, error_amp, error_exp, error_seed)
    probe = 8
    while True:
        a, b = base._raw(probe)
        low = np.flatnonzero(a[1:] < a_min) + 1
        if low.size == 0 or low[-1] < probe // 2:
            break
        probe *= 2
    if low.size == 0:
        return base
    return replace(base, table=tuple((int(n), 1.0, float(b[n])) for n in low))


def explicit(table):
    """Free sequence with finitely many entries replaced.

    ``table`` maps ``n -> (a_n, b_n)`` or is an iterable of ``(n, a, b)``.
    """
    if isinstance(table, Mapping):
        table = [(n, a, b) for n, (a, b) in table.items()]
    return CoefficientSequence("explicit-table", table=tuple(table))


def with_overrides(seq, overrides):
    """Copy of ``seq`` with entries ``{n: (a_n, b_n)}`` replaced."""
    merged = dict(seq._table_map)
    merged.update({int(n): (float(a), float(b)) for n, (a, b) in overrides.items()})
    return replace(seq, table=tuple((n, a, b) for n, (a, b) in merged.items()))


def stripped(seq, n):
    """The sequence of ``J^(n)``: ``a'_k = a_{k+n}``, ``b'_k = b_{k+n}``."""
    if n == 0:
        return seq
    return CoefficientSequence("transformed", base=seq, offset=int(n))


def reflected(seq):
    """``b_n -> -b_n``; the spectral picture is mirrored through 0."""
    return CoefficientSequence("transformed", base=seq, b_sign=-1)


# -- pointwise operations -------------------------------------------------------

def coeffs_at(seq, n):
    if n < 1:
        raise ValueError("index must be >= 1")
    a, b = seq.arrays(n)
    return float(a[n]), float(b[n])


def deltas(seq, n_max):
    """Array ``d`` with ``d[n] = delta_n`` for ``1 <= n <= n_max`` (``d[0] = 0``)."""
    a, b = seq.arrays(n_max + 2)
    n = np.arange(1, n_max + 1)
    bracket = (
        a[n + 1] ** 2 - a[n] ** 2
        + 0.5 * a[n + 1] * np.abs(b[n + 2] - b[n + 1])
        + 0.5 * a[n] * np.abs(b[n + 1] - b[n])
    )
    out = np.zeros(n_max + 1)
    out[1:] = np.maximum(bracket, 0.0)
    return out


def delta_n(seq, n):
    """Positive part of the envelope growth coefficient at index ``n``."""
    if n < 1:
        raise ValueError("index must be >= 1")
    return float(deltas(seq, n)[n])


# -- admissibility ----------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    is_admissible_finite: bool
    horizon: int
    floor_index: int
    weighted_sum: float
    tail_estimate: Optional[float] = None
    first_violation: Optional[int] = None
    increment_ratio: Optional[float] = None

    def to_dict(self):
        return dict(self.__dict__)


def _floor_violations(seq, horizon):
    a, b = seq.arrays(horizon)
    ok = a[1:] >= 1.0 + 0.5 * np.abs(b[1:]) - 1e-15
    return np.flatnonzero(~ok) + 1


def admissibility(seq, horizon, *, ratio_threshold=0.75):
    """Decide admissibility on ``[1, horizon]``.

    The floor condition ``a_n >= 1 + |b_n|/2`` must hold beyond some index
    no larger than ``horizon // 2``.  Summability of ``n * delta_n`` is
    judged from the last two dyadic blocks of partial sums: a convergent
    tail shrinks from block to block, a logarithmically divergent one
    does not.  The verdict needs ``ratio <= ratio_threshold`` (or both
    blocks numerically zero).
    """
    horizon = int(horizon)
    if horizon < 10:
        raise ValueError("horizon must be >= 10")
    bad = _floor_violations(seq, horizon)
    floor_index = int(bad[-1]) + 1 if bad.size else 1
    first_violation = int(bad[0]) if bad.size else None

    d = deltas(seq, horizon)
    n = np.arange(horizon + 1)
    partial = np.cumsum(n * d)
    weighted_sum = float(partial[-1])
    q = horizon // 4
    inc_hi = partial[horizon] - partial[2 * q]
    inc_lo = partial[2 * q] - partial[q]
    tiny = 1e-12 * max(1.0, weighted_sum)
    if inc_hi <= tiny:
        ratio = 0.0
    elif inc_lo <= tiny:
        ratio = math.inf
    else:
        ratio = float(inc_hi / inc_lo)

    floor_ok = floor_index <= horizon // 2
    tail = _coulomb_tail(seq, horizon, d)
    verdict = bool(floor_ok and (ratio <= ratio_threshold))
    return AdmissibilityReport(
        is_admissible_finite=verdict,
        horizon=horizon,
        floor_index=floor_index,
        weighted_sum=weighted_sum,
        tail_estimate=tail,
        first_violation=first_violation if not floor_ok else None,
        increment_ratio=ratio,
    )


def _coulomb_tail(seq, horizon, d):
    # delta_n = O(n^(-2 gamma - 1)) for error-free Coulomb data with 2 alpha >= |beta|
    if seq.kind != "coulomb" or seq.error_amp > 0 or seq.table:
        return None
    if 2 * seq.alpha < abs(seq.beta) or seq.gamma <= 0.5:
        return None
    g = seq.gamma
    n = np.arange(horizon // 2, horizon + 1)
    const = float(np.max(d[n] * n ** (2 * g + 1)))
    return const * horizon ** (1 - 2 * g) / (2 * g - 1)


# -- shifts ---------------------------------------------------------------------

def admissible_shift(seq, e=None, f=None, hypothesis="dominated"):
    """Return ``{a_n + e_n, b_n + f_n}`` tagged with the claimed hypothesis.

    ``hypothesis="dominated"``: ``2 e_n >= |f_n|`` eventually, ``e_n -> 0``
    and ``sum n (|e_{n+1}-e_n| + |f_{n+1}-f_n|) < inf``.
    ``hypothesis="monotone"``: ``f = 0`` and ``e_n`` decreases to 0 with
    ``n e_n |a_{n+1}-a_n|`` or ``n e_n |b_{n+2}-b_{n+1}|`` bounded.

    The claim is recorded, not proved; see :func:`check_shift_hypotheses`.
    """
    if hypothesis not in SHIFT_HYPOTHESES:
        raise ValueError(f"hypothesis must be one of {SHIFT_HYPOTHESES}")
    if hypothesis == "monotone" and f is not None:
        raise ValueError("the monotone shift leaves b_n unchanged")
    out = CoefficientSequence(
        "transformed", base=seq, shift_a=e, shift_b=f, shift_hypothesis=hypothesis
    )
    out.arrays(64)  # cheap early rejection of a_n + e_n <= 0
    return out


def check_shift_hypotheses(seq, horizon=10_000):
    """Numerically test the shift hypothesis recorded on ``seq``.

    Returns a dict of booleans; an empty dict if ``seq`` is not a shift.
    """
    if seq.kind != "transformed" or seq.shift_hypothesis is None:
        return {}
    n = np.arange(1, horizon + 2, dtype=float)
    e = np.asarray(seq.shift_a(n), dtype=float) if seq.shift_a else np.zeros_like(n)
    f = np.asarray(seq.shift_b(n), dtype=float) if seq.shift_b else np.zeros_like(n)
    tail = slice(horizon // 2, None)
    out = {"decays": bool(abs(e[-1]) <= abs(e[0]) + 1e-300 and abs(e[-1]) < 1e-2)}
    if seq.shift_hypothesis == "dominated":
        out["dominates"] = bool(np.all(2 * e[tail] >= np.abs(f[tail]) - 1e-15))
        var = n[:-1] * (np.abs(np.diff(e)) + np.abs(np.diff(f)))
        partial = np.cumsum(var)
        h = horizon
        out["weighted_variation_bounded"] = bool(
            partial[-1] - partial[h // 2] <= 0.75 * (partial[h // 2] - partial[h // 4]) + 1e-15
        )
    else:
        out["monotone"] = bool(np.all(np.diff(e) <= 1e-300))
        a, b = seq.base.arrays(horizon + 2)
        m = n[:-1].astype(int)
        prod_a = m * e[:-1] * np.abs(a[m + 1] - a[m])
        prod_b = m * e[:-1] * np.abs(b[m + 2] - b[m + 1])
        out["bounded_product"] = bool(
            np.max(prod_a[tail]) <= 2 * np.max(prod_a[: horizon // 2]) + 1e-12
            or np.max(prod_b[tail]) <= 2 * np.max(prod_b[: horizon // 2]) + 1e-12
        )
    return out
