"""Exact rational geometry of the (C, Q, E) rate regions.

Rates are in units of ``log q``. The regions are described by systems that
are linear in the rates and in a parameter ``t' = t / log q`` in ``[0, 1]``;
a point is a member iff some ``t'`` satisfies every row.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import sympy
from sympy.solvers.simplex import lpmax
from sympy.solvers.simplex import UnboundedLPError, InfeasibleLPError

from .errors import DomainError

ZERO, ONE = Fraction(0), Fraction(1)
COORDS = ("C", "Q", "E")


def frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise DomainError(f"expected an exact rational, got float {x!r}")
    return Fraction(x)


def frac_str(x: Fraction) -> str:
    return str(Fraction(x))


@dataclass(frozen=True)
class RateTriple:
    """Net rates: ``C``, ``Q`` produced, ``E`` consumed (units of ``log q``)."""

    C: Fraction
    Q: Fraction
    E: Fraction

    def __post_init__(self):
        for name in COORDS:
            object.__setattr__(self, name, frac(getattr(self, name)))

    @classmethod
    def parse(cls, text: str) -> "RateTriple":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise DomainError(f"expected C,Q,E, got {text!r}")
        return cls(*(Fraction(p) for p in parts))

    def __iter__(self):
        return iter((self.C, self.Q, self.E))

    def __add__(self, other):
        o = tuple(other)
        return RateTriple(self.C + o[0], self.Q + o[1], self.E + o[2])

    def scale(self, lam) -> "RateTriple":
        lam = frac(lam)
        return RateTriple(lam * self.C, lam * self.Q, lam * self.E)

    def to_json(self) -> list[str]:
        return [frac_str(x) for x in self]


@dataclass(frozen=True)
class SingletonParams:
    n: int
    d: int
    q: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if not 1 <= self.d <= self.n + 1:
            raise DomainError(f"need 1 <= d <= n+1, got d={self.d}, n={self.n}")
        if self.q < 2:
            raise DomainError("q must be >= 2")


@dataclass(frozen=True)
class IIDParams:
    q: int = 2
    delta: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "delta", frac(self.delta))
        if self.q < 2:
            raise DomainError("q must be >= 2")
        if not 0 <= self.delta <= 1:
            raise DomainError("delta must lie in [0, 1]")


Params = SingletonParams | IIDParams

# a t'-row (cC, cQ, cE, ct, rhs) means cC*C + cQ*Q + cE*E + ct*t' <= rhs
TRow = tuple[Fraction, Fraction, Fraction, Fraction, Fraction]
# an HRep row (cC, cQ, cE, rhs)
Row = tuple[Fraction, Fraction, Fraction, Fraction]


def _coefficients(p: Params) -> tuple[Fraction, Fraction, Fraction]:
    """``(kept, balance, erased)``: ``n-d+1, n-2d+2, d-1`` or ``1-delta, 1-2delta, delta``."""
    if isinstance(p, SingletonParams):
        return Fraction(p.n - p.d + 1), Fraction(p.n - 2 * p.d + 2), Fraction(p.d - 1)
    return 1 - p.delta, 1 - 2 * p.delta, p.delta


def t_system(p: Params) -> list[TRow]:
    kept, bal, erased = _coefficients(p)
    return [
        (ONE, Fraction(2), ZERO, -kept, kept),
        (ZERO, ONE, -ONE, -bal, ZERO),
        (ONE, ONE, -ONE, erased, kept),
    ]


# -- membership --------------------------------------------------------------

@dataclass(frozen=True)
class Membership:
    member: bool
    interval: tuple[Fraction, Fraction] | None

    def to_json(self) -> dict:
        iv = None if self.interval is None else [frac_str(x) for x in self.interval]
        return {"member": self.member, "t_interval": iv}


def feasible_interval(rows: Sequence[TRow], r: RateTriple, box=(ZERO, ONE)) -> tuple[Fraction, Fraction] | None:
    """Closed interval of ``t'`` in ``box`` satisfying every row at ``r``, or None."""
    lo, hi = box
    C, Q, E = r
    for cC, cQ, cE, ct, rhs in rows:
        slack = rhs - cC * C - cQ * Q - cE * E
        if ct > 0:
            hi = min(hi, slack / ct)
        elif ct < 0:
            lo = max(lo, slack / ct)
        elif slack < 0:
            return None
        if lo > hi:
            return None
    return (lo, hi)


def membership(p: Params, r: RateTriple) -> Membership:
    iv = feasible_interval(t_system(p), r)
    return Membership(iv is not None, iv)


def membership_singleton(p: SingletonParams, r: RateTriple) -> Membership:
    return membership(p, r)


def membership_iid(p: IIDParams, r: RateTriple) -> Membership:
    return membership(p, r)


def membership_scan(p: Params, r: RateTriple, grid: int = 1024) -> bool:
    """Independent oracle: try ``t' = k/grid`` and every row breakpoint directly."""
    rows = t_system(p)
    C, Q, E = r
    slacks = [(ct, rhs - cC * C - cQ * Q - cE * E) for cC, cQ, cE, ct, rhs in rows]
    # grid points: ct * k / grid <= s  <=>  ct.num * s.den * k <= grid * s.num * ct.den
    k = np.arange(grid + 1, dtype=object)
    ok = np.ones(grid + 1, dtype=bool)
    for ct, s in slacks:
        ct, s = Fraction(ct), Fraction(s)
        ok &= np.array(ct.numerator * s.denominator * k <= grid * s.numerator * ct.denominator, dtype=bool)
    if ok.any():
        return True
    breaks = {s / ct for ct, s in slacks if ct != 0 and 0 <= s / ct <= 1}
    return any(all(ct * t <= s for ct, s in slacks) for t in breaks)


# -- H-representations ----------------------------------------------------------

@dataclass(frozen=True)
class HRep:
    rows: tuple[Row, ...]
    infeasible: bool = False

    def contains(self, r: RateTriple) -> bool:
        if self.infeasible:
            return False
        C, Q, E = r
        return all(cC * C + cQ * Q + cE * E <= rhs for cC, cQ, cE, rhs in self.rows)

    def __len__(self):
        return len(self.rows)

    def to_json(self) -> list[list[str]]:
        return [[frac_str(x) for x in row] for row in self.rows]

    @classmethod
    def from_json(cls, data) -> "HRep":
        return cls(tuple(tuple(Fraction(x) for x in row) for row in data))


def canonical(row: Row) -> Row:
    """Scale so the first nonzero coefficient has absolute value 1."""
    lead = next((c for c in row[:3] if c != 0), None)
    if lead is None:
        return row
    s = abs(lead)
    return tuple(x / s for x in row)


def _canonical_set(rows: Iterable[Row]) -> tuple[list[Row], bool]:
    out, infeasible = set(), False
    for row in rows:
        row = tuple(frac(x) for x in row)
        if all(c == 0 for c in row[:3]):
            if row[3] < 0:
                infeasible = True
            continue
        out.add(canonical(row))
    return sorted(out), infeasible


_SYMS = sympy.symbols("C Q E", real=True)


def _lp_max(obj: Row, rows: Sequence[Row]) -> Fraction | None:
    """``max obj.x`` subject to ``rows``; None when unbounded."""
    C, Q, E = _SYMS
    expr = sum(sympy.Rational(c.numerator, c.denominator) * s for c, s in zip(obj[:3], _SYMS))
    cons = [sympy.Rational(r[0].numerator, r[0].denominator) * C
            + sympy.Rational(r[1].numerator, r[1].denominator) * Q
            + sympy.Rational(r[2].numerator, r[2].denominator) * E
            <= sympy.Rational(r[3].numerator, r[3].denominator) for r in rows]
    cons = [c for c in cons if c is not sympy.true]
    try:
        val, _ = lpmax(expr, cons)
    except UnboundedLPError:
        return None
    return Fraction(int(val.p), int(val.q))


def remove_redundant(h: HRep | Iterable[Row]) -> HRep:
    """Drop rows implied by the others, each certified by an exact LP."""
    rows = h.rows if isinstance(h, HRep) else tuple(h)
    rows, infeasible = _canonical_set(rows)
    if infeasible or (isinstance(h, HRep) and h.infeasible):
        return HRep(((ZERO, ZERO, ZERO, -ONE),), infeasible=True)
    kept = list(rows)
    for row in list(rows):
        others = [r for r in kept if r != row]
        if not others:
            continue
        try:
            best = _lp_max(row, others)
        except InfeasibleLPError:
            return HRep(((ZERO, ZERO, ZERO, -ONE),), infeasible=True)
        if best is not None and best <= row[3]:
            kept = others
    return HRep(tuple(sorted(kept)))


def fourier_motzkin(rows: Sequence[TRow], box=(ZERO, ONE), prune: bool = True) -> HRep:
    """Eliminate ``t'`` (restricted to ``box``) from rows ``(cC, cQ, cE, ct, rhs)``."""
    lo, hi = box
    rows = [tuple(frac(x) for x in r) for r in rows]
    rows += [(ZERO, ZERO, ZERO, -ONE, -frac(lo)), (ZERO, ZERO, ZERO, ONE, frac(hi))]
    pos = [r for r in rows if r[3] > 0]
    neg = [r for r in rows if r[3] < 0]
    out: list[Row] = [(r[0], r[1], r[2], r[4]) for r in rows if r[3] == 0]
    for a in pos:
        for b in neg:
            wa, wb = 1 / a[3], 1 / -b[3]
            out.append(tuple(wa * a[i] + wb * b[i] for i in (0, 1, 2, 4)))
    if prune:
        return remove_redundant(out)
    canon, infeasible = _canonical_set(out)
    if infeasible:
        return HRep(((ZERO, ZERO, ZERO, -ONE),), infeasible=True)
    return HRep(tuple(canon))


def hrep_singleton(p: Params) -> HRep:
    return fourier_motzkin(t_system(p))


def hrep_thm3(p: IIDParams | Fraction) -> HRep:
    """Closed-form inequality list of the i.i.d. erasure region, ``t'`` eliminated."""
    delta = p.delta if isinstance(p, IIDParams) else frac(p)
    half = Fraction(1, 2)
    rows: list[Row] = [
        (ONE, Fraction(2), ZERO, 2 * (1 - delta)),
        (ZERO, ONE, -ONE, max(ZERO, 1 - 2 * delta)),
        (ONE, ONE, -ONE, 1 - delta),
        (ONE, 1 + delta, -(1 - delta), 1 - delta),
    ]
    if delta <= half:
        rows.append(((1 - 2 * delta) / (1 - delta), ONE, -ONE, 1 - 2 * delta))
    if delta >= half:
        if delta < 1:
            rows.append(((2 * delta - 1) / (1 - delta), (3 * delta - 1) / (1 - delta), -ONE, 2 * delta - 1))
        else:
            # multiplied through by (1 - delta) so delta = 1 stays finite
            rows.append((2 * delta - 1, 3 * delta - 1, -(1 - delta), (2 * delta - 1) * (1 - delta)))
    canon, _ = _canonical_set(rows)
    return HRep(tuple(canon))


# -- geometry --------------------------------------------------------------------

TP = RateTriple(-2, 1, 1)
RC = RateTriple(0, -1, -1)
DC = RateTriple(2, -1, 1)
RAYS = {"TP": TP, "RC": RC, "DC": DC}


@dataclass(frozen=True)
class ConeGeometry:
    a0: RateTriple
    a1: RateTriple
    rays: dict = field(default_factory=lambda: dict(RAYS))
    segment_status: str = "converse-only"

    def apex(self, t) -> RateTriple:
        """``a_t' = (1-t') a0 + t' a1``."""
        t = frac(t)
        return RateTriple(*((1 - t) * x + t * y for x, y in zip(self.a0, self.a1)))

    def to_json(self) -> dict:
        return {"a0": self.a0.to_json(), "a1": self.a1.to_json(),
                "rays": {k: v.to_json() for k, v in self.rays.items()},
                "segment": {"from": "a0", "to": "a1", "status": self.segment_status,
                            "note": "interior segment points are not claimed attainable"},
                "units": "logq"}


def geometry(p: Params) -> ConeGeometry:
    kept, _, erased = _coefficients(p)
    return ConeGeometry(RateTriple(kept, 0, 0), RateTriple(0, kept, erased))


def export_slice(p: Params, fixed: tuple[str, Fraction], step, lo=None, hi=None) -> str:
    """CSV ``x,y,member`` over the two coordinates not fixed.

    The default grid spans ``[0, n]`` (block case) or ``[0, 2]`` (i.i.d. case).
    """
    name, value = fixed
    if name not in COORDS:
        raise DomainError(f"fixed coordinate must be one of {COORDS}, got {name!r}")
    step = frac(step)
    if step <= 0:
        raise DomainError("step must be positive")
    value = frac(value)
    if lo is None:
        lo = ZERO
    if hi is None:
        hi = Fraction(p.n) if isinstance(p, SingletonParams) else Fraction(2)
    lo, hi = frac(lo), frac(hi)
    free = [c for c in COORDS if c != name]
    grid = []
    x = lo
    while x <= hi:
        grid.append(x)
        x += step
    rows = t_system(p)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "member"])
    for xv in grid:
        for yv in grid:
            coords = {name: value, free[0]: xv, free[1]: yv}
            r = RateTriple(coords["C"], coords["Q"], coords["E"])
            w.writerow([frac_str(xv), frac_str(yv), int(feasible_interval(rows, r) is not None)])
    return buf.getvalue()


def rational_grid(lo, hi, step) -> list[Fraction]:
    lo, hi, step = frac(lo), frac(hi), frac(step)
    n = int((hi - lo) / step)
    return [lo + k * step for k in range(n + 1)]
