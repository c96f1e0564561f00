"""One-shot converse bounds on net (C, Q, E) for a given witness ensemble,
plus the closed forms they reduce to for erasure-type channels.

All quantities are in bits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .channels import (
    BlockErasureSpec,
    ErasureSpec,
    KrausChannel,
    apply,
    build_block_erasure,
    build_erasure,
)
from .config import TOL_ALG, TOL_NUM
from .errors import DomainError, LayoutError, WitnessError
from .hilbert import (
    CQEnsemble,
    DensityMatrix,
    _as_labels,
    coherent_information,
    entropy,
    g_function,
    mutual_information,
    pure,
)
from .lemmas import SubsetEntropyProfile, lemma4_t, profile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CodeRates:
    """One-shot resource sizes in bits and the code error ``epsilon``."""

    C1: float = 0.0
    C2: float = 0.0
    Q1: float = 0.0
    Q2: float = 0.0
    E1: float = 0.0
    E2: float = 0.0
    log_TA_prime: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise DomainError(f"epsilon={self.epsilon} outside [0, 1]")
        for name in ("C1", "C2", "Q1", "Q2", "E1", "E2", "log_TA_prime"):
            if getattr(self, name) < -TOL_NUM:
                raise DomainError(f"{name} must be nonnegative")

    @property
    def C(self) -> float:
        return self.C2 - self.C1

    @property
    def Q(self) -> float:
        return self.Q2 - self.Q1

    @property
    def E(self) -> float:
        return self.E1 - self.E2

    def to_json(self) -> dict:
        return {"C1": self.C1, "C2": self.C2, "Q1": self.Q1, "Q2": self.Q2, "E1": self.E1,
                "E2": self.E2, "log_TA_prime": self.log_TA_prime, "epsilon": self.epsilon,
                "net": {"C": self.C, "Q": self.Q, "E": self.E}, "units": "bits"}

    @classmethod
    def from_json(cls, data: dict) -> "CodeRates":
        keys = ("C1", "C2", "Q1", "Q2", "E1", "E2", "log_TA_prime", "epsilon")
        return cls(**{k: float(data.get(k, 0.0)) for k in keys})


@dataclass(frozen=True)
class ConverseBounds:
    """Right-hand sides for ``C+2Q``, ``Q-E`` and ``C+Q-E`` (bits)."""

    b1: float
    b2: float
    b3: float
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"b1": self.b1, "b2": self.b2, "b3": self.b3, "info": self.info, "units": "bits"}


# -- witness handling --------------------------------------------------------

def _purified(s: DensityMatrix, u: int) -> DensityMatrix:
    lam = s.eigenvalues()
    defect = 1.0 - float(lam[-1])
    if defect > TOL_NUM:
        raise WitnessError(f"witness state {u} is mixed (1 - max eigenvalue = {defect:.3e})")
    if defect > TOL_ALG:
        log.warning("witness state %d is only nearly pure (defect %.2e); projecting onto top eigenvector", u, defect)
        return pure(s.top_vector(), s.layout)
    return s


def _pure_witness(sigma0: CQEnsemble) -> CQEnsemble:
    return CQEnsemble(tuple((p, _purified(s, u)) for u, (p, s) in enumerate(sigma0.items)))


def _split(sigma0: CQEnsemble, channel: KrausChannel, a_prime):
    a_prime = channel.input_layout.labels if a_prime is None else _as_labels(a_prime)
    for lab in a_prime:
        sigma0.layout.index(lab)
    a = tuple(lab for lab in sigma0.layout.labels if lab not in a_prime)
    return a, a_prime


def channel_output(sigma0: CQEnsemble, channel: KrausChannel, a_prime=None, b_labels=None) -> CQEnsemble:
    """``{p(u), (id_A (x) N)(phi_u)}``: the ensemble after sending ``A'`` through ``channel``."""
    _, a_prime = _split(sigma0, channel, a_prime)
    return sigma0.map(lambda s: apply(channel, s, a_prime, b_labels))


def _output_labels(channel: KrausChannel, sigma0: CQEnsemble, b_labels):
    if b_labels is not None:
        return _as_labels(b_labels)
    return channel.output_layout.labels


def info_from_blocks(out: CQEnsemble, a, b) -> dict:
    """``I(UA:B)``, ``I(A>BU)`` and ``I(U:B)`` from the classical block structure."""
    s_b = entropy(out.average(b))
    per_b = [entropy(s, b) for s in out.states]
    per_ab = [entropy(s, a + b) for s in out.states]
    per_a = [entropy(s, a) for s in out.states]
    return info_from_entropies(out.probs, per_a, per_b, per_ab, s_b)


def info_from_entropies(p, per_a, per_b, per_ab, s_b: float) -> dict:
    """Combine per-branch entropies ``S(A)_u, S(B)_u, S(AB)_u`` and the average ``S(B)``."""
    p = np.asarray(p, dtype=float)
    per_a, per_b, per_ab = (np.asarray(x, dtype=float) for x in (per_a, per_b, per_ab))
    mask = p > 0
    cond_b, cond_ab, cond_a = (float(np.dot(p[mask], x[mask])) for x in (per_b, per_ab, per_a))
    return {
        "I(UA:B)": cond_a + s_b - cond_ab,
        "I(A>BU)": cond_b - cond_ab,
        "I(U:B)": s_b - cond_b,
    }


def info_explicit(out: CQEnsemble, a, b, u_label: str = "U") -> dict:
    """The same three quantities on the materialized ``U (x) A (x) B`` matrix."""
    sigma = out.to_density_matrix(u_label)
    ua = (u_label,) + tuple(a)
    return {
        "I(UA:B)": mutual_information(sigma, ua, b),
        "I(A>BU)": coherent_information(sigma, a, tuple(b) + (u_label,)),
        "I(U:B)": mutual_information(sigma, u_label, b),
    }


def thm1_bounds(sigma0: CQEnsemble, channel: KrausChannel, rates: CodeRates, a_prime=None,
                b_labels=None) -> ConverseBounds:
    """Converse right-hand sides for the witness ``sigma0`` sent through ``channel``.

    The channel acts on the factors ``a_prime`` (default: the channel's input
    labels); the remaining factors form ``A``. Each ``phi_u`` must be pure.
    """
    sigma0 = _pure_witness(sigma0)
    a, a_prime = _split(sigma0, channel, a_prime)
    out = channel_output(sigma0, channel, a_prime, b_labels)
    b = _output_labels(channel, sigma0, b_labels)
    return bounds_from_info(info_from_blocks(out, a, b), rates)


def bounds_from_info(info: dict, rates: CodeRates) -> ConverseBounds:
    """Right-hand sides from the three information quantities plus the error terms."""
    eps = rates.epsilon
    g = g_function(eps)
    b1 = info["I(UA:B)"] + 2 * eps * (rates.C2 + rates.Q2) + g
    b2 = info["I(A>BU)"] + 2 * eps * (rates.Q2 + rates.log_TA_prime) + g
    b3 = info["I(U:B)"] + info["I(A>BU)"] + 2 * eps * (rates.C2 + rates.Q2 + rates.log_TA_prime) + 2 * g
    return ConverseBounds(b1, b2, b3, info)


def check_rates(bounds: ConverseBounds, rates: CodeRates, tol: float = TOL_NUM) -> bool:
    C, Q, E = rates.C, rates.Q, rates.E
    return (C + 2 * Q <= bounds.b1 + tol
            and Q - E <= bounds.b2 + tol
            and C + Q - E <= bounds.b3 + tol)


# -- single-letter erasure ----------------------------------------------------

@dataclass(frozen=True)
class ErasureExpressions:
    """Closed forms ``i1, i2, i3`` with their explicitly computed counterparts."""

    i1: float
    i2: float
    i3: float
    t: float
    explicit: dict
    t_rule: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def closed(self) -> tuple[float, float, float]:
        return (self.i1, self.i2, self.i3)

    @property
    def direct(self) -> tuple[float, float, float]:
        e = self.explicit
        return (e["I(UA:B)"], e["I(A>BU)"], e["I(U:B)"] + e["I(A>BU)"])

    def max_mismatch(self) -> float:
        return max(abs(x - y) for x, y in zip(self.closed, self.direct))

    def to_json(self) -> dict:
        return {"i1": self.i1, "i2": self.i2, "i3": self.i3, "t": self.t, "t_rule": self.t_rule,
                "explicit": self.explicit, **self.extra, "units": "bits"}


def erasure_single_letter(sigma0: CQEnsemble, delta, a_prime=None, cross_check: bool = True) -> ErasureExpressions:
    """Closed-form informations of ``sigma0`` through one erasure channel.

    ``a_prime`` names the single channel-input factor (default: last factor).
    """
    delta = Fraction(delta)
    a_prime = sigma0.layout.labels[-1] if a_prime is None else a_prime
    q = sigma0.layout.dim_of([a_prime])
    s_a = sigma0.entropy(a_prime)
    s_a_u = sigma0.conditional_entropy_given_u(a_prime)
    dl = float(delta)
    i1 = (1 - dl) * (s_a + s_a_u)
    i2 = (1 - 2 * dl) * s_a_u
    i3 = (1 - dl) * s_a - dl * s_a_u
    explicit = {}
    if cross_check:
        sigma0 = _pure_witness(sigma0)
        ch = build_erasure(ErasureSpec(q, delta), label_in=a_prime, label_out="B")
        a = tuple(lab for lab in sigma0.layout.labels if lab != a_prime)
        out = channel_output(sigma0, ch, (a_prime,))
        explicit = info_explicit(out, a, ("B",))
    return ErasureExpressions(i1, i2, i3, s_a_u, explicit, "t = S(A'|U)")


# -- block erasure -------------------------------------------------------------

def choose_t(prof: SubsetEntropyProfile, n: int, d: int) -> tuple[float, str]:
    """Pick the region parameter ``t`` certifying the profile's expressions."""
    if d == 1:
        return prof.s_bar[n], "d = 1: t = s_bar[n]"
    if 2 * (d - 1) <= n:
        return prof.s_bar[d - 1], "d-1 <= n/2: t = s_bar[d-1]"
    t, _ = lemma4_t(prof, n, d)
    return t, "d-1 > n/2: t from the subset-entropy balance"


def block_expressions(sigma0: CQEnsemble, n: int, d: int, a_prime=None, cross_check: bool = True) -> ErasureExpressions:
    """Closed forms through the block erasure channel erasing ``d-1`` of ``n`` sites."""
    if not 1 <= d <= n + 1:
        raise DomainError(f"need 1 <= d <= n+1, got n={n}, d={d}")
    a_prime = sigma0.layout.labels[-n:] if a_prime is None else _as_labels(a_prime)
    if len(a_prime) != n:
        raise LayoutError(f"expected {n} channel-input sites, got {a_prime}")
    prof = profile(sigma0, a_prime)
    k, w = n - d + 1, d - 1
    i1 = prof.hat_total(k) + prof.bar_total(n) - prof.bar_total(w)
    i2 = prof.bar_total(k) - prof.bar_total(w)
    i3 = prof.hat_total(k) - prof.bar_total(w)
    t, rule = choose_t(prof, n, d) if d <= n else (0.0, "d = n+1: t = 0")
    lq = prof.log_q
    region_rhs = (k * (lq + t), (n - 2 * d + 2) * t, k * lq - w * t)
    explicit = {}
    if cross_check:
        sigma0 = _pure_witness(sigma0)
        q = sigma0.layout.dim_of(a_prime[:1])
        ch = build_block_erasure(BlockErasureSpec(q, n, w))
        a = tuple(lab for lab in sigma0.layout.labels if lab not in a_prime)
        b = tuple(f"B{i + 1}" for i in range(n))
        out = channel_output(sigma0, ch, a_prime, b)
        explicit = info_explicit(out, a, b)
    extra = {"profile": prof.to_json(), "region_rhs": list(region_rhs)}
    return ErasureExpressions(i1, i2, i3, t, explicit, rule, extra)


def within_region_rhs(expr: ErasureExpressions, tol: float = TOL_NUM) -> bool:
    """The closed forms sit below the ``t``-parameterized region bounds."""
    rhs = expr.extra["region_rhs"]
    return all(x <= r + tol for x, r in zip(expr.closed, rhs))
