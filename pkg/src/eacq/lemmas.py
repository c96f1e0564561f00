"""Subset-average entropy profiles and randomized checks of the continuity
bounds, subset-averaging inequalities and the negative-weight bound on ``t``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import TOL_NUM
from .errors import DomainError, VerificationError
from .hilbert import (
    CQEnsemble,
    DensityMatrix,
    SystemLayout,
    binary_entropy,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    g_function,
    partial_trace,
    random_mixed,
    random_pure,
    trace_distance,
)

log = logging.getLogger(__name__)

MAX_PROFILE_SITES = 6


@dataclass
class InequalityReport:
    """``lhs <= rhs`` with both sides kept for diffing."""

    name: str
    lhs: float
    rhs: float
    passed: bool
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    def to_json(self) -> dict:
        out = {"lhs": self.lhs, "rhs": self.rhs, "pass": self.passed, "seed": self.seed, "name": self.name}
        if self.extra:
            out["extra"] = self.extra
        return out


def _ineq(name, lhs, rhs, tol=TOL_NUM, seed=None, **extra) -> InequalityReport:
    return InequalityReport(name, float(lhs), float(rhs), bool(lhs <= rhs + tol), seed, extra)


# -- profiles -------------------------------------------------------------------

@dataclass(frozen=True)
class SubsetEntropyProfile:
    """``s_bar[l]``: per-site average of ``E_I E_U S(phi_U on I)`` over ``|I| = l``;
    ``s_hat[l]``: the same with the U-average taken inside the entropy."""

    n: int
    s_bar: dict
    s_hat: dict
    log_q: float

    def bar_total(self, size: int) -> float:
        """``size * s_bar[size]`` (zero for the empty subset)."""
        return 0.0 if size == 0 else size * self.s_bar[size]

    def hat_total(self, size: int) -> float:
        return 0.0 if size == 0 else size * self.s_hat[size]

    def invariant_violations(self, tol: float = TOL_NUM) -> list[str]:
        bad = []
        for ell in range(1, self.n + 1):
            b, h = self.s_bar[ell], self.s_hat[ell]
            if not (-tol <= b <= h + tol and h <= self.log_q + tol):
                bad.append(f"0 <= s_bar <= s_hat <= log q fails at l={ell}: {b}, {h}")
            if ell > 1 and self.s_bar[ell] > self.s_bar[ell - 1] + tol:
                bad.append(f"s_bar increases at l={ell}")
        return bad

    def to_json(self) -> dict:
        return {"n": self.n, "log_q": self.log_q,
                "s_bar": {str(k): v for k, v in self.s_bar.items()},
                "s_hat": {str(k): v for k, v in self.s_hat.items()}}


def _site_dim(layout: SystemLayout, sites) -> int:
    dims = {layout.dim_of([s]) for s in sites}
    if len(dims) != 1:
        raise DomainError(f"sites must share one dimension, got {sorted(dims)}")
    return dims.pop()


def profile(ens: CQEnsemble | DensityMatrix, sites) -> SubsetEntropyProfile:
    """Exhaustive subset averages of entropies over the factors ``sites``.

    A bare :class:`DensityMatrix` is treated as a one-element ensemble, so
    ``s_bar`` and ``s_hat`` coincide with the plain subset averages.
    """
    if isinstance(ens, DensityMatrix):
        ens = CQEnsemble(((1.0, ens),))
    sites = tuple(sites)
    n = len(sites)
    if n > MAX_PROFILE_SITES:
        raise DomainError(f"profile enumerates all subsets; n={n} > {MAX_PROFILE_SITES}")
    if n == 0:
        raise DomainError("need at least one site")
    q = _site_dim(ens.layout, sites)
    probs = ens.probs
    s_bar, s_hat = {}, {}
    for ell in range(1, n + 1):
        subsets = list(itertools.combinations(sites, ell))
        bar = hat = 0.0
        for sub in subsets:
            marg = [partial_trace(s, sub) for s in ens.states]
            bar += sum(p * entropy(m) for p, m in zip(probs, marg) if p > 0)
            avg = sum(p * m.matrix for p, m in zip(probs, marg))
            hat += entropy(DensityMatrix(marg[0].layout, avg))
        s_bar[ell] = bar / len(subsets) / ell
        s_hat[ell] = hat / len(subsets) / ell
    return SubsetEntropyProfile(n, s_bar, s_hat, math.log2(q))


# -- subset-averaging inequalities ---------------------------------------------

@dataclass
class AveragingReport:
    plain: InequalityReport
    conditional: InequalityReport

    @property
    def passed(self) -> bool:
        return self.plain.passed and self.conditional.passed

    def to_json(self) -> dict:
        return {"plain": self.plain.to_json(), "conditional": self.conditional.to_json(), "pass": self.passed}


def _subset_average(state: DensityMatrix, sites, size: int, cond=()) -> float:
    """``E_{|I|=size} S(A_I | cond)``."""
    vals = []
    for sub in itertools.combinations(sites, size):
        if cond:
            vals.append(conditional_entropy(state, sub, cond))
        else:
            vals.append(entropy(state, sub))
    return float(np.mean(vals))


def lemma3_check(state: DensityMatrix, sites, z, m: int, mu: int, seed=None) -> AveragingReport:
    """Per-site subset-average entropy is non-increasing in the subset size,
    both plainly and conditioned on ``z``."""
    sites = tuple(sites)
    z = (z,) if isinstance(z, str) else tuple(z)
    n = len(sites)
    if not (1 <= mu <= m <= n <= 5):
        raise DomainError(f"need 1 <= mu <= m <= n <= 5, got mu={mu}, m={m}, n={n}")
    plain = _ineq("average-plain", _subset_average(state, sites, m) / m,
                  _subset_average(state, sites, mu) / mu, seed=seed, m=m, mu=mu)
    cond = _ineq("average-conditional", _subset_average(state, sites, m, z) / m,
                 _subset_average(state, sites, mu, z) / mu, seed=seed, m=m, mu=mu)
    return AveragingReport(plain, cond)


@dataclass
class TReport:
    t: float
    n: int
    d: int
    checks: list[InequalityReport]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {"t": self.t, "n": self.n, "d": self.d, "pass": self.passed,
                "checks": [c.to_json() for c in self.checks]}


def lemma4_t(source, n: int, d: int, sites=None, seed=None) -> tuple[float, TReport]:
    """``t = [(n-d+1) s_{n-d+1} - (d-1) s_{d-1}] / (n-2d+2)`` for ``d > n/2 + 1``.

    ``source`` is a profile, or a state/ensemble together with its ``sites``.
    The report checks ``0 <= t <= s_{d-1} <= log q``, the entropy bound
    ``n s_n <= (n-d+1) s_{n-d+1} + (d-1) t`` and the intermediate bound
    ``E_{|J|=n-d+1} S <= E_{|I|=d-1} S``.
    """
    if not 2 * (d - 1) > n:
        raise DomainError(f"need d > n/2 + 1, got n={n}, d={d}")
    if d > n + 1:
        raise DomainError(f"need d <= n + 1, got n={n}, d={d}")
    prof = source if isinstance(source, SubsetEntropyProfile) else profile(source, sites)
    if prof.n != n:
        raise DomainError(f"profile has n={prof.n}, expected {n}")
    big, small = n - d + 1, d - 1
    t = (prof.bar_total(big) - prof.bar_total(small)) / (n - 2 * d + 2)
    sb = prof.s_bar[small]
    checks = [
        _ineq("t>=0", 0.0, t, seed=seed),
        _ineq("t<=s_bar[d-1]", t, sb, seed=seed),
        _ineq("s_bar[d-1]<=log q", sb, prof.log_q, seed=seed),
        _ineq("entropy-bound", prof.bar_total(n), prof.bar_total(big) + small * t, seed=seed),
        _ineq("subset-step", prof.bar_total(big), prof.bar_total(small), seed=seed),
    ]
    return t, TReport(t, n, d, checks)


# -- continuity bounds -------------------------------------------------------

@dataclass
class ContinuityReport:
    epsilon_a: float
    epsilon_ab: float
    fannes: InequalityReport
    alicki_fannes: InequalityReport

    @property
    def passed(self) -> bool:
        return self.fannes.passed and self.alicki_fannes.passed

    def to_json(self) -> dict:
        return {"epsilon_a": self.epsilon_a, "epsilon_ab": self.epsilon_ab, "pass": self.passed,
                "fannes": self.fannes.to_json(), "alicki_fannes": self.alicki_fannes.to_json()}


def continuity_bounds_check(rho: DensityMatrix, sigma: DensityMatrix, a, b=(), seed=None) -> ContinuityReport:
    """Entropy continuity on ``a`` and conditional-entropy continuity on ``a|b``.

    The entropy bound uses the distance of the ``a`` marginals; the
    conditional bound uses the distance of the ``ab`` marginals.
    """
    a = (a,) if isinstance(a, str) else tuple(a)
    b = (b,) if isinstance(b, str) else tuple(b)
    log_a = math.log2(rho.layout.dim_of(a))
    eps_a = trace_distance(partial_trace(rho, a), partial_trace(sigma, a))
    eps_ab = trace_distance(partial_trace(rho, a + b), partial_trace(sigma, a + b))
    fannes = _ineq("fannes", abs(entropy(rho, a) - entropy(sigma, a)),
                   eps_a * log_a + binary_entropy(eps_a), seed=seed, epsilon=eps_a)
    if b:
        diff = abs(conditional_entropy(rho, a, b) - conditional_entropy(sigma, a, b))
    else:
        diff = abs(entropy(rho, a) - entropy(sigma, a))
    af = _ineq("alicki-fannes", diff, 2 * eps_ab * log_a + g_function(eps_ab), seed=seed, epsilon=eps_ab)
    return ContinuityReport(eps_a, eps_ab, fannes, af)


# -- randomized suites --------------------------------------------------------

SUITES = ("fannes", "af", "avg", "crazy", "ssa")


@dataclass
class SuiteSummary:
    suite: str
    trials: int
    checks: int
    failures: list[InequalityReport]
    worst_margin: float

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"suite": self.suite, "trials": self.trials, "checks": self.checks, "pass": self.passed,
                "worst_margin_bits": self.worst_margin,
                "failures": [f.to_json() for f in self.failures]}


def trial_seed(seed: int, trial: int) -> int:
    return seed * 1_000_003 + trial


def _layout(prefix: str, dims) -> SystemLayout:
    return SystemLayout(tuple((f"{prefix}{i + 1}", d) for i, d in enumerate(dims)))


def _nearby_pair(layout: SystemLayout, rng: np.random.Generator):
    rho = random_mixed(layout, rng, rank=int(rng.integers(1, layout.dim + 1)))
    tau = random_mixed(layout, rng) if rng.random() < 0.5 else random_pure(layout, rng)
    lam = float(rng.random()) ** 3  # skewed towards small perturbations
    sigma = DensityMatrix(layout, (1 - lam) * rho.matrix + lam * tau.matrix)
    return rho, sigma


def _trial_reports(suite: str, rng: np.random.Generator, seed: int, dims) -> list[InequalityReport]:
    if suite in ("fannes", "af"):
        layout = SystemLayout((("A", dims[0]), ("B", dims[1] if len(dims) > 1 else dims[0])))
        rho, sigma = _nearby_pair(layout, rng)
        rep = continuity_bounds_check(rho, sigma, "A", "B", seed=seed)
        return [rep.fannes if suite == "fannes" else rep.alicki_fannes]
    if suite == "ssa":
        ds = list(dims) + [dims[-1]] * (3 - len(dims))
        layout = SystemLayout((("A", ds[0]), ("B", ds[1]), ("C", ds[2])))
        rho = random_mixed(layout, rng, rank=int(rng.integers(1, layout.dim + 1)))
        cmi = conditional_mutual_information(rho, "A", "C", "B")
        wm = conditional_entropy(rho, "A", "B") + conditional_entropy(rho, "A", "C")
        return [_ineq("ssa", 0.0, cmi, seed=seed), _ineq("weak-monotonicity", 0.0, wm, seed=seed)]
    if suite == "avg":
        n = int(rng.integers(2, 6))
        q = dims[0]
        layout = _layout("A", [q] * n).concat(SystemLayout((("Z", 2),)))
        state = random_pure(layout, rng) if rng.random() < 0.5 else random_mixed(layout, rng, rank=int(rng.integers(1, 5)))
        sites = layout.labels[:n]
        out = []
        for mu in range(1, n + 1):
            for m in range(mu, n + 1):
                rep = lemma3_check(state, sites, "Z", m, mu, seed=seed)
                out += [rep.plain, rep.conditional]
        return out
    if suite == "crazy":
        n, d = ((4, 4), (5, 4))[int(rng.integers(0, 2))]
        layout = _layout("A", [dims[0]] * n)
        state = random_mixed(layout, rng, rank=int(rng.integers(1, 9)))
        _, rep = lemma4_t(state, n, d, sites=layout.labels, seed=seed)
        return rep.checks
    raise DomainError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")


def run_suite(suite: str, trials: int = 1000, seed: int = 0, dims=(2, 2), tol: float = TOL_NUM) -> SuiteSummary:
    """Run ``trials`` seeded random instances.

    A check failing by more than ``tol`` is recorded; one failing by more than
    ``10 * tol`` aborts with :class:`VerificationError` naming the seed.
    """
    if suite not in SUITES:
        raise DomainError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")
    dims = tuple(int(x) for x in dims)
    failures, checks, worst = [], 0, -math.inf
    for trial in range(trials):
        s = trial_seed(seed, trial)
        for rep in _trial_reports(suite, np.random.default_rng(s), s, dims):
            checks += 1
            worst = max(worst, rep.margin)
            if rep.margin > 10 * tol:
                raise VerificationError(f"{suite}: {rep.name} violated by {rep.margin:.3e} at seed {s}")
            if rep.margin > tol:
                log.warning("%s: %s fails by %.3e at seed %d", suite, rep.name, rep.margin, s)
                failures.append(rep)
    return SuiteSummary(suite, trials, checks, failures, worst)


def run_suites(names, trials: int = 1000, seed: int = 0, dims=(2, 2)) -> list[SuiteSummary]:
    if isinstance(names, str):
        names = SUITES if names == "all" else (names,)
    return [run_suite(name, trials, seed, dims) for name in names]


def summary_to_json(summaries) -> dict:
    return {"suites": [s.to_json() for s in summaries],
            "pass": all(s.passed for s in summaries), "units": "bits"}
