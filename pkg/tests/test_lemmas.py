import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eacq.config import TOL_NUM
from eacq.errors import DomainError
from eacq.hilbert import (
    CQEnsemble,
    SystemLayout,
    basis_state,
    entropy,
    maximally_mixed,
    partial_trace,
    random_mixed,
    random_pure,
    tensor_all,
)
from eacq.lemmas import (
    SUITES,
    continuity_bounds_check,
    lemma3_check,
    lemma4_t,
    profile,
    run_suite,
    run_suites,
    summary_to_json,
    trial_seed,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _sites(n, q=2, prefix="A"):
    return SystemLayout(tuple((f"{prefix}{i + 1}", q) for i in range(n)))


def _product_pure(n, q=2):
    return tensor_all(basis_state(SystemLayout.of((f"A{i + 1}", q)), i % q) for i in range(n))


def _profile_oracle(ens, sites):
    """Plain loops over subsets; no shared helpers with the implementation."""
    n = len(sites)
    bar, hat = {}, {}
    for ell in range(1, n + 1):
        b = h = 0.0
        subs = list(itertools.combinations(sites, ell))
        for sub in subs:
            margs = [partial_trace(s, sub).matrix for s in ens.states]
            b += sum(p * entropy(partial_trace(s, sub)) for p, s in zip(ens.probs, ens.states))
            avg = sum(p * m for p, m in zip(ens.probs, margs))
            lam = np.clip(np.linalg.eigvalsh(avg), 1e-300, None)
            h += float(-np.sum(lam * np.log2(lam)))
        bar[ell], hat[ell] = b / len(subs) / ell, h / len(subs) / ell
    return bar, hat


class TestProfile:
    def test_pure_product_is_zero(self):
        prof = profile(_product_pure(3), ("A1", "A2", "A3"))
        assert all(abs(v) < TOL_NUM for v in prof.s_bar.values())

    @pytest.mark.parametrize("q", [2, 3])
    def test_maximally_mixed_is_log_q(self, q):
        lay = _sites(3, q)
        prof = profile(maximally_mixed(lay), lay.labels)
        for ell in range(1, 4):
            assert prof.s_bar[ell] == pytest.approx(math.log2(q), abs=TOL_NUM)
            assert prof.s_hat[ell] == pytest.approx(math.log2(q), abs=TOL_NUM)

    def test_random_four_qubit_decreases(self):
        lay = _sites(4)
        rng = np.random.default_rng(11)
        ens = CQEnsemble(((0.5, random_mixed(lay, rng)), (0.5, random_mixed(lay, rng))))
        prof = profile(ens, lay.labels)
        assert prof.s_bar[4] <= prof.s_bar[2] + TOL_NUM

    def test_matches_subset_loop_oracle(self):
        lay = _sites(3)
        rng = np.random.default_rng(3)
        ens = CQEnsemble(tuple((p, random_pure(lay, rng)) for p in (0.25, 0.75)))
        prof = profile(ens, lay.labels)
        bar, hat = _profile_oracle(ens, lay.labels)
        for ell in range(1, 4):
            assert prof.s_bar[ell] == pytest.approx(bar[ell], abs=1e-9)
            assert prof.s_hat[ell] == pytest.approx(hat[ell], abs=1e-9)

    def test_too_many_sites(self):
        with pytest.raises(DomainError):
            profile(maximally_mixed(_sites(7)), _sites(7).labels)

    def test_mixed_dimensions_rejected(self):
        lay = SystemLayout.of(("A1", 2), ("A2", 3))
        with pytest.raises(DomainError):
            profile(maximally_mixed(lay), lay.labels)

    @settings(max_examples=25, deadline=None)
    @given(seed=seeds, n=st.integers(1, 4), k=st.integers(1, 3))
    def test_invariants_hold(self, seed, n, k):
        lay = _sites(n)
        rng = np.random.default_rng(seed)
        w = rng.random(k)
        w /= w.sum()
        ens = CQEnsemble(tuple((float(p), random_mixed(lay, rng)) for p in w))
        assert profile(ens, lay.labels).invariant_violations() == []


class TestAveraging:
    def test_product_state_is_tight(self):
        state = tensor_all([maximally_mixed(_sites(3)), basis_state(SystemLayout.of(("Z", 2)), 0)])
        rep = lemma3_check(state, ("A1", "A2", "A3"), "Z", 3, 1)
        assert rep.passed
        assert rep.plain.lhs == pytest.approx(rep.plain.rhs, abs=TOL_NUM)

    def test_maximally_mixed(self):
        lay = _sites(4).concat(SystemLayout.of(("Z", 2)))
        rep = lemma3_check(maximally_mixed(lay), lay.labels[:4], "Z", 4, 2)
        assert rep.passed
        assert rep.plain.lhs == pytest.approx(1.0, abs=TOL_NUM)

    def test_bad_sizes(self):
        lay = _sites(3).concat(SystemLayout.of(("Z", 2)))
        with pytest.raises(DomainError):
            lemma3_check(maximally_mixed(lay), lay.labels[:3], "Z", 1, 2)

    @settings(max_examples=20, deadline=None)
    @given(seed=seeds)
    def test_random_pure_four_qubits(self, seed):
        lay = _sites(4).concat(SystemLayout.of(("Z", 2)))
        state = random_pure(lay, np.random.default_rng(seed))
        for mu in range(1, 5):
            for m in range(mu, 5):
                assert lemma3_check(state, lay.labels[:4], "Z", m, mu).passed


class TestNegativeWeightT:
    @pytest.mark.parametrize("n,d", [(4, 4), (5, 4), (3, 3)])
    def test_maximally_mixed_gives_log_q(self, n, d):
        lay = _sites(n)
        t, rep = lemma4_t(maximally_mixed(lay), n, d, sites=lay.labels)
        assert t == pytest.approx(1.0, abs=TOL_NUM)
        assert rep.passed

    def test_pure_product_gives_zero(self):
        t, rep = lemma4_t(_product_pure(4), 4, 4, sites=_sites(4).labels)
        assert t == pytest.approx(0.0, abs=TOL_NUM)
        assert rep.passed

    def test_needs_large_distance(self):
        with pytest.raises(DomainError):
            lemma4_t(maximally_mixed(_sites(4)), 4, 2, sites=_sites(4).labels)

    @settings(max_examples=20, deadline=None)
    @given(seed=seeds, nd=st.sampled_from([(4, 4), (5, 4)]))
    def test_random_mixed(self, seed, nd):
        n, d = nd
        lay = _sites(n)
        rng = np.random.default_rng(seed)
        _, rep = lemma4_t(random_mixed(lay, rng, rank=int(rng.integers(1, 9))), n, d, sites=lay.labels)
        assert rep.passed, [c.to_json() for c in rep.checks if not c.passed]


class TestContinuity:
    def test_identical_states(self):
        lay = SystemLayout.of(("A", 2), ("B", 2))
        rho = random_mixed(lay, np.random.default_rng(0))
        rep = continuity_bounds_check(rho, rho, "A", "B")
        assert rep.passed
        assert rep.fannes.lhs == pytest.approx(0.0, abs=TOL_NUM)
        assert rep.alicki_fannes.rhs == pytest.approx(0.0, abs=TOL_NUM)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, lam=st.floats(0, 1))
    def test_nearby_pairs(self, seed, lam):
        lay = SystemLayout.of(("A", 2), ("B", 3))
        rng = np.random.default_rng(seed)
        rho, tau = random_mixed(lay, rng), random_mixed(lay, rng)
        sigma = type(rho)(lay, (1 - lam) * rho.matrix + lam * tau.matrix)
        assert continuity_bounds_check(rho, sigma, "A", "B").passed


class TestSuites:
    @pytest.mark.parametrize("suite", SUITES)
    def test_each_suite_passes(self, suite):
        summary = run_suite(suite, trials=40, seed=7)
        assert summary.passed
        assert summary.checks >= 40

    def test_unknown_suite(self):
        with pytest.raises(DomainError):
            run_suite("nope", trials=1)

    def test_seeded_runs_are_reproducible(self):
        a = summary_to_json(run_suites("all", trials=10, seed=3))
        b = summary_to_json(run_suites("all", trials=10, seed=3))
        assert a == b
        assert a["pass"] and a["units"] == "bits"

    def test_trial_seeds_are_distinct(self):
        assert len({trial_seed(s, t) for s in range(5) for t in range(1000)}) == 5000
