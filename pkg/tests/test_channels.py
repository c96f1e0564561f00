import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eacq.channels import (
    BlockErasureSpec,
    ErasureSpec,
    KrausChannel,
    apply,
    build_block_erasure,
    build_degrading,
    build_erasure,
    build_iid_erasure,
    channel_from_json,
    channel_to_json,
    channels_equal,
    choi,
    compose,
    depolarizing,
    embed_op,
    identity_channel,
    iid_mixture_weights,
    mix,
)
from eacq.config import TOL_ALG
from eacq.errors import DomainError, LayoutError
from eacq.hilbert import (
    DensityMatrix,
    SystemLayout,
    max_entangled,
    maximally_mixed,
    partial_trace,
    random_mixed,
    tensor,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _flag(q):
    v = np.zeros(q + 1)
    v[q] = 1
    return np.outer(v, v)


def _embed(rho, q):
    e = embed_op(q)
    return e @ rho @ e.conj().T


def _flat(ch):
    """The same channel with only its expanded Kraus list (the second route)."""
    return KrausChannel(ch.input_layout, ch.output_layout, list(ch.kraus), name="flat")


class TestErasure:
    def test_zero_delta_embeds(self):
        rho = random_mixed(SystemLayout.of(("A1", 3)), np.random.default_rng(0))
        out = apply(build_erasure(ErasureSpec(3, 0)), rho, "A1")
        assert np.allclose(out.matrix, _embed(rho.matrix, 3), atol=TOL_ALG)

    def test_full_erasure_outputs_flag(self):
        rho = random_mixed(SystemLayout.of(("A1", 2)), np.random.default_rng(1))
        out = apply(build_erasure(ErasureSpec(2, 1)), rho, "A1")
        assert np.allclose(out.matrix, _flag(2), atol=TOL_ALG)

    def test_half_erasure_of_mixed_qubit(self):
        out = apply(build_erasure(ErasureSpec(2, Fraction(1, 2))), maximally_mixed(SystemLayout.of(("A1", 2))), "A1")
        assert np.allclose(out.matrix, np.diag([0.25, 0.25, 0.5]), atol=TOL_ALG)

    def test_half_erasure_on_half_of_entangled_pair(self):
        q = 3
        phi = max_entangled("R", "A1", q)
        out = apply(build_erasure(ErasureSpec(q, Fraction(1, 2))), phi, "A1")
        big = np.kron(np.eye(q), embed_op(q))
        expected = 0.5 * big @ phi.matrix @ big.conj().T + 0.5 * np.kron(np.eye(q) / q, _flag(q))
        assert np.allclose(out.matrix, expected, atol=TOL_ALG)

    @pytest.mark.parametrize("bad", [Fraction(-1, 4), Fraction(5, 4)])
    def test_delta_out_of_range(self, bad):
        with pytest.raises(DomainError):
            ErasureSpec(2, bad)

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, q=st.integers(2, 4), num=st.integers(0, 8))
    def test_direct_formula(self, seed, q, num):
        delta = Fraction(num, 8)
        rho = random_mixed(SystemLayout.of(("A1", q)), np.random.default_rng(seed))
        out = apply(build_erasure(ErasureSpec(q, delta)), rho, "A1")
        expected = (1 - float(delta)) * _embed(rho.matrix, q) + float(delta) * _flag(q)
        assert np.allclose(out.matrix, expected, atol=TOL_ALG)


class TestBlockErasure:
    def test_no_erasure_single_use_is_embedding(self):
        ch = build_block_erasure(BlockErasureSpec(2, 1, 0))
        assert channels_equal(ch, build_erasure(ErasureSpec(2, 0)))

    def test_one_of_two_on_product(self):
        rng = np.random.default_rng(4)
        sig = random_mixed(SystemLayout.of(("A1", 2)), rng)
        tau = random_mixed(SystemLayout.of(("A2", 2)), rng)
        out = apply(build_block_erasure(BlockErasureSpec(2, 2, 1)), tensor(sig, tau), ["A1", "A2"])
        expected = 0.5 * np.kron(_embed(sig.matrix, 2), _flag(2)) + 0.5 * np.kron(_flag(2), _embed(tau.matrix, 2))
        assert np.allclose(out.matrix, expected, atol=TOL_ALG)

    def test_all_erased_is_constant(self):
        ch = build_block_erasure(BlockErasureSpec(2, 3, 3))
        lay = ch.input_layout
        out = apply(ch, random_mixed(lay, np.random.default_rng(2)), lay.labels)
        flag3 = np.kron(np.kron(_flag(2), _flag(2)), _flag(2))
        assert np.allclose(out.matrix, flag3, atol=TOL_ALG)

    def test_w_out_of_range(self):
        with pytest.raises(DomainError):
            BlockErasureSpec(2, 2, 3)

    @pytest.mark.parametrize("q,n,w", [(2, 2, 1), (3, 2, 1), (2, 3, 2)])
    def test_trace_preserving(self, q, n, w):
        assert build_block_erasure(BlockErasureSpec(q, n, w)).completeness_error() < TOL_ALG

    @settings(max_examples=15, deadline=None)
    @given(seed=seeds, w=st.integers(0, 2))
    def test_term_route_matches_flat_kraus_route(self, seed, w):
        ch = build_block_erasure(BlockErasureSpec(2, 2, w))
        lay = SystemLayout.of(("R", 2), ("A1", 2), ("A2", 2))
        rho = random_mixed(lay, np.random.default_rng(seed))
        a = apply(ch, rho, ["A1", "A2"])
        b = apply(_flat(ch), rho, ["A1", "A2"])
        assert np.allclose(a.matrix, b.matrix, atol=TOL_ALG)


class TestDegrading:
    def test_equal_levels_is_identity(self):
        d = build_degrading(2, 2, 1, 1)
        assert channels_equal(d, identity_channel(d.input_layout))

    def test_v_below_w_rejected(self):
        with pytest.raises(DomainError):
            build_degrading(2, 2, 2, 1)

    @pytest.mark.parametrize("q", [2, 3])
    @pytest.mark.parametrize("n,w,v", [(n, w, v) for n in (1, 2) for w in range(n + 1) for v in range(w, n + 1)])
    def test_degrades_block_erasure(self, q, n, w, v):
        lower = build_block_erasure(BlockErasureSpec(q, n, w))
        target = build_block_erasure(BlockErasureSpec(q, n, v))
        assert channels_equal(target, compose(build_degrading(q, n, w, v), lower))


class TestMixture:
    def test_weights_examples(self):
        assert iid_mixture_weights(2, Fraction(1, 2), 1) == Fraction(1, 2)
        assert iid_mixture_weights(3, Fraction(1, 4), 0) == Fraction(27, 64)

    @given(n=st.integers(0, 8), num=st.integers(0, 16))
    def test_weights_sum_to_one(self, n, num):
        delta = Fraction(num, 16)
        assert sum(iid_mixture_weights(n, delta, v) for v in range(n + 1)) == 1

    @pytest.mark.parametrize("n,delta", [(1, Fraction(1, 3)), (2, Fraction(1, 4)), (2, Fraction(3, 4))])
    def test_iid_is_mixture_of_blocks(self, n, delta):
        iid = build_iid_erasure(2, delta, n)
        blocks = mix([(float(iid_mixture_weights(n, delta, v)), build_block_erasure(BlockErasureSpec(2, n, v)))
                      for v in range(n + 1)])
        assert channels_equal(iid, blocks)


class TestChoi:
    def test_identity_gives_entangled_pair(self):
        c = choi(identity_channel(SystemLayout.of(("A", 2))))
        assert np.allclose(c.matrix, max_entangled("x", "y", 2).matrix, atol=TOL_ALG)

    def test_completely_depolarizing(self):
        c = choi(depolarizing(2, 1.0))
        assert np.allclose(c.matrix, np.eye(4) / 4, atol=TOL_ALG)

    def test_marginal_on_reference_is_maximally_mixed(self):
        ch = build_block_erasure(BlockErasureSpec(2, 2, 1))
        c = choi(ch)
        ref = [lab for lab in c.labels if lab.startswith("ref:")]
        assert np.allclose(partial_trace(c, ref).matrix, np.eye(4) / 4, atol=TOL_ALG)


class TestChoiRoutes:
    @pytest.mark.parametrize("ch", [
        build_block_erasure(BlockErasureSpec(2, 2, 1)),
        build_degrading(2, 2, 0, 1),
        build_iid_erasure(3, Fraction(1, 3), 2),
    ], ids=["block", "degrading", "iid"])
    def test_product_route_matches_state_route(self, ch):
        a, b = choi(ch), choi(_flat(ch))
        assert a.labels == b.labels
        assert np.allclose(a.matrix, b.matrix, atol=TOL_ALG)


class TestCombinators:
    def test_compose_dimension_mismatch(self):
        with pytest.raises(LayoutError):
            compose(build_erasure(ErasureSpec(2, 0)), build_erasure(ErasureSpec(2, 0)))

    def test_flat_compose_matches_dense_product(self):
        a, b = depolarizing(2, 0.3), depolarizing(2, 0.5, label_in="B", label_out="C")
        rho = random_mixed(SystemLayout.of(("A", 2)), np.random.default_rng(0))
        direct = apply(b, apply(a, rho, "A"), "B")
        composed = apply(compose(b, a), rho, "A", ["C"])
        assert np.allclose(direct.matrix, composed.matrix, atol=TOL_ALG)

    def test_kraus_shape_checked(self):
        with pytest.raises(LayoutError):
            KrausChannel(SystemLayout.of(("A", 2)), SystemLayout.of(("B", 2)), [np.eye(3)])

    def test_apply_dimension_mismatch(self):
        rho = maximally_mixed(SystemLayout.of(("A1", 3)))
        with pytest.raises(LayoutError):
            apply(build_erasure(ErasureSpec(2, 0)), rho, "A1")

    def test_json_round_trip(self):
        ch = build_erasure(ErasureSpec(2, Fraction(1, 3)))
        assert channels_equal(ch, channel_from_json(channel_to_json(ch)))


@pytest.mark.parametrize("q,n", list(itertools.product((2, 3), (1, 2))))
def test_iid_erasure_completeness(q, n):
    assert build_iid_erasure(q, Fraction(1, 3), n).completeness_error() < TOL_ALG


def test_apply_keeps_untouched_factors_in_place():
    lay = SystemLayout.of(("R", 2), ("A1", 2), ("S", 3))
    rho = random_mixed(lay, np.random.default_rng(8))
    out = apply(build_erasure(ErasureSpec(2, Fraction(1, 2))), rho, "A1")
    assert out.labels == ("R", "B1", "S")
    assert isinstance(out, DensityMatrix)
