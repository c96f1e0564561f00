import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from eacq.config import TOL_ALG, TOL_NUM
from eacq.errors import DomainError, LayoutError, StateError
from eacq.hilbert import (
    CQEnsemble,
    DensityMatrix,
    SystemLayout,
    basis_state,
    binary_entropy,
    classically_correlated,
    conditional_entropy,
    diagonal,
    ensemble_from_json,
    ensemble_to_json,
    entropy,
    g_function,
    max_entangled,
    maximally_mixed,
    mutual_information,
    partial_trace,
    permute,
    pure,
    random_mixed,
    random_pure,
    random_unitary,
    tensor,
    trace_distance,
)

QUBIT = SystemLayout.of(("A", 2))
TWO = SystemLayout.of(("A", 2), ("B", 2))


def _log2m_entropy(mat):
    """Entropy through the matrix logarithm; only valid for full-rank states."""
    return float(-np.trace(mat @ scipy.linalg.logm(mat)).real / math.log(2))


def _trace_out_last(mat, d_keep, d_out):
    """Basis-sum oracle for tracing out the second factor."""
    out = np.zeros((d_keep, d_keep), dtype=complex)
    for j in range(d_out):
        e = np.zeros(d_out)
        e[j] = 1
        proj = np.kron(np.eye(d_keep), e[None, :])
        out += proj @ mat @ proj.T
    return out


seeds = st.integers(min_value=0, max_value=2**32 - 1)
small_dims = st.lists(st.integers(min_value=1, max_value=3), min_size=1, max_size=3)


def _layout(dims):
    return SystemLayout(tuple((f"S{i}", d) for i, d in enumerate(dims)))


class TestLayout:
    def test_duplicate_labels_rejected(self):
        with pytest.raises(LayoutError):
            SystemLayout.of(("A", 2), ("A", 3))

    def test_zero_dimension_rejected(self):
        with pytest.raises(LayoutError):
            SystemLayout.of(("A", 0))

    def test_unknown_label(self):
        with pytest.raises(LayoutError):
            TWO.index("C")

    def test_sub_keeps_layout_order(self):
        lay = SystemLayout.of(("A", 2), ("B", 3), ("C", 5))
        assert lay.sub(["C", "A"]).labels == ("A", "C")
        assert lay.dim_of(["B", "C"]) == 15


class TestTensor:
    def test_basis_product(self):
        s = tensor(basis_state(QUBIT, 0), basis_state(SystemLayout.of(("B", 2)), 1))
        assert np.allclose(s.matrix, np.diag([0, 1, 0, 0]))

    def test_maximally_mixed_product(self):
        s = tensor(maximally_mixed(QUBIT), maximally_mixed(SystemLayout.of(("B", 2))))
        assert np.allclose(s.matrix, np.eye(4) / 4)

    def test_entangled_times_basis_is_rank_one(self):
        s = tensor(max_entangled("A", "B", 2), basis_state(SystemLayout.of(("C", 2)), 0))
        assert s.dim == 8
        assert abs(np.trace(s.matrix) - 1) < TOL_ALG
        assert np.linalg.matrix_rank(s.matrix, tol=1e-9) == 1

    def test_overlapping_labels(self):
        with pytest.raises(LayoutError):
            tensor(maximally_mixed(QUBIT), maximally_mixed(QUBIT))


class TestConstruction:
    def test_non_hermitian(self):
        with pytest.raises(StateError):
            DensityMatrix(QUBIT, np.array([[0.5, 1], [0, 0.5]]))

    def test_bad_trace(self):
        with pytest.raises(StateError):
            DensityMatrix(QUBIT, np.eye(2))

    def test_shape_mismatch(self):
        with pytest.raises(LayoutError):
            DensityMatrix(TWO, np.eye(2) / 2)

    def test_negative_eigenvalue_found_lazily(self):
        s = DensityMatrix(QUBIT, np.diag([1.5, -0.5]))
        with pytest.raises(StateError):
            s.check_positive()
        with pytest.raises(StateError):
            entropy(s)


class TestPartialTrace:
    def test_marginal_of_maximal_entanglement(self):
        red = partial_trace(max_entangled("R", "X", 3), ["R"])
        assert np.allclose(red.matrix, np.eye(3) / 3)

    def test_product_marginal(self):
        rng = np.random.default_rng(1)
        rho = random_mixed(QUBIT, rng)
        tau = random_mixed(SystemLayout.of(("B", 3)), rng)
        assert np.allclose(partial_trace(tensor(rho, tau), "A").matrix, rho.matrix, atol=TOL_ALG)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, da=st.integers(1, 4), db=st.integers(1, 4))
    def test_matches_basis_sum(self, seed, da, db):
        lay = SystemLayout.of(("A", da), ("B", db))
        s = random_mixed(lay, np.random.default_rng(seed))
        assert np.allclose(partial_trace(s, "A").matrix, _trace_out_last(s.matrix, da, db), atol=TOL_ALG)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, dims=small_dims)
    def test_trace_is_preserved(self, seed, dims):
        lay = _layout(dims)
        s = random_mixed(lay, np.random.default_rng(seed))
        keep = lay.labels[::2]
        assert abs(np.trace(partial_trace(s, keep).matrix) - 1) < TOL_ALG

    def test_permute_round_trip(self):
        lay = SystemLayout.of(("A", 2), ("B", 3), ("C", 2))
        s = random_mixed(lay, np.random.default_rng(3))
        back = permute(permute(s, ["C", "A", "B"]), ["A", "B", "C"])
        assert np.allclose(back.matrix, s.matrix)


class TestEntropy:
    def test_maximally_mixed_qubit(self):
        assert entropy(maximally_mixed(QUBIT)) == pytest.approx(1.0, abs=TOL_ALG)

    def test_pure_state(self):
        assert entropy(random_pure(TWO, np.random.default_rng(0))) == pytest.approx(0.0, abs=TOL_NUM)

    def test_direct_formula(self):
        s = diagonal(SystemLayout.of(("A", 3)), [0.25, 0.25, 0.5])
        assert entropy(s) == pytest.approx(1.5, abs=TOL_ALG)

    def test_no_negative_zero(self):
        assert math.copysign(1.0, entropy(basis_state(QUBIT, 0))) == 1.0

    def test_conditional_entropy_examples(self):
        assert conditional_entropy(max_entangled("A", "B", 2), "A", "B") == pytest.approx(-1.0, abs=TOL_NUM)
        assert conditional_entropy(classically_correlated("M", "Mh", 2), "M", "Mh") == pytest.approx(0.0, abs=TOL_NUM)
        rho = diagonal(QUBIT, [0.25, 0.75])
        s = tensor(rho, random_mixed(SystemLayout.of(("B", 2)), np.random.default_rng(5)))
        assert conditional_entropy(s, "A", "B") == pytest.approx(entropy(rho), abs=TOL_NUM)

    def test_mutual_information_examples(self):
        assert mutual_information(max_entangled("A", "B", 2), "A", "B") == pytest.approx(2.0, abs=TOL_NUM)
        prod = tensor(maximally_mixed(QUBIT), maximally_mixed(SystemLayout.of(("B", 2))))
        assert mutual_information(prod, "A", "B") == pytest.approx(0.0, abs=TOL_NUM)
        for q in (2, 3, 5):
            cc = classically_correlated("M", "Mh", q)
            assert mutual_information(cc, "M", "Mh") == pytest.approx(math.log2(q), abs=TOL_NUM)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, d=st.integers(2, 6))
    def test_matches_matrix_logarithm(self, seed, d):
        s = random_mixed(SystemLayout.of(("A", d)), np.random.default_rng(seed))
        assert entropy(s) == pytest.approx(_log2m_entropy(s.matrix), abs=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, d=st.integers(2, 5))
    def test_bounds(self, seed, d):
        s = random_mixed(SystemLayout.of(("A", d)), np.random.default_rng(seed))
        assert -TOL_NUM <= entropy(s) <= math.log2(d) + TOL_NUM

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, da=st.integers(1, 3), db=st.integers(1, 3))
    def test_pure_bipartite_marginals_agree(self, seed, da, db):
        s = random_pure(SystemLayout.of(("A", da), ("B", db)), np.random.default_rng(seed))
        assert entropy(s, "A") == pytest.approx(entropy(s, "B"), abs=TOL_NUM)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, d=st.integers(2, 4))
    def test_unitary_invariance(self, seed, d):
        rng = np.random.default_rng(seed)
        s = random_mixed(SystemLayout.of(("A", d)), rng)
        u = random_unitary(d, rng)
        rotated = DensityMatrix(s.layout, u @ s.matrix @ u.conj().T)
        assert entropy(rotated) == pytest.approx(entropy(s), abs=TOL_NUM)


class TestTraceDistance:
    def test_examples(self):
        assert trace_distance(basis_state(QUBIT, 0), basis_state(QUBIT, 1)) == pytest.approx(1.0)
        s = random_mixed(QUBIT, np.random.default_rng(2))
        assert trace_distance(s, s) == pytest.approx(0.0, abs=TOL_ALG)
        assert trace_distance(maximally_mixed(QUBIT), diagonal(QUBIT, [0.75, 0.25])) == pytest.approx(0.25)

    def test_layout_mismatch(self):
        with pytest.raises(LayoutError):
            trace_distance(maximally_mixed(QUBIT), maximally_mixed(SystemLayout.of(("B", 2))))

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, d=st.integers(2, 5))
    def test_metric_properties(self, seed, d):
        rng = np.random.default_rng(seed)
        lay = SystemLayout.of(("A", d))
        a, b, c = (random_mixed(lay, rng) for _ in range(3))
        ab, ba = trace_distance(a, b), trace_distance(b, a)
        assert ab == pytest.approx(ba, abs=TOL_ALG)
        assert 0 <= ab <= 1
        assert ab <= trace_distance(a, c) + trace_distance(c, b) + TOL_ALG


class TestRandomStates:
    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, dims=small_dims)
    def test_pure_is_normalized(self, seed, dims):
        s = random_pure(_layout(dims), np.random.default_rng(seed))
        assert abs(np.trace(s.matrix) - 1) < TOL_ALG
        assert abs(s.purity() - 1) < TOL_ALG

    def test_seed_reproducible(self):
        a = random_mixed(TWO, np.random.default_rng(42))
        b = random_mixed(TWO, np.random.default_rng(42))
        assert np.array_equal(a.matrix, b.matrix)

    def test_unitary_is_unitary(self):
        u = random_unitary(4, np.random.default_rng(0))
        assert np.allclose(u @ u.conj().T, np.eye(4), atol=TOL_ALG)


class TestScalarFunctions:
    def test_binary_entropy(self):
        assert binary_entropy(0.5) == 1.0
        assert binary_entropy(0.0) == 0.0
        with pytest.raises(DomainError):
            binary_entropy(1.5)

    def test_g(self):
        assert g_function(0) == 0.0
        assert g_function(1) == pytest.approx(2.0)
        with pytest.raises(DomainError):
            g_function(-0.1)

    @given(x=st.floats(min_value=0, max_value=1))
    def test_g_dominates_binary_entropy(self, x):
        assert g_function(x) >= binary_entropy(x) - 1e-12


class TestEnsemble:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(DomainError):
            CQEnsemble(((0.5, maximally_mixed(QUBIT)),))

    def test_layouts_must_agree(self):
        with pytest.raises(LayoutError):
            CQEnsemble(((0.5, maximally_mixed(QUBIT)), (0.5, maximally_mixed(SystemLayout.of(("B", 2))))))

    def test_block_entropy_matches_materialized(self):
        rng = np.random.default_rng(9)
        ens = CQEnsemble(tuple((p, random_mixed(TWO, rng)) for p in (0.2, 0.3, 0.5)))
        dense = ens.to_density_matrix("U")
        assert ens.entropy(["A"], with_u=True) == pytest.approx(entropy(dense, ["U", "A"]), abs=TOL_NUM)
        assert ens.entropy(["A", "B"]) == pytest.approx(entropy(dense, ["A", "B"]), abs=TOL_NUM)

    def test_json_round_trip_keeps_exact_probabilities(self):
        ens = CQEnsemble(((Fraction(1, 3), basis_state(QUBIT, 0)), (Fraction(2, 3), basis_state(QUBIT, 1))))
        back = ensemble_from_json(ensemble_to_json(ens))
        assert [p for p, _ in back.items] == [Fraction(1, 3), Fraction(2, 3)]
        assert np.allclose(back.average().matrix, ens.average().matrix)


def test_pure_rejects_zero_vector():
    with pytest.raises(StateError):
        pure(np.zeros(2), QUBIT)
