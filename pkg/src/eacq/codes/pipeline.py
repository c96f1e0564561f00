"""Exact simulation of an EACQ code through a channel.

The joint state is carried as an incoherent mixture of unnormalized pure
vectors ("branches"), each tagged with its classical values ``m``, ``v``
and ``mhat``. All branches are stored together as sparse entries
``(branch, flat index, amplitude)`` so every Kraus step is a vectorized
column gather from a stacked sparse matrix. Distinct Kraus operators open
distinct branches; environment factors (labels starting with ``~``) are
measured out and folded into the branch identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from ..channels import KrausChannel, BlockErasureSpec, build_block_erasure
from ..config import TOL_ALG, check_dim, max_dim
from ..converse import bounds_from_info, info_from_entropies
from ..errors import DomainError, LayoutError
from ..hilbert import (
    CQEnsemble,
    DensityMatrix,
    SystemLayout,
    max_entangled_vector,
    permute,
    trace_distance,
)
from .code import R, T_AP, T_B, T_BP, W, X, XHAT, EACQCode, ideal_output
from .instrument import ENV_PREFIX, Instrument

PRUNE = 1e-14
SNAPSHOT_LIMIT = 2048


def max_entries() -> int:
    return 16 * max_dim()


def _strides(dims) -> np.ndarray:
    out = np.ones(len(dims), dtype=np.int64)
    for i in range(len(dims) - 2, -1, -1):
        out[i] = out[i + 1] * dims[i + 1]
    return out


@dataclass
class BranchState:
    """Sparse mixture of tagged pure vectors on ``layout``."""

    layout: SystemLayout
    branch: np.ndarray
    index: np.ndarray
    amp: np.ndarray
    tags: dict  # tag name -> int array indexed by branch id

    @property
    def n_branches(self) -> int:
        return len(next(iter(self.tags.values())))

    def digits(self, labels) -> np.ndarray:
        """Flat sub-index of ``labels`` (in the given order) for every entry."""
        dims = self.layout.dims
        strides = _strides(dims)
        out = np.zeros(len(self.index), dtype=np.int64)
        for lab in labels:
            i = self.layout.index(lab)
            out = out * dims[i] + (self.index // strides[i]) % dims[i]
        return out

    def weights(self) -> np.ndarray:
        """Squared norm of every branch."""
        return np.bincount(self.branch, weights=np.abs(self.amp) ** 2, minlength=self.n_branches)

    def reorder(self, order) -> "BranchState":
        order = tuple(order)
        if order == self.layout.labels:
            return self
        new_layout = SystemLayout(tuple(self.layout.parts[self.layout.index(lab)] for lab in order))
        return BranchState(new_layout, self.branch, self.digits(order), self.amp, self.tags)


def _relabel_branches(parent: np.ndarray, child: np.ndarray, n_child: int, tags: dict, new_tag=None):
    """Compress ``(parent, child)`` pairs to fresh branch ids and carry tags along."""
    key = parent * n_child + child
    uniq, inv = np.unique(key, return_inverse=True)
    up = uniq // n_child
    new_tags = {name: arr[up] for name, arr in tags.items()}
    if new_tag is not None:
        name, values = new_tag
        new_tags[name] = values[uniq % n_child]
    return inv.astype(np.int64), new_tags


def _merge(state: BranchState) -> BranchState:
    """Sum duplicate ``(branch, index)`` entries and drop negligible ones."""
    d = state.layout.dim
    key = state.branch * d + state.index
    uniq, inv = np.unique(key, return_inverse=True)
    amp = np.zeros(len(uniq), dtype=complex)
    np.add.at(amp, inv, state.amp)
    keep = np.abs(amp) > PRUNE
    uniq, amp = uniq[keep], amp[keep]
    branch, index = uniq // d, uniq % d
    # drop branches that vanished and renumber the survivors
    alive, branch = np.unique(branch, return_inverse=True)
    tags = {name: arr[alive] for name, arr in state.tags.items()}
    if len(amp) > max_entries():
        raise DomainError(f"simulation tracks {len(amp)} amplitudes, above the limit {max_entries()} "
                          "(set EACQ_MAX_DIM to raise it)")
    return BranchState(state.layout, branch.astype(np.int64), index.astype(np.int64), amp, tags)


def _fold_env(state: BranchState) -> BranchState:
    env = [lab for lab in state.layout.labels if lab.startswith(ENV_PREFIX)]
    if not env:
        return state
    keep = [lab for lab in state.layout.labels if lab not in env]
    env_idx = state.digits(env)
    env_dim = state.layout.dim_of(env)
    rest = state.reorder(keep)
    branch, tags = _relabel_branches(state.branch, env_idx, env_dim, state.tags)
    return BranchState(rest.layout, branch, rest.index, state.amp, tags)


@dataclass
class StackedFamily:
    """Kraus operators of a controlled instrument family in one sparse matrix.

    Column ``c * din + in`` and row ``g * dout + out`` hold ``<out|K_g^(c)|in>``,
    where ``g`` enumerates the ``(outcome, j)`` pairs seen in the family.
    """

    matrix: sp.csc_matrix
    din: int
    dout: int
    outcome_of: np.ndarray
    input_layout: SystemLayout
    output_layout: SystemLayout

    @classmethod
    def build(cls, family) -> "StackedFamily":
        family = list(family)
        lin, lout = family[0].input_layout, family[0].output_layout
        keys = sorted({(o, j) for ins in family for o, j, _ in ins.kraus()})
        gid = {key: g for g, key in enumerate(keys)}
        din, dout = lin.dim, lout.dim
        rows, cols, vals = [], [], []
        for c, ins in enumerate(family):
            if ins.input_layout != lin or ins.output_layout != lout:
                raise LayoutError("instrument family must share layouts")
            for o, j, k in ins.kraus():
                coo = k.tocoo()
                rows.append(gid[(o, j)] * dout + coo.row.astype(np.int64))
                cols.append(c * din + coo.col.astype(np.int64))
                vals.append(coo.data)
        shape = (max(1, len(keys)) * dout, len(family) * din)
        mat = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=shape, dtype=complex)
        return cls(mat, din, dout, np.array([o for o, _ in keys], dtype=np.int64), lin, lout)


def apply_family(state: BranchState, fam: StackedFamily, control: str | None, outcome_tag: str | None,
                 scale: float = 1.0) -> BranchState:
    """Apply instrument ``family[tags[control]]`` to every branch."""
    k_in = fam.input_layout.labels
    rest = tuple(lab for lab in state.layout.labels if lab not in k_in)
    in_idx = state.digits(k_in)
    rest_layout = SystemLayout(tuple(state.layout.parts[state.layout.index(lab)] for lab in rest))
    rest_idx = state.digits(rest)
    ctrl = np.zeros(len(state.amp), dtype=np.int64) if control is None else state.tags[control][state.branch]
    col = ctrl * fam.din + in_idx
    mat = fam.matrix
    starts, ends = mat.indptr[col], mat.indptr[col + 1]
    counts = (ends - starts).astype(np.int64)
    total = int(counts.sum())
    src = np.repeat(np.arange(len(col)), counts)
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    pos = starts[src] + offs
    rows = mat.indices[pos].astype(np.int64)
    vals = mat.data[pos] * state.amp[src] * scale
    g, out_idx = rows // fam.dout, rows % fam.dout
    n_g = max(1, len(fam.outcome_of))
    new_tag = (outcome_tag, fam.outcome_of) if outcome_tag else None
    branch, tags = _relabel_branches(state.branch[src], g, n_g, state.tags, new_tag)
    new_layout = fam.output_layout.concat(rest_layout)
    new = BranchState(new_layout, branch, out_idx * rest_layout.dim + rest_idx[src], vals, tags)
    return _merge(_fold_env(new))


def apply_channel(state: BranchState, ch: KrausChannel, out_labels=None) -> BranchState:
    """Apply ``ch`` on its input labels, term by term when it has product structure."""
    out_labels = ch.output_layout.labels if out_labels is None else tuple(out_labels)
    if len(ch.input_layout) == 0:
        return state
    if ch.terms is None:
        ins = Instrument(ch.input_layout, SystemLayout(tuple(zip(out_labels, ch.output_layout.dims))),
                         {0: list(ch.kraus)})
        return apply_family(state, StackedFamily.build([ins]), None, None)
    pieces = []
    for t, (coef, fams) in enumerate(ch.terms):
        if coef == 0:
            continue
        # open a branch per term, then apply the local families one factor at a time
        branch, tags = _relabel_branches(state.branch, np.zeros_like(state.branch) + t, len(ch.terms), state.tags)
        cur = BranchState(state.layout, branch, state.index, state.amp * math.sqrt(coef), tags)
        for (lab_in, din), lab_out, dout, fam in zip(ch.input_layout, out_labels, ch.output_layout.dims, fams):
            ins = Instrument(SystemLayout(((lab_in, din),)), SystemLayout(((lab_out, dout),)), {0: list(fam)})
            cur = apply_family(cur, StackedFamily.build([ins]), None, None)
        pieces.append(cur)
    return _concat(pieces)


def _concat(pieces: list[BranchState]) -> BranchState:
    order = pieces[0].layout.labels
    pieces = [p.reorder(order) for p in pieces]
    offset, branches = 0, []
    for p in pieces:
        branches.append(p.branch + offset)
        offset += p.n_branches
    tags = {name: np.concatenate([p.tags[name] for p in pieces]) for name in pieces[0].tags}
    return BranchState(pieces[0].layout, np.concatenate(branches),
                       np.concatenate([p.index for p in pieces]), np.concatenate([p.amp for p in pieces]), tags)


# -- dense snapshots -----------------------------------------------------------------

def snapshot(state: BranchState, tags, order=None, limit: int = SNAPSHOT_LIMIT):
    """Dense ``sum_b |tags_b><tags_b| (x) |psi_b><psi_b|`` or None when too large.

    ``tags`` lists ``(factor label, tag name, dim)`` for the classical factors.
    """
    tag_dims = [d for _, _, d in tags]
    st = state if order is None else state.reorder(order)
    qdim = st.layout.dim
    tdim = int(np.prod(tag_dims, dtype=np.int64)) if tag_dims else 1
    total = tdim * qdim
    if total > limit:
        return None
    check_dim(total, "snapshot")
    tidx = np.zeros(st.n_branches, dtype=np.int64)
    for _, name, d in tags:
        tidx = tidx * d + st.tags[name]
    cols = tidx[st.branch] * qdim + st.index
    psi = sp.csr_matrix((st.amp, (st.branch, cols)), shape=(st.n_branches, total)).toarray()
    rho = psi.T @ psi.conj()
    layout = SystemLayout(tuple((lab, d) for lab, _, d in tags)).concat(st.layout)
    return DensityMatrix(layout, rho)


# -- the pipeline ----------------------------------------------------------------------

@dataclass
class PipelineResult:
    epsilon: float
    p_v_given_m: np.ndarray
    error_probability: float
    Gamma: DensityMatrix | None = None
    Omega: DensityMatrix | None = None
    OmegaBar: DensityMatrix | None = None
    GammaBar: DensityMatrix | None = None
    stats: dict = field(default_factory=dict)

    def to_json(self, code: EACQCode | None = None) -> dict:
        out = {"epsilon": self.epsilon, "error_probability": self.error_probability,
               "p_v_given_m_row_sums_max_dev": float(np.max(np.abs(self.p_v_given_m.sum(axis=1) - 1))),
               "stats": self.stats}
        if code is not None:
            rates = code.rates(self.epsilon)
            out["rates_bits"] = rates.to_json()
            out["triple_logq"] = code.triple().to_json()
            out["tag"] = code.tag()
            out["name"] = code.name
        return out


def initial_state(code: EACQCode) -> BranchState:
    """``Gamma``: uniform message tag, ``Phi^{RX}`` and ``phi_i``."""
    dx = code.dims[X]
    vec = np.kron(max_entangled_vector(dx), code.phi_i.top_vector())
    layout = SystemLayout(((R, dx), (X, dx))).concat(code.phi_i.layout)
    nz = np.flatnonzero(np.abs(vec) > PRUNE)
    M = code.M_size
    branch = np.repeat(np.arange(M, dtype=np.int64), len(nz))
    index = np.tile(nz, M).astype(np.int64)
    amp = np.tile(vec[nz], M) / math.sqrt(M)
    tags = {"m": np.arange(M, dtype=np.int64), "v": np.full(M, -1, dtype=np.int64),
            "mhat": np.full(M, -1, dtype=np.int64)}
    return BranchState(layout, branch, index, amp, tags)


def encode(code: EACQCode, state: BranchState) -> BranchState:
    return apply_family(state, StackedFamily.build(code.encoder), "m", "v")


def decode(code: EACQCode, state: BranchState) -> BranchState:
    return apply_family(state, StackedFamily.build(code.decoder), "v", "mhat")


def _block_epsilon(code: EACQCode, final: BranchState) -> tuple[float, float]:
    """``1/2 || GammaBar - ideal ||_1`` block by block over ``(m, mhat)``."""
    M = code.M_size
    order = (R, XHAT, T_AP, T_BP)
    st = final.reorder(order)
    qdim = st.layout.dim
    dx = code.dims[X]
    ideal_vec = np.kron(max_entangled_vector(dx), code.phi_f.top_vector())
    m_of, mh_of = st.tags["m"][st.branch], st.tags["mhat"][st.branch]
    weight = np.abs(st.amp) ** 2
    err_prob = float(weight[m_of != mh_of].sum())
    eps = 0.5 * err_prob
    diag = m_of == mh_of
    if qdim == 1:
        per_m = np.bincount(m_of[diag], weights=weight[diag], minlength=M)
        ideal = abs(ideal_vec[0]) ** 2 / M
        return eps + 0.5 * float(np.abs(per_m - ideal).sum()), err_prob
    # group diagonal entries by message, then by branch
    sel = np.flatnonzero(diag)
    seen = np.zeros(M, dtype=bool)
    order_m = sel[np.argsort(m_of[sel], kind="stable")]
    cuts = np.flatnonzero(np.diff(m_of[order_m])) + 1
    ideal = np.outer(ideal_vec, ideal_vec.conj()) / M
    for group in np.split(order_m, cuts) if len(order_m) else []:
        m = int(m_of[group[0]])
        seen[m] = True
        br, inv = np.unique(st.branch[group], return_inverse=True)
        psi = np.zeros((len(br), qdim), dtype=complex)
        np.add.at(psi, (inv, st.index[group]), st.amp[group])
        tau = psi.T @ psi.conj()
        eps += 0.5 * float(np.abs(np.linalg.eigvalsh(tau - ideal)).sum())
    eps += 0.5 * float(np.count_nonzero(~seen)) / M * float(np.vdot(ideal_vec, ideal_vec).real)
    return eps, err_prob


def simulate(code: EACQCode, channel: KrausChannel, snapshots: bool = True) -> PipelineResult:
    """Run ``Gamma -> Omega -> OmegaBar -> GammaBar`` and measure the error."""
    if channel.input_layout != code.a_layout():
        raise LayoutError(f"channel input {channel.input_layout.labels} does not match the code's A registers")
    if channel.output_layout.dims != code.b_layout().dims:
        raise LayoutError("channel output does not match the decoder's B registers")
    gamma = initial_state(code)
    omega = encode(code, gamma)
    M, V = code.M_size, code.V_size
    w = omega.weights()
    p = np.zeros((M, V))
    np.add.at(p, (omega.tags["m"], omega.tags["v"]), w)
    p *= M
    omega_bar = apply_channel(omega, channel, code.b_layout().labels)
    gamma_bar = decode(code, omega_bar)
    eps, err = _block_epsilon(code, gamma_bar)
    res = PipelineResult(min(1.0, max(0.0, eps)), p, err,
                         stats={"branches": int(gamma_bar.n_branches), "entries": int(len(gamma_bar.amp))})
    if snapshots:
        mv = [("M", "m", M), ("V", "v", V)]
        res.Gamma = snapshot(gamma, mv[:1])
        res.Omega = snapshot(omega, mv)
        res.OmegaBar = snapshot(omega_bar, mv)
        res.GammaBar = snapshot(gamma_bar, [("M", "m", M), ("Mhat", "mhat", M)], order=(R, XHAT, T_AP, T_BP))
    return res


def dense_epsilon(code: EACQCode, result: PipelineResult) -> float | None:
    """Second route to the error: trace distance of the dense snapshot to the ideal."""
    if result.GammaBar is None:
        return None
    ideal = ideal_output(code)
    gb = permute(result.GammaBar, ideal.layout.labels)
    return trace_distance(gb, ideal)


def verify_min_distance(code: EACQCode, d: int, tol: float = TOL_ALG) -> bool:
    """Zero error through the block erasure channel erasing ``d-1`` sites."""
    if not 1 <= d <= code.n + 1:
        raise DomainError(f"need 1 <= d <= n+1, got d={d}, n={code.n}")
    ch = build_block_erasure(BlockErasureSpec(code.q, code.n, d - 1))
    return simulate(code, ch, snapshots=False).epsilon <= tol


# -- witness ensembles ------------------------------------------------------------------
#
# The converse is evaluated on the encoded ensemble with U = (m, v). Each
# phi_u is purified on Alice's side by a path register P that records which
# encoder Kraus operator fired.

PATH = "P"
GRAM_LIMIT = 4096


def _witness_branches(code: EACQCode):
    """One pure branch per ``u = (m, v)`` on ``P, R, T_A', W, T_B, A^n``; tag ``u``."""
    omega = encode(code, initial_state(code))
    a_side = (R, T_AP, W, T_B)
    a_prime = code.a_layout().labels
    st = omega.reorder(a_side + a_prime)
    u_of = st.tags["m"] * code.V_size + st.tags["v"]
    uniq, u_id = np.unique(u_of, return_inverse=True)
    order = np.argsort(u_id, kind="stable")
    starts = np.searchsorted(u_id[order], np.arange(len(uniq)))
    path = np.empty(len(u_of), dtype=np.int64)
    path[order] = np.arange(len(u_of)) - starts[u_id[order]]
    paths = int(path.max()) + 1
    layout = SystemLayout(((PATH, paths),)).concat(st.layout)
    out = BranchState(layout, u_id[st.branch], path[st.branch] * st.layout.dim + st.index, st.amp,
                      {"u": uniq.astype(np.int64)})
    return _merge(out), (PATH,) + a_side, a_prime


def witness_ensemble(code: EACQCode) -> tuple[CQEnsemble, tuple[str, ...]]:
    """Dense encoded ensemble ``{p(u), phi_u}``; returns it with the ``A^n`` labels."""
    st, _, a_prime = _witness_branches(code)
    check_dim(st.layout.dim, "witness state")
    w = st.weights()
    items = []
    for b in range(st.n_branches):
        sel = st.branch == b
        vec = np.zeros(st.layout.dim, dtype=complex)
        vec[st.index[sel]] = st.amp[sel] / math.sqrt(w[b])
        items.append((w[b] / w.sum(), DensityMatrix(st.layout, np.outer(vec, vec.conj()))))
    return CQEnsemble(tuple(items)), a_prime


def _entropy_terms(lam: np.ndarray) -> float:
    lam = lam[lam > 1e-15]
    return float(-np.sum(lam * np.log2(lam)))


def _column_entropy(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray) -> float:
    """``S(M M^dag)`` for the sparse matrix ``M`` given by triplets (unit trace assumed).

    ``M M^dag`` is block diagonal over the connected components of the
    bipartite row/column pattern of ``M``, so each block is diagonalized on
    its own; single-row blocks are just squared row norms.
    """
    r_u, r = np.unique(rows, return_inverse=True)
    c_u, c = np.unique(cols, return_inverse=True)
    nr, nc = len(r_u), len(c_u)
    m = sp.csr_matrix((vals, (r, c)), shape=(nr, nc))
    adj = sp.csr_matrix((np.ones(len(r)), (r, nr + c)), shape=(nr + nc, nr + nc))
    n_comp, label = csgraph.connected_components(adj, directed=False)
    row_comp = label[:nr]
    counts = np.bincount(row_comp, minlength=n_comp)
    norms = np.asarray(m.multiply(m.conj()).sum(axis=1)).ravel().real
    total = _entropy_terms(norms[counts[row_comp] == 1])
    col_comp = label[nr:]
    for comp in np.flatnonzero(counts > 1):
        ri = np.flatnonzero(row_comp == comp)
        ci = np.flatnonzero(col_comp == comp)
        block = m[ri][:, ci]
        if min(block.shape) > GRAM_LIMIT:
            raise DomainError(f"reduced state has a block of rank up to {min(block.shape)}, above {GRAM_LIMIT}")
        gram = (block @ block.conj().T) if block.shape[0] <= block.shape[1] else (block.conj().T @ block)
        total += _entropy_terms(np.linalg.eigvalsh(gram.toarray()))
    return total


def _group_entropies(st: BranchState, keep, tag: str | None):
    """Entropy of the reduced state on ``keep`` per value of ``tag`` (or of the whole mixture)."""
    rest = tuple(lab for lab in st.layout.labels if lab not in keep)
    k_idx, r_idx = st.digits(keep), st.digits(rest)
    r_dim = st.layout.dim_of(rest)
    cols = st.branch * r_dim + r_idx
    if tag is None:
        w = float(np.sum(np.abs(st.amp) ** 2))
        return _column_entropy(k_idx, cols, st.amp / math.sqrt(w))
    group = st.tags[tag][st.branch]
    w = np.bincount(group, weights=np.abs(st.amp) ** 2)
    out = np.zeros(len(w))
    order = np.argsort(group, kind="stable")
    cuts = np.searchsorted(group[order], np.arange(len(w) + 1))
    for g in range(len(w)):
        sel = order[cuts[g]:cuts[g + 1]]
        if len(sel):
            out[g] = _column_entropy(k_idx[sel], cols[sel], st.amp[sel] / math.sqrt(w[g]))
    return out


def witness_information(code: EACQCode, channel: KrausChannel) -> dict:
    """``I(UA:B)``, ``I(A>BU)``, ``I(U:B)`` of the encoded ensemble, from sparse branches.

    Every entropy comes from the Gram matrix of the branch vectors, so the
    cost follows the number of branches rather than the Hilbert dimension.
    """
    st, a, a_prime = _witness_branches(code)
    if channel.input_layout.labels != a_prime:
        raise LayoutError("channel input does not match the code's A registers")
    b = code.b_layout().labels
    p = st.weights()
    per_a = _group_entropies(st, a, "u")
    out = apply_channel(st, channel, b)
    per_b = _group_entropies(out, b, "u")
    per_ab = _group_entropies(out, a + b, "u")
    s_b = _group_entropies(out, b, None)
    return info_from_entropies(p / p.sum(), per_a, per_b, per_ab, s_b)


def code_bounds(code: EACQCode, channel: KrausChannel | None = None, epsilon: float = 0.0):
    """Converse bounds on the code's own ensemble (default channel: ``d - 1`` block erasures)."""
    if channel is None:
        if not code.params:
            raise DomainError("code has no minimum distance; pass a channel")
        channel = build_block_erasure(BlockErasureSpec(code.q, code.n, code.params["d"] - 1))
    rates = code.rates(epsilon)
    return bounds_from_info(witness_information(code, channel), rates), rates
