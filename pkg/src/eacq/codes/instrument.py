"""Quantum instruments: Kraus families indexed by a classical outcome.

Kraus operators are kept as scipy sparse matrices; code instruments for
Reed-Solomon decoders act on spaces far larger than anything we would
store densely. Output factors whose label starts with ``~`` form an
environment that the simulator measures out and discards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..config import TOL_ALG
from ..errors import LayoutError
from ..hilbert import SystemLayout, layout_from_json, layout_to_json

ENV_PREFIX = "~"


def as_sparse(k) -> sp.coo_matrix:
    # coordinate form: memory follows the nonzeros, not the (often huge) dimension
    if sp.issparse(k):
        if k.format == "coo" and k.dtype == complex:
            return k
        return sp.coo_matrix(k, dtype=complex)
    return sp.coo_matrix(np.asarray(k, dtype=complex))


@dataclass
class Instrument:
    """``outcome -> [K_j]`` with shared input and output layouts."""

    input_layout: SystemLayout
    output_layout: SystemLayout
    branches: dict

    def __post_init__(self):
        shape = (self.output_layout.dim, self.input_layout.dim)
        branches = {}
        for outcome, ops in self.branches.items():
            ops = [as_sparse(k) for k in ops]
            for k in ops:
                if k.shape != shape:
                    raise LayoutError(f"Kraus shape {k.shape} != {shape} for outcome {outcome}")
            branches[int(outcome)] = ops
        self.branches = dict(sorted(branches.items()))

    @property
    def outcomes(self) -> list[int]:
        return list(self.branches)

    def kraus(self):
        """Yield ``(outcome, j, K)``."""
        for o, ops in self.branches.items():
            for j, k in enumerate(ops):
                yield o, j, k

    def completeness_error(self) -> float:
        """``max |sum K^dag K - I|`` over all outcomes."""
        d = self.input_layout.dim
        ops = [k for _, _, k in self.kraus()]
        if not ops:
            return 1.0
        # stack every Kraus operator and compact the occupied rows so the
        # product below never allocates per-row storage for empty rows
        dout = self.output_layout.dim
        rows = np.concatenate([i * dout + k.row.astype(np.int64) for i, k in enumerate(ops)])
        cols = np.concatenate([k.col for k in ops])
        vals = np.concatenate([k.data for k in ops])
        _, rows = np.unique(rows, return_inverse=True)
        big = sp.csc_matrix((vals, (rows, cols)), shape=(int(rows.max(initial=-1)) + 1, d))
        acc = (big.conj().T.tocsr() @ big).tocsr()
        diff = (acc - sp.identity(d, dtype=complex, format="csr")).tocoo()
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    def is_complete(self, tol: float = TOL_ALG) -> bool:
        return self.completeness_error() <= tol

    def env_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab in self.output_layout.labels if lab.startswith(ENV_PREFIX))

    def to_json(self) -> dict:
        return {"in": layout_to_json(self.input_layout), "out": layout_to_json(self.output_layout),
                "branches": {str(o): [sparse_to_json(k) for k in ops] for o, ops in self.branches.items()}}

    @classmethod
    def from_json(cls, data: dict) -> "Instrument":
        return cls(layout_from_json(data["in"]), layout_from_json(data["out"]),
                   {int(o): [sparse_from_json(k) for k in ops] for o, ops in data["branches"].items()})


def sparse_to_json(k) -> dict:
    coo = sp.coo_matrix(k)
    return {"shape": list(coo.shape), "rows": coo.row.tolist(), "cols": coo.col.tolist(),
            "re": np.round(coo.data.real, 15).tolist(), "im": np.round(coo.data.imag, 15).tolist()}


def sparse_from_json(data: dict) -> sp.coo_matrix:
    vals = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    return sp.coo_matrix((vals, (data["rows"], data["cols"])), shape=tuple(data["shape"]), dtype=complex)


# -- factor plumbing for sparse operators ------------------------------------------
#
# Everything below works on COO index arrays directly. Building explicit
# permutation matrices would cost the full dimension per operator, which is
# prohibitive for decoders acting on (q+1)^n-dimensional inputs.

def reindex(idx, layout: SystemLayout, order) -> np.ndarray:
    """Flat indices of ``layout`` rewritten as flat indices of ``layout`` reordered to ``order``."""
    idx = np.asarray(idx, dtype=np.int64)
    dims = layout.dims
    digits = {}
    rem = idx.copy()
    for lab, d in reversed(layout.parts):
        digits[lab] = rem % d
        rem //= d
    out = np.zeros_like(idx)
    for lab in order:
        out = out * dims[layout.index(lab)] + digits[lab]
    return out


def reorder_rows(k, layout: SystemLayout, order) -> sp.coo_matrix:
    """Permute the output factors of ``k`` (whose output is ``layout``) into ``order``."""
    k = as_sparse(k)
    return sp.coo_matrix((k.data, (reindex(k.row, layout, order), k.col)), shape=k.shape)


def embed(k, layout: SystemLayout, k_in, k_out: SystemLayout):
    """Lift ``k`` (acting ``k_in -> k_out``) to the whole ``layout``.

    Returns ``(matrix, new_layout)`` with ``new_layout = k_out + rest``; the
    columns keep the order of ``layout``.
    """
    k = as_sparse(k)
    k_in = tuple(k_in)
    rest = tuple(lab for lab in layout.labels if lab not in k_in)
    rest_layout = layout.sub(rest)
    rd = rest_layout.dim
    r = np.arange(rd, dtype=np.int64)
    nnz = k.nnz
    rows = (np.repeat(k.row.astype(np.int64), rd) * rd + np.tile(r, nnz))
    cols_split = np.repeat(k.col.astype(np.int64), rd) * rd + np.tile(r, nnz)
    cols = reindex(cols_split, SystemLayout(tuple(layout.parts[layout.index(lab)] for lab in k_in + rest)),
                   layout.labels)
    new_layout = k_out.concat(rest_layout)
    return sp.coo_matrix((np.repeat(k.data, rd), (rows, cols)), shape=(new_layout.dim, layout.dim)), new_layout


def apply_local(k, big, layout: SystemLayout, k_in, k_out: SystemLayout):
    """``(k (x) I_rest) @ big`` where ``big``'s output space is ``layout``.

    Only the nonzeros of ``big`` are touched. Returns ``(matrix, new_layout)``
    with ``new_layout = k_out + rest``.
    """
    k = sp.csc_matrix(as_sparse(k))
    big = as_sparse(big)
    k_in = tuple(k_in)
    rest = tuple(lab for lab in layout.labels if lab not in k_in)
    rest_layout = layout.sub(rest)
    split = reindex(big.row, layout, k_in + rest)
    rd = rest_layout.dim
    d_in, r_idx = split // rd, split % rd
    starts, ends = k.indptr[d_in], k.indptr[d_in + 1]
    counts = (ends - starts).astype(np.int64)
    src = np.repeat(np.arange(big.nnz), counts)
    pos = starts[src] + np.arange(int(counts.sum())) - np.repeat(np.cumsum(counts) - counts, counts)
    rows = k.indices[pos].astype(np.int64) * rd + r_idx[src]
    new_layout = k_out.concat(rest_layout)
    out = sp.coo_matrix((k.data[pos] * big.data[src], (rows, big.col[src])), shape=(new_layout.dim, big.shape[1]))
    out.sum_duplicates()
    return out, new_layout


def coo_matmul(a, b) -> sp.coo_matrix:
    """``a @ b`` with the inner index compacted to the entries actually used."""
    a, b = as_sparse(a), as_sparse(b)
    if a.shape[1] != b.shape[0]:
        raise LayoutError(f"cannot multiply {a.shape} by {b.shape}")
    inner, b_row = np.unique(b.row, return_inverse=True)
    pos = np.searchsorted(inner, a.col)
    ok = (pos < len(inner)) & (inner[np.minimum(pos, len(inner) - 1)] == a.col) if len(inner) else np.zeros(a.nnz, bool)
    a_rows, a_cols_c = np.unique(a.row[ok], return_inverse=True)
    b_cols, b_col_c = np.unique(b.col, return_inverse=True)
    small_a = sp.csr_matrix((a.data[ok], (a_cols_c, pos[ok])), shape=(len(a_rows), len(inner)))
    small_b = sp.csr_matrix((b.data, (b_row, b_col_c)), shape=(len(inner), len(b_cols)))
    prod = (small_a @ small_b).tocoo()
    return sp.coo_matrix((prod.data, (a_rows[prod.row], b_cols[prod.col])), shape=(a.shape[0], b.shape[1]))
