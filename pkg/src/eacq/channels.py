"""Erasure, block-erasure and degrading channels in Kraus form.

A channel may additionally carry ``terms``: a list of ``(coef, families)``
where ``families[i]`` is a Kraus family acting on input factor ``i`` alone.
The channel is then ``sum_terms coef * (x)_i F_i`` -- exactly the shape of
erasure-pattern mixtures. Appliers use the terms factor by factor; the flat
Kraus list is expanded only on demand (and under the dimension guard).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .config import TOL_ALG, check_dim
from .errors import DomainError, LayoutError
from .hilbert import (
    DensityMatrix,
    SystemLayout,
    _as_labels,
    layout_from_json,
    layout_to_json,
    max_entangled_vector,
    permute,
    _matrix_from_json,
    _matrix_to_json,
)

Family = tuple  # tuple of np.ndarray, one local Kraus family


class KrausChannel:
    """CPTP map ``input_layout -> output_layout``."""

    def __init__(self, input_layout: SystemLayout, output_layout: SystemLayout,
                 kraus: Sequence[np.ndarray] | None = None, *, terms=None, name: str = ""):
        self.input_layout = input_layout
        self.output_layout = output_layout
        self.name = name
        if kraus is None and terms is None:
            raise DomainError("a channel needs Kraus operators or product terms")
        if terms is not None:
            terms = tuple((float(c), tuple(tuple(np.asarray(k, dtype=complex) for k in fam) for fam in fams))
                          for c, fams in terms)
            if len(input_layout) != len(output_layout):
                raise LayoutError("product terms need matching factor counts")
            for _, fams in terms:
                if len(fams) != len(input_layout):
                    raise LayoutError("each term needs one family per factor")
                for fam, (_, din), (_, dout) in zip(fams, input_layout, output_layout):
                    for k in fam:
                        if k.shape != (dout, din):
                            raise LayoutError(f"local Kraus shape {k.shape} != {(dout, din)}")
        self.terms = terms
        if kraus is not None:
            kraus = tuple(np.asarray(k, dtype=complex) for k in kraus)
            for k in kraus:
                if k.shape != (output_layout.dim, input_layout.dim):
                    raise LayoutError(f"Kraus shape {k.shape} != {(output_layout.dim, input_layout.dim)}")
                if not np.all(np.isfinite(k)):
                    raise DomainError("non-finite Kraus entry")
            self.__dict__["kraus"] = kraus

    @cached_property
    def kraus(self) -> tuple[np.ndarray, ...]:
        check_dim(self.input_layout.dim * self.output_layout.dim, "dense Kraus expansion")
        ops = []
        for coef, fams in self.terms:
            if coef == 0:
                continue
            s = math.sqrt(coef)
            for combo in itertools.product(*fams):
                k = np.array([[s]], dtype=complex)
                for op in combo:
                    k = np.kron(k, op)
                ops.append(k)
        return tuple(ops)

    def completeness_error(self) -> float:
        """``max |sum K^dag K - I|``."""
        d = self.input_layout.dim
        acc = np.zeros((d, d), dtype=complex)
        for k in self.kraus:
            acc += k.conj().T @ k
        return float(np.max(np.abs(acc - np.eye(d))))

    def __repr__(self):
        return f"KrausChannel({self.name or '?'}: {self.input_layout.labels} -> {self.output_layout.labels})"


@dataclass(frozen=True)
class ErasureSpec:
    q: int
    delta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "delta", Fraction(self.delta))
        if self.q < 2:
            raise DomainError("q must be >= 2")
        if not 0 <= self.delta <= 1:
            raise DomainError("delta must lie in [0, 1]")


@dataclass(frozen=True)
class BlockErasureSpec:
    q: int
    n: int
    w: int

    def __post_init__(self):
        if self.q < 2 or self.n < 1:
            raise DomainError("need q >= 2 and n >= 1")
        if not 0 <= self.w <= self.n:
            raise DomainError(f"erased count w={self.w} must lie in [0, n={self.n}]")


# -- local building blocks --------------------------------------------------

def embed_op(q: int) -> np.ndarray:
    """Isometric embedding ``C^q -> C^q (+) C|perp>``."""
    return np.eye(q + 1, q, dtype=complex)


def erase_family(q: int) -> Family:
    """``{|perp><i|}``: trace the input and plant the flag."""
    ops = []
    for i in range(q):
        k = np.zeros((q + 1, q), dtype=complex)
        k[q, i] = 1
        ops.append(k)
    return tuple(ops)


def flag_projector(q: int) -> np.ndarray:
    p = np.zeros((q + 1, q + 1), dtype=complex)
    p[q, q] = 1
    return p


def data_projector(q: int) -> np.ndarray:
    return np.diag([1.0] * q + [0.0]).astype(complex)


def _labels(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(n))


def block_layouts(q: int, n: int, in_prefix: str = "A", out_prefix: str = "B"):
    return (SystemLayout(tuple((lab, q) for lab in _labels(in_prefix, n))),
            SystemLayout(tuple((lab, q + 1) for lab in _labels(out_prefix, n))))


# -- builders ----------------------------------------------------------------

def identity_channel(layout: SystemLayout, out_layout: SystemLayout | None = None) -> KrausChannel:
    out_layout = layout if out_layout is None else out_layout
    terms = [(1.0, tuple((np.eye(d, dtype=complex),) for d in layout.dims))]
    return KrausChannel(layout, out_layout, terms=terms, name="identity")


def depolarizing(q: int, p: float = 1.0, label_in: str = "A", label_out: str = "B") -> KrausChannel:
    """``rho -> (1-p) rho + p I/q``; ``p = 1`` is completely depolarizing."""
    ops = [math.sqrt(1 - p) * np.eye(q, dtype=complex)] if p < 1 else []
    for i in range(q):
        for j in range(q):
            k = np.zeros((q, q), dtype=complex)
            k[i, j] = math.sqrt(p / q)
            ops.append(k)
    return KrausChannel(SystemLayout.of((label_in, q)), SystemLayout.of((label_out, q)), ops,
                        name=f"depolarizing(p={p})")


def build_erasure(spec: ErasureSpec, label_in: str = "A1", label_out: str = "B1") -> KrausChannel:
    """Single erasure channel ``(1-delta) rho (+) delta |perp><perp|``."""
    q, delta = spec.q, spec.delta
    terms = [(float(1 - delta), ((embed_op(q),),)), (float(delta), (erase_family(q),))]
    return KrausChannel(SystemLayout.of((label_in, q)), SystemLayout.of((label_out, q + 1)),
                        terms=terms, name=f"erasure(q={q},delta={delta})")


def erasure_patterns(n: int, w: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(n), w))


def build_block_erasure(spec: BlockErasureSpec) -> KrausChannel:
    """Uniformly erase a random ``w``-subset of ``n`` qudits, flagging the erased slots."""
    q, n, w = spec.q, spec.n, spec.w
    coef = 1.0 / math.comb(n, w)
    erase, keep = erase_family(q), (embed_op(q),)
    terms = [(coef, tuple(erase if j in J else keep for j in range(n))) for J in erasure_patterns(n, w)]
    lin, lout = block_layouts(q, n)
    ch = KrausChannel(lin, lout, terms=terms, name=f"block_erasure(q={q},n={n},w={w})")
    ch.patterns = erasure_patterns(n, w)
    return ch


def build_iid_erasure(q: int, delta, n: int) -> KrausChannel:
    """``E_{q,delta}`` on each of ``n`` factors independently."""
    delta = Fraction(delta)
    erase, keep = erase_family(q), (embed_op(q),)
    terms = []
    for mask in itertools.product((0, 1), repeat=n):
        v = sum(mask)
        terms.append((float(delta**v * (1 - delta) ** (n - v)),
                      tuple(erase if m else keep for m in mask)))
    lin, lout = block_layouts(q, n)
    return KrausChannel(lin, lout, terms=terms, name=f"iid_erasure(q={q},delta={delta},n={n})")


def build_degrading(q: int, n: int, w: int, v: int) -> KrausChannel:
    """``D_{v|w}`` on ``B^n``: read the flag pattern, then erase ``v - w`` more unflagged slots.

    ``D_{v|w} o E_{q,w,n} = E_{q,v,n}``. For ``v == w`` this is the identity.
    """
    if not 0 <= w <= n or not 0 <= v <= n:
        raise DomainError(f"need 0 <= w, v <= n, got w={w}, v={v}, n={n}")
    if v < w:
        raise DomainError(f"degrading map needs v >= w, got v={v} < w={w}")
    layout = block_layouts(q, n)[1]
    if v == w:
        ch = identity_channel(layout)
        ch.name = f"degrading(q={q},n={n},{v}|{w})"
        return ch
    k = v - w
    flag, data = (flag_projector(q),), (data_projector(q),)
    extra = tuple(np.outer(np.eye(q + 1)[q], np.eye(q + 1)[i]).astype(complex) for i in range(q))
    terms = []
    for mask in itertools.product((0, 1), repeat=n):
        flagged = {j for j in range(n) if mask[j]}
        free = [j for j in range(n) if j not in flagged]
        subsets = list(itertools.combinations(free, min(k, len(free))))
        coef = 1.0 / len(subsets)
        for K in subsets:
            fams = tuple(flag if j in flagged else (extra if j in K else data) for j in range(n))
            terms.append((coef, fams))
    return KrausChannel(layout, layout, terms=terms, name=f"degrading(q={q},n={n},{v}|{w})")


def iid_mixture_weights(n: int, delta, v: int) -> Fraction:
    """``C(n,v) delta^v (1-delta)^(n-v)`` as an exact rational."""
    delta = Fraction(delta)
    if not 0 <= v <= n:
        raise DomainError(f"v={v} outside [0, {n}]")
    return math.comb(n, v) * delta**v * (1 - delta) ** (n - v)


# -- combinators ---------------------------------------------------------------

def compose(second: KrausChannel, first: KrausChannel) -> KrausChannel:
    """``second o first``."""
    if first.output_layout.dims != second.input_layout.dims:
        raise LayoutError("composition dimension mismatch")
    if first.terms is not None and second.terms is not None:
        terms = []
        for c2, f2 in second.terms:
            for c1, f1 in first.terms:
                fams = tuple(tuple(b @ a for b in fb for a in fa) for fa, fb in zip(f1, f2))
                terms.append((c1 * c2, fams))
        return KrausChannel(first.input_layout, second.output_layout, terms=terms,
                            name=f"{second.name}o{first.name}")
    ops = [b @ a for b in second.kraus for a in first.kraus]
    return KrausChannel(first.input_layout, second.output_layout, ops, name=f"{second.name}o{first.name}")


def mix(weighted: Sequence[tuple[float, KrausChannel]]) -> KrausChannel:
    """Convex combination realized by concatenating scaled Kraus families."""
    weighted = [(float(w), ch) for w, ch in weighted if float(w) != 0]
    lin, lout = weighted[0][1].input_layout, weighted[0][1].output_layout
    if all(ch.terms is not None for _, ch in weighted):
        terms = [(w * c, fams) for w, ch in weighted for c, fams in ch.terms]
        return KrausChannel(lin, lout, terms=terms, name="mixture")
    ops = [math.sqrt(w) * k for w, ch in weighted for k in ch.kraus]
    return KrausChannel(lin, lout, ops, name="mixture")


# -- application ---------------------------------------------------------------

def _apply_family(tens: np.ndarray, n_axes: int, axis: int, family) -> np.ndarray:
    """Apply a local Kraus family to ``axis`` of a (row axes + column axes) tensor."""
    out = None
    for k in family:
        t = np.tensordot(k, tens, axes=(1, axis))
        t = np.moveaxis(t, 0, axis)
        t = np.tensordot(t, k.conj(), axes=(n_axes + axis, 1))
        t = np.moveaxis(t, -1, n_axes + axis)
        out = t if out is None else out + t
    return out


def apply(ch: KrausChannel, s: DensityMatrix, on, out_labels=None) -> DensityMatrix:
    """Apply ``ch`` to the factors ``on`` of ``s`` (identity elsewhere).

    The ``on`` factors are matched to ``ch.input_layout`` by position. Output
    factors take ``out_labels`` (default: the channel's output labels) and
    replace the input factors in place.
    """
    on = _as_labels(on)
    in_dims = tuple(s.layout.parts[s.layout.index(lab)][1] for lab in on)
    if in_dims != ch.input_layout.dims:
        raise LayoutError(f"factors {on} have dims {in_dims}, channel expects {ch.input_layout.dims}")
    out_labels = ch.output_layout.labels if out_labels is None else _as_labels(out_labels)
    if len(out_labels) != len(ch.output_layout):
        raise LayoutError("wrong number of output labels")
    rest = [lab for lab in s.labels if lab not in on]
    if set(out_labels) & set(rest):
        raise LayoutError(f"output labels {out_labels} collide with {rest}")

    # positions of the new factors in the final layout
    first = min(s.layout.index(lab) for lab in on) if on else 0
    before = [lab for lab in s.labels[:first] if lab not in on]
    after = [lab for lab in s.labels[first:] if lab not in on]
    new_parts = (tuple(s.layout.parts[s.layout.index(lab)] for lab in before)
                 + tuple(zip(out_labels, ch.output_layout.dims))
                 + tuple(s.layout.parts[s.layout.index(lab)] for lab in after))
    new_layout = SystemLayout(new_parts)
    check_dim(new_layout.dim, "channel output")

    order = list(on) + rest
    dims = s.layout.dims
    nf = len(dims)
    axes = [s.layout.index(lab) for lab in order]
    tens = s.matrix.reshape(dims + dims).transpose(axes + [nf + a for a in axes])
    rest_dims = tuple(dims[s.layout.index(lab)] for lab in rest)
    rd = int(np.prod(rest_dims, dtype=np.int64)) if rest else 1

    if ch.terms is not None:
        k_in = len(on)
        shp = ch.input_layout.dims + rest_dims
        tens = tens.reshape(shp + shp)
        total = None
        for coef, fams in ch.terms:
            if coef == 0:
                continue
            t = tens
            for i, fam in enumerate(fams):
                t = _apply_family(t, k_in + len(rest_dims), i, fam)
            total = coef * t if total is None else total + coef * t
        od = ch.output_layout.dim
        res = total.reshape(od * rd, od * rd)
    else:
        di, od = ch.input_layout.dim, ch.output_layout.dim
        x = tens.reshape(di, rd, di, rd)
        res = np.zeros((od, rd, od, rd), dtype=complex)
        for k in ch.kraus:
            y = np.tensordot(k, x, axes=(1, 0))
            res += np.tensordot(y, k.conj(), axes=(2, 1)).transpose(0, 1, 3, 2)
        res = res.reshape(od * rd, od * rd)

    cur = SystemLayout(tuple(zip(out_labels, ch.output_layout.dims))
                       + tuple(s.layout.parts[s.layout.index(lab)] for lab in rest))
    out = DensityMatrix(cur, res)
    if cur.labels != new_layout.labels:
        out = permute(out, new_layout.labels)
    return out


def _local_choi(family, d_in: int) -> np.ndarray:
    vec = max_entangled_vector(d_in)
    out = 0
    for k in family:
        v = np.kron(np.eye(d_in), k) @ vec
        out = out + np.outer(v, v.conj())
    return out


def _product_choi(ch: KrausChannel, ref: SystemLayout, out_labels) -> DensityMatrix:
    """Choi matrix of a sum of product terms: each term is a Kronecker product of
    per-factor Choi matrices, laid out ``ref1 out1 ref2 out2 ...``.

    Local Choi matrices are keyed by content, and terms are summed factor by
    factor so terms sharing a local map are merged before the large products.
    """
    lin, lout = ch.input_layout, ch.output_layout
    by_family, by_content = {}, {}

    def key(i, fam):
        if (i, id(fam)) not in by_family:
            mat = _local_choi(fam, lin.dims[i])
            content = by_content.setdefault((i, mat.tobytes()), (len(by_content), mat))
            by_family[(i, id(fam))] = (fam, content)
        return by_family[(i, id(fam))][1]

    keyed = [(coef, tuple(key(i, fam) for i, fam in enumerate(fams))) for coef, fams in ch.terms if coef != 0]

    def accumulate(terms, i):
        if i == len(lin.dims):
            return sum(coef for coef, _ in terms) * np.eye(1, dtype=complex)
        groups = {}
        for coef, locals_ in terms:
            groups.setdefault(locals_[i][0], (locals_[i][1], []))[1].append((coef, locals_))
        return sum(np.kron(mat, accumulate(sub, i + 1)) for mat, sub in groups.values())

    total = accumulate(keyed, 0)
    parts = []
    for (rl, rd), ol, od in zip(ref.parts, out_labels, lout.dims):
        parts += [(rl, rd), (ol, od)]
    interleaved = DensityMatrix(SystemLayout(tuple(parts)), total)
    return permute(interleaved, ref.labels + tuple(out_labels))


def choi(ch: KrausChannel, ref_prefix: str = "ref:") -> DensityMatrix:
    """``(id (x) ch)(Phi)`` with ``Phi`` normalized maximally entangled on ``in (x) in``."""
    lin = ch.input_layout
    check_dim(lin.dim * ch.output_layout.dim, "Choi matrix")
    ref = SystemLayout(tuple((ref_prefix + lab, d) for lab, d in lin.parts))
    out_labels = tuple(lab if lab not in ref.labels else lab + "'" for lab in ch.output_layout.labels)
    if ch.terms is not None and lin.parts:
        return _product_choi(ch, ref, out_labels)
    vec = max_entangled_vector(lin.dim)
    phi = DensityMatrix(ref.concat(lin), np.outer(vec, vec.conj()))
    return apply(ch, phi, lin.labels, out_labels)


def choi_distance(a: KrausChannel, b: KrausChannel) -> float:
    """Max-entry difference of the Choi matrices."""
    ca, cb = choi(a), choi(b)
    if ca.layout.dims != cb.layout.dims:
        raise LayoutError("channels have different shapes")
    return float(np.max(np.abs(ca.matrix - cb.matrix)))


def channels_equal(a: KrausChannel, b: KrausChannel, tol: float = TOL_ALG) -> bool:
    return choi_distance(a, b) <= tol


# -- JSON ----------------------------------------------------------------------

def channel_to_json(ch: KrausChannel) -> dict:
    return {"in": layout_to_json(ch.input_layout), "out": layout_to_json(ch.output_layout),
            "kraus": [_matrix_to_json(k) for k in ch.kraus]}


def channel_from_json(data: dict) -> KrausChannel:
    return KrausChannel(layout_from_json(data["in"]), layout_from_json(data["out"]),
                        [_matrix_from_json(k) for k in data["kraus"]])
