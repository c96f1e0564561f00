"""Resource-conversion protocols as zero-channel-use codes, and concatenation.

Each protocol is an :class:`EACQCode` with ``n = 0``. :func:`concat` wires a
protocol in front of a base code: the classical side message the protocol
sends is carried inside the base code's message, and the quantum side
message inside the base code's quantum payload. The composite is again an
:class:`EACQCode` whose net rates are the sums of the two.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import CompositionError, DomainError
from ..hilbert import DensityMatrix, SystemLayout, max_entangled_vector, pure
from ..region import RAYS, RateTriple
from .code import (
    REGISTERS, T_A, T_AP, T_B, T_BP, W, X, XHAT, EACQCode, a_labels, b_labels,
    max_entangled_pair, trivial_pair,
)
from .instrument import Instrument, apply_local, embed, reindex, reorder_rows

KINDS = {"teleport": "TP", "dense_code": "DC", "qubit_to_ebit": "RC"}


def shift_operator(q: int, a: int = 1) -> np.ndarray:
    return np.roll(np.eye(q), a, axis=0)


def clock_operator(q: int, b: int = 1) -> np.ndarray:
    return np.diag(np.exp(2j * np.pi * b * np.arange(q) / q))


def pauli(q: int, a: int, b: int) -> np.ndarray:
    """Generalized Pauli ``X^a Z^b``."""
    return np.linalg.matrix_power(shift_operator(q), a) @ np.linalg.matrix_power(clock_operator(q), b)


def bell_vector(q: int, a: int, b: int) -> np.ndarray:
    """``(X^a Z^b (x) I) |Phi>``; these ``q^2`` vectors form an orthonormal basis."""
    return np.kron(pauli(q, a, b), np.eye(q)) @ max_entangled_vector(q)


def _dims(**kw) -> dict:
    out = {r: 1 for r in REGISTERS}
    out.update({{"X": X, "W": W, "T_A": T_A, "T_B": T_B, "T_AP": T_AP, "T_BP": T_BP}[k]: v for k, v in kw.items()})
    return out


def _layouts(dims):
    enc_in = SystemLayout(((X, dims[X]), (T_A, dims[T_A])))
    enc_out = SystemLayout(((T_AP, dims[T_AP]), (W, dims[W])))
    dec_in = SystemLayout(((W, dims[W]), (T_B, dims[T_B])))
    dec_out = SystemLayout(((XHAT, dims[X]), (T_BP, dims[T_BP])))
    return enc_in, enc_out, dec_in, dec_out


def teleportation(q: int) -> EACQCode:
    """Bell measurement on ``X T_A``; Bob applies ``X^a Z^b`` to ``T_B``."""
    dims = _dims(X=q, T_A=q, T_B=q)
    enc_in, enc_out, dec_in, dec_out = _layouts(dims)
    pairs = [(a, b) for a in range(q) for b in range(q)]
    encoder = [Instrument(enc_in, enc_out, {v: [bell_vector(q, a, b).conj()[None, :]]
                                            for v, (a, b) in enumerate(pairs)})]
    decoder = [Instrument(dec_in, dec_out, {0: [pauli(q, a, b)]}) for a, b in pairs]
    return EACQCode(q, 0, 1, q * q, dims, max_entangled_pair(T_A, T_B, q), trivial_pair(T_AP, T_BP),
                    encoder, decoder, name=f"teleport:{q}")


def dense_coding(q: int) -> EACQCode:
    """Alice applies ``X^a Z^b`` to her half and sends it; Bob measures in the Bell basis."""
    dims = _dims(T_A=q, T_B=q, W=q)
    enc_in, enc_out, dec_in, dec_out = _layouts(dims)
    pairs = [(a, b) for a in range(q) for b in range(q)]
    encoder = [Instrument(enc_in, enc_out, {0: [pauli(q, a, b)]}) for a, b in pairs]
    decoder = [Instrument(dec_in, dec_out, {m: [bell_vector(q, a, b).conj()[None, :]]
                                            for m, (a, b) in enumerate(pairs)})]
    return EACQCode(q, 0, q * q, 1, dims, max_entangled_pair(T_A, T_B, q), trivial_pair(T_AP, T_BP),
                    encoder, decoder, name=f"dense_code:{q}")


def qubit_to_ebit(q: int) -> EACQCode:
    """Prepare ``|Phi>`` locally and send one half."""
    dims = _dims(W=q, T_AP=q, T_BP=q)
    enc_in, enc_out, dec_in, dec_out = _layouts(dims)
    encoder = [Instrument(enc_in, enc_out, {0: [max_entangled_vector(q)[:, None]]})]
    decoder = [Instrument(dec_in, dec_out, {0: [np.eye(q)]})]
    return EACQCode(q, 0, 1, 1, dims, trivial_pair(T_A, T_B), max_entangled_pair(T_AP, T_BP, q),
                    encoder, decoder, name=f"qubit_to_ebit:{q}")


_BUILDERS = {"teleport": teleportation, "dense_code": dense_coding, "qubit_to_ebit": qubit_to_ebit}


def protocol_instrument(kind: str, q: int) -> tuple[RateTriple, EACQCode]:
    """``(rate shift in log q units, protocol code)`` for ``kind``."""
    if kind not in _BUILDERS:
        raise DomainError(f"unknown protocol {kind!r}; choose from {sorted(_BUILDERS)}")
    if q < 2:
        raise DomainError("q must be at least 2")
    return RAYS[KINDS[kind]], _BUILDERS[kind](q)


# -- serial composition --------------------------------------------------------------

def _pair_state(p: DensityMatrix, b: DensityMatrix, left: str, right: str) -> DensityMatrix:
    """``p (x) b`` with both left halves merged into ``left`` and right halves into ``right``."""
    (_, pl), (_, pr) = p.layout.parts
    (_, bl), (_, br) = b.layout.parts
    vec = np.kron(p.top_vector(), b.top_vector())
    src = SystemLayout((("pl", pl), ("pr", pr), ("bl", bl), ("br", br)))
    out = np.zeros_like(vec)
    out[reindex(np.arange(len(vec)), src, ("pl", "bl", "pr", "br"))] = vec
    return pure(out, SystemLayout(((left, pl * bl), (right, pr * br))))


def _env_parts(layout: SystemLayout, prefix: str):
    return tuple((prefix + lab, d) for lab, d in layout.parts[2:])


def compose(base: EACQCode, proto: EACQCode) -> EACQCode:
    """Run ``proto`` through ``base``: its side messages ride on ``base``'s payload."""
    if proto.n != 0:
        raise CompositionError("the first code must be a protocol with no channel uses")
    if proto.q != base.q:
        raise CompositionError(f"protocol q={proto.q} differs from code q={base.q}")
    vp, wp = proto.V_size, proto.dims[W]
    if base.M_size % vp:
        raise CompositionError(f"insufficient classical rate: {base.M_size} messages cannot carry "
                               f"{vp} protocol outcomes")
    if base.dims[X] % wp:
        raise CompositionError(f"insufficient quantum rate: payload dimension {base.dims[X]} cannot carry "
                               f"a {wp}-dimensional protocol register")
    dp, db = proto.dims, base.dims
    m_rest, x_rest = base.M_size // vp, db[X] // wp
    n = base.n
    a_parts = tuple((lab, base.q) for lab in a_labels(n))
    b_parts = tuple((lab, base.q + 1) for lab in b_labels(n))

    # encoder on (Xp, Xr, TAp, TAb) -> (TA'p, TA'b, A^n, Wb)
    enc_layout = SystemLayout((("Xp", dp[X]), ("Xr", x_rest), ("TAp", dp[T_A]), ("TAb", db[T_A])))
    p_out = SystemLayout((("TA'p", dp[T_AP]), ("Wp", wp)))
    b_out = SystemLayout((("TA'b", db[T_AP]),) + a_parts + (("Wb", db[W]),))
    encoder = []
    for m in range(proto.M_size * m_rest):
        mp, mr = divmod(m, m_rest)
        ops = []
        for vP, _, kp in proto.encoder[mp].kraus():
            kp_full, mid = embed(kp, enc_layout, ("Xp", "TAp"), p_out)
            for vB, _, kb in base.encoder[mr * vp + vP].kraus():
                k, out = apply_local(kb, kp_full, mid, ("Xr", "Wp", "TAb"), b_out)
                order = ("TA'p", "TA'b") + a_labels(n) + ("Wb",)
                ops.append((vB, reorder_rows(k, out, order)))
        branches = {}
        for vB, k in ops:
            branches.setdefault(vB, []).append(k)
        lin = SystemLayout(((X, dp[X] * x_rest), (T_A, dp[T_A] * db[T_A])))
        lout = SystemLayout(((T_AP, dp[T_AP] * db[T_AP]),) + a_parts + ((W, db[W]),))
        encoder.append(Instrument(lin, lout, branches))

    # decoder on (B^n, Wb, TBp, TBb) -> (Xhat=(Xp^, Xr^), TB'=(TB'p, TB'b), env)
    dec_layout = SystemLayout(b_parts + (("Wb", db[W]), ("TBp", dp[T_B]), ("TBb", db[T_B])))
    decoder = []
    for v in range(base.V_size):
        ins_b = base.decoder[v]
        env_b = _env_parts(ins_b.output_layout, "~b")
        b_out = SystemLayout((("Xr^", x_rest), ("Wp^", wp), ("TB'b", db[T_BP])) + env_b)
        branches = {}
        env_p_dims = None
        for mB, _, kb in ins_b.kraus():
            kb_full, mid = embed(kb, dec_layout, b_labels(n) + ("Wb", "TBb"), b_out)
            mr, vP = divmod(mB, vp)
            ins_p = proto.decoder[vP]
            env_p = _env_parts(ins_p.output_layout, "~p")
            env_p_dims = env_p if env_p_dims is None else env_p_dims
            if env_p != env_p_dims:
                raise CompositionError("protocol decoders must share one environment layout")
            p_out = SystemLayout((("Xp^", dp[X]), ("TB'p", dp[T_BP])) + env_p)
            for mP, _, kp in ins_p.kraus():
                k, out = apply_local(kp, kb_full, mid, ("Wp^", "TBp"), p_out)
                order = ("Xp^", "Xr^", "TB'p", "TB'b") + tuple(lab for lab, _ in env_p + env_b)
                branches.setdefault(mP * m_rest + mr, []).append(reorder_rows(k, out, order))
        env_dim = math.prod(d for _, d in (env_p_dims or ()) + env_b)
        out_parts = ((XHAT, dp[X] * x_rest), (T_BP, dp[T_BP] * db[T_BP]))
        if env_dim > 1:
            out_parts += (("~env", env_dim),)
        lin = SystemLayout(b_parts + ((W, db[W]), (T_B, dp[T_B] * db[T_B])))
        decoder.append(Instrument(lin, SystemLayout(out_parts), branches))

    dims = {X: dp[X] * x_rest, W: db[W], T_A: dp[T_A] * db[T_A], T_B: dp[T_B] * db[T_B],
            T_AP: dp[T_AP] * db[T_AP], T_BP: dp[T_BP] * db[T_BP]}
    params = None
    if base.params:
        shift = proto.triple()
        params = dict(base.params)
        params["k"] = int(base.params["k"] + shift.Q)
        params["c"] = int(base.params["c"] + shift.C)
        params["e"] = int(base.params["e"] + shift.E)
    return EACQCode(base.q, n, proto.M_size * m_rest, base.V_size, dims,
                    _pair_state(proto.phi_i, base.phi_i, T_A, T_B),
                    _pair_state(proto.phi_f, base.phi_f, T_AP, T_BP),
                    encoder, decoder, params, name=f"{base.name}+{proto.name}",
                    meta={"base": base.name, "protocol": proto.name})


def concat(code: EACQCode, kind: str, reps: int = 1) -> EACQCode:
    """Apply the protocol ``kind`` ``reps`` times in front of ``code``."""
    if reps < 0:
        raise DomainError("reps must be nonnegative")
    _, proto = protocol_instrument(kind, code.q)
    out = code
    for _ in range(reps):
        out = compose(out, proto)
    return out
