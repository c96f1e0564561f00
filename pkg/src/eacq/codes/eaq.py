"""Small maximal-entanglement EAQ codes found by searching Clifford encoders.

The encoder is a qubit Clifford unitary on ``X T_A`` (``n - d + 1`` payload
qubits followed by ``d - 1`` ebit halves) whose output qubits are the
channel inputs ``A1..An``. A candidate is accepted when every set of
``d - 1`` channel inputs is uncorrelated with the reference. For each
erasure pattern the decoder is the isometry that maps Bob's systems onto
``Phi^{R Xhat}`` times a purification of what was lost; it is read off from
a singular value decomposition.

Searched codes are frozen as JSON fixtures (gate sequence plus Kraus
operators) so loading them needs no search.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from ..config import TOL_NUM
from ..errors import DomainError
from ..hilbert import SystemLayout, max_entangled_vector
from .code import (
    REGISTERS, T_A, T_AP, T_B, T_BP, W, X, XHAT, EACQCode, a_labels, b_labels,
    max_entangled_pair, taxonomy, trivial_pair,
)
from .instrument import Instrument

FIXTURE_DIR = Path(__file__).with_name("fixtures")
SUPPORTED = ((2, 2, 2), (3, 2, 2))

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_S = np.diag([1, 1j])


def gate_set(nq: int) -> list[tuple]:
    gates = [("H", i) for i in range(nq)] + [("S", i) for i in range(nq)]
    gates += [("CNOT", c, t) for c in range(nq) for t in range(nq) if c != t]
    return gates


def gate_matrix(gate, nq: int) -> np.ndarray:
    """Gate on ``nq`` qubits, qubit 0 most significant."""
    if gate[0] in ("H", "S"):
        local = _H if gate[0] == "H" else _S
        ops = [np.eye(2)] * nq
        ops[gate[1]] = local
        out = np.eye(1)
        for op in ops:
            out = np.kron(out, op)
        return out
    _, c, t = gate
    dim = 2**nq
    out = np.zeros((dim, dim), dtype=complex)
    for x in range(dim):
        bits = [(x >> (nq - 1 - i)) & 1 for i in range(nq)]
        if bits[c]:
            bits[t] ^= 1
        y = sum(b << (nq - 1 - i) for i, b in enumerate(bits))
        out[y, x] = 1
    return out


def circuit_unitary(gates, nq: int) -> np.ndarray:
    u = np.eye(2**nq, dtype=complex)
    for g in gates:
        u = gate_matrix(g, nq) @ u
    return u


def _key(u: np.ndarray) -> bytes:
    flat = u.ravel()
    k = int(np.argmax(np.abs(flat) > 1e-9))
    v = flat * (abs(flat[k]) / flat[k])
    return (np.round(v, 8) + 0.0).tobytes()


def encoded_state(u: np.ndarray, n: int, d: int, q: int = 2) -> np.ndarray:
    """``(I_R (x) U (x) I_TB) Phi^{RX} Phi^{T_A T_B}`` as a tensor ``[R, A1..An, T_B]``."""
    dx, de = q ** (n - d + 1), q ** (d - 1)
    rx = max_entangled_vector(dx).reshape(dx, dx)
    ab = max_entangled_vector(de).reshape(de, de)
    # psi[r, x, a, b] then apply U on (x, a)
    psi = np.einsum("rx,ab->rxab", rx, ab).reshape(dx, dx * de, de)
    psi = np.einsum("ij,rjb->rib", u, psi)
    return psi.reshape((dx,) + (q,) * n + (de,))


def _reduced(psi: np.ndarray, keep) -> np.ndarray:
    keep = list(keep)
    rest = [i for i in range(psi.ndim) if i not in keep]
    mat = np.transpose(psi, keep + rest).reshape(int(np.prod([psi.shape[i] for i in keep])), -1)
    return mat @ mat.conj().T


def decoupled(psi: np.ndarray, sites) -> float:
    """``|| rho_{R A_J} - rho_R (x) rho_{A_J} ||_max`` for the channel inputs ``sites`` (0-based)."""
    axes = [0] + [1 + s for s in sites]
    joint = _reduced(psi, axes)
    r = _reduced(psi, [0])
    a = _reduced(psi, [1 + s for s in sites]) if sites else np.eye(1)
    return float(np.max(np.abs(joint - np.kron(r, a))))


def accepts(u: np.ndarray, n: int, d: int) -> bool:
    psi = encoded_state(u, n, d)
    return all(decoupled(psi, J) <= TOL_NUM for J in itertools.combinations(range(n), d - 1))


@dataclass
class SearchResult:
    gates: list | None
    visited: int
    exhausted: bool

    @property
    def found(self) -> bool:
        return self.gates is not None


def search_clifford_encoder(n: int, d: int, max_depth: int = 8) -> SearchResult:
    """Breadth-first search over H, S, CNOT circuits on ``n`` qubits.

    Circuits are deduplicated by their unitary up to a global phase, so the
    first hit is a shortest accepted circuit in gate-set order; when nothing
    is found and ``exhausted`` is set, the whole Clifford group was visited.
    """
    if not 2 <= d <= n:
        raise DomainError("need 2 <= d <= n")
    gates = gate_set(n)
    mats = [gate_matrix(g, n) for g in gates]
    start = np.eye(2**n, dtype=complex)
    seen = {_key(start)}
    frontier = deque([((), start)])
    truncated = False
    while frontier:
        seq, u = frontier.popleft()
        if accepts(u, n, d):
            return SearchResult(list(seq), len(seen), False)
        if len(seq) >= max_depth:
            truncated = True
            continue
        for g, m in zip(gates, mats):
            v = m @ u
            k = _key(v)
            if k not in seen:
                seen.add(k)
                frontier.append((seq + (g,), v))
    return SearchResult(None, len(seen), not truncated)


# -- decoder ------------------------------------------------------------------------

def _pattern_decoder(psi: np.ndarray, n: int, d: int, lost: tuple, q: int = 2):
    """Unitary ``Bob -> Xhat E'`` recovering ``Phi^{R Xhat}`` when ``lost`` channel inputs are gone.

    Bob holds the remaining channel inputs (in order) and ``T_B``; ``E'``
    purifies the lost inputs. Returns ``(Y^T, residual)``.
    """
    dx = psi.shape[0]
    kept = [s for s in range(n) if s not in lost]
    axes_a = [0] + [1 + s for s in lost]
    axes_b = [1 + s for s in kept] + [n + 1]
    big = np.transpose(psi, axes_a + axes_b).reshape(dx * q ** len(lost), -1)
    rho_lost = _reduced(psi, [1 + s for s in lost]) if lost else np.eye(1)
    root = sla.sqrtm(rho_lost)
    de = root.shape[1]
    target = np.einsum("rx,ae->raxe", np.eye(dx) / math.sqrt(dx), root).reshape(dx * root.shape[0], dx * de)
    uu, _, vh = np.linalg.svd(big.conj().T @ target)
    y = uu @ vh
    resid = float(np.max(np.abs(big @ y - target)))
    return y.T, resid


def eaq_decoder(u: np.ndarray, n: int, d: int, q: int = 2) -> Instrument:
    """Decoder instrument on ``B^n W T_B -> Xhat T_B'``.

    Patterns with at most ``d - 1`` erasures are decoded (extra surviving
    inputs are discarded); heavier patterns fall back to a fixed output.
    """
    psi = encoded_state(u, n, d, q)
    dx, de = q ** (n - d + 1), q ** (d - 1)
    b_dim = (q + 1) ** n
    lin_dim = b_dim * de
    ops = []
    for pattern in itertools.product((False, True), repeat=n):
        erased = tuple(i for i in range(n) if pattern[i])
        alive = [i for i in range(n) if not pattern[i]]
        # basis states of the input space belonging to this pattern
        digits = np.array(list(itertools.product(*[[q] if pattern[i] else range(q) for i in range(n)])),
                          dtype=np.int64).reshape(-1, n)
        b_flat = digits @ ((q + 1) ** np.arange(n - 1, -1, -1, dtype=np.int64))
        if len(erased) > d - 1:
            for b in b_flat:
                for t in range(de):
                    k = np.zeros((dx, lin_dim), dtype=complex)
                    k[0, b * de + t] = 1
                    ops.append(k)
            continue
        lost = tuple(sorted(erased + tuple(alive[: d - 1 - len(erased)])))
        dropped = [i for i in lost if i not in erased]
        kept = [i for i in range(n) if i not in lost]
        yt, resid = _pattern_decoder(psi, n, d, lost, q)
        if resid > 1e-8:
            raise DomainError(f"encoder does not decouple pattern {lost} (residual {resid:.2e})")
        e_dim = yt.shape[0] // dx
        kept_w = q ** np.arange(len(kept) - 1, -1, -1, dtype=np.int64)
        drop_w = q ** np.arange(len(dropped) - 1, -1, -1, dtype=np.int64)
        bob = (digits[:, kept] @ kept_w) if kept else np.zeros(len(digits), dtype=np.int64)
        drop = (digits[:, dropped] @ drop_w) if dropped else np.zeros(len(digits), dtype=np.int64)
        for e_drop in range(q ** len(dropped)):
            sel = np.flatnonzero(drop == e_drop)
            for e in range(e_dim):
                k = np.zeros((dx, lin_dim), dtype=complex)
                rows = yt[np.arange(dx) * e_dim + e]
                for s in sel:
                    for t in range(de):
                        k[:, b_flat[s] * de + t] = rows[:, bob[s] * de + t]
                ops.append(k)
    ops = [k for k in ops if np.max(np.abs(k)) > 1e-14]
    lin = SystemLayout(tuple((lab, q + 1) for lab in b_labels(n)) + ((W, 1), (T_B, de)))
    lout = SystemLayout(((XHAT, dx), (T_BP, 1)))
    return Instrument(lin, lout, {0: ops})


def code_from_unitary(u: np.ndarray, n: int, d: int, q: int, meta: dict | None = None) -> EACQCode:
    dx, de = q ** (n - d + 1), q ** (d - 1)
    dims = {r: 1 for r in REGISTERS}
    dims.update({X: dx, T_A: de, T_B: de})
    enc_in = SystemLayout(((X, dx), (T_A, de)))
    enc_out = SystemLayout(((T_AP, 1),) + tuple((lab, q) for lab in a_labels(n)) + ((W, 1),))
    encoder = [Instrument(enc_in, enc_out, {0: [u]})]
    decoder = [eaq_decoder(u, n, d, q)]
    return EACQCode(q, n, 1, 1, dims, max_entangled_pair(T_A, T_B, de), trivial_pair(T_AP, T_BP),
                    encoder, decoder, taxonomy(n, n - d + 1, 0, d, d - 1, q), name=f"eaq:{n},{d},{q}",
                    meta=meta or {})


def build_eaq_code(gates, n: int, d: int) -> EACQCode:
    """Qubit code from a searched Clifford circuit."""
    return code_from_unitary(circuit_unitary(gates, n), n, d, 2, {"gates": [list(g) for g in gates]})


def linear_encoder(q: int) -> np.ndarray:
    """Permutation ``|x, a> -> |x + a, x + 2a>`` over GF(q).

    Every 1x1 and 2x2 minor of ``[[1, 1], [1, 2]]`` is nonzero when ``q`` is
    an odd prime, so each single output is independent of the payload.
    """
    if q < 3:
        raise DomainError("the linear two-site encoder needs an odd prime q")
    u = np.zeros((q * q, q * q))
    for x in range(q):
        for a in range(q):
            u[((x + a) % q) * q + (x + 2 * a) % q, x * q + a] = 1
    return u


# -- fixtures -----------------------------------------------------------------------

# instances with a linear (non-searched) encoder, shipped beside the searched ones
LINEAR = ((2, 2, 3),)


def fixture_path(n: int, d: int, q: int) -> Path:
    return FIXTURE_DIR / f"eaq_{n}_{d}_{q}.json"


def write_fixture(n: int, d: int, q: int = 2, max_depth: int = 64) -> Path:
    """Search (or construct), certify and freeze one instance.

    A failed exhaustive search is frozen too, as a record of the negative result.
    """
    path = fixture_path(n, d, q)
    path.parent.mkdir(parents=True, exist_ok=True)
    if (n, d, q) in LINEAR:
        data = code_from_unitary(linear_encoder(q), n, d, q, {"encoder": "linear"}).to_json()
    else:
        res = search_clifford_encoder(n, d, max_depth)
        if res.found:
            data = build_eaq_code(res.gates, n, d).to_json()
        else:
            data = {"status": "none", "n": n, "d": d, "q": q, "visited": res.visited,
                    "exhausted": res.exhausted, "max_depth": max_depth}
    path.write_text(json.dumps(data, sort_keys=True))
    return path


def max_ent_eaq_small(n: int, d: int, q: int = 2) -> EACQCode:
    """Frozen maximal-entanglement code for a supported ``(n, d, q)``."""
    if (n, d, q) not in SUPPORTED + LINEAR:
        raise NotImplementedError(
            f"(n,d,q)=({n},{d},{q}) is not available: only {list(SUPPORTED + LINEAR)} are shipped; "
            "a general maximal-entanglement construction is an open question (see README)")
    data = json.loads(fixture_path(n, d, q).read_text())
    if data.get("status") == "none":
        raise DomainError(
            f"no ({n},{d},{q}) code exists in this form: the search visited all {data['visited']} "
            "Clifford encoders, and a single-erasure code with one ebit on two qubits would be an "
            "absolutely maximally entangled four-qubit state, which does not exist")
    return EACQCode.from_json(data)


if __name__ == "__main__":
    for n_, d_, q_ in SUPPORTED + LINEAR:
        print(write_fixture(n_, d_, q_))
