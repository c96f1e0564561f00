"""The EACQ code model: encoder and decoder instruments plus resource registers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from ..config import TOL_ALG, TOL_NUM
from ..converse import CodeRates
from ..errors import DomainError, LayoutError
from ..hilbert import (
    DensityMatrix,
    SystemLayout,
    entropy,
    max_entangled_vector,
    pure,
    state_from_json,
    state_to_json,
    tensor_all,
)
from ..region import RateTriple
from .instrument import Instrument
from .rs import RSCode, codeword_indices, decode_table

# register labels
X, W, T_A, T_B, T_AP, T_BP, XHAT, R = "X", "W", "T_A", "T_B", "T_A'", "T_B'", "Xhat", "R"
REGISTERS = (X, W, T_A, T_B, T_AP, T_BP)
ENV = "~env"


def a_labels(n: int) -> tuple[str, ...]:
    return tuple(f"A{i + 1}" for i in range(n))


def b_labels(n: int) -> tuple[str, ...]:
    return tuple(f"B{i + 1}" for i in range(n))


def pure_pair(vec, a: str, da: int, b: str, db: int) -> DensityMatrix:
    return pure(np.asarray(vec, dtype=complex), SystemLayout(((a, da), (b, db))))


def trivial_pair(a: str, b: str) -> DensityMatrix:
    return pure_pair([1.0], a, 1, b, 1)


def max_entangled_pair(a: str, b: str, d: int) -> DensityMatrix:
    return pure_pair(max_entangled_vector(d), a, d, b, d)


def _log_ratio(x: float, log_q: float) -> Fraction:
    val = x / log_q
    frac = Fraction(val).limit_denominator(1000)
    if abs(float(frac) - val) > TOL_NUM:
        raise DomainError(f"rate {x} bits is not a small rational multiple of log q")
    return frac


@dataclass
class EACQCode:
    """Encoders ``m -> {v: Kraus}`` on ``X T_A -> T_A' A^n W`` and decoders
    ``v -> {m': Kraus}`` on ``B^n W T_B -> Xhat T_B' [env]``."""

    q: int
    n: int
    M_size: int
    V_size: int
    dims: dict
    phi_i: DensityMatrix
    phi_f: DensityMatrix
    encoder: list
    decoder: list
    params: dict | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = {r: int(self.dims.get(r, 1)) for r in REGISTERS}
        self.dims = dims
        if len(self.encoder) != self.M_size:
            raise LayoutError(f"need one encoder per message ({self.M_size}), got {len(self.encoder)}")
        if len(self.decoder) != self.V_size:
            raise LayoutError(f"need one decoder per side message ({self.V_size}), got {len(self.decoder)}")
        if self.phi_i.layout.parts != ((T_A, dims[T_A]), (T_B, dims[T_B])):
            raise LayoutError(f"phi_i must live on {T_A},{T_B}")
        if self.phi_f.layout.parts != ((T_AP, dims[T_AP]), (T_BP, dims[T_BP])):
            raise LayoutError(f"phi_f must live on {T_AP},{T_BP}")
        enc_in, enc_out = self.encoder_layouts()
        for m, ins in enumerate(self.encoder):
            if ins.input_layout != enc_in or ins.output_layout != enc_out:
                raise LayoutError(f"encoder {m} layouts do not match the code registers")
            if any(not 0 <= v < self.V_size for v in ins.outcomes):
                raise LayoutError(f"encoder {m} has an outcome outside [0, {self.V_size})")
        dec_in = self.decoder_input_layout()
        for v, ins in enumerate(self.decoder):
            if ins.input_layout != dec_in:
                raise LayoutError(f"decoder {v} input layout does not match the code registers")
            base = ins.output_layout.parts[:2]
            if base != ((XHAT, dims[X]), (T_BP, dims[T_BP])):
                raise LayoutError(f"decoder {v} must output {XHAT},{T_BP} first")
            if any(not lab.startswith("~") for lab in ins.output_layout.labels[2:]):
                raise LayoutError("extra decoder outputs must be environment factors")
            if any(not 0 <= m < self.M_size for m in ins.outcomes):
                raise LayoutError(f"decoder {v} has an outcome outside [0, {self.M_size})")

    # -- layouts --
    def a_layout(self) -> SystemLayout:
        return SystemLayout(tuple((lab, self.q) for lab in a_labels(self.n)))

    def b_layout(self) -> SystemLayout:
        return SystemLayout(tuple((lab, self.q + 1) for lab in b_labels(self.n)))

    def encoder_layouts(self) -> tuple[SystemLayout, SystemLayout]:
        d = self.dims
        lin = SystemLayout(((X, d[X]), (T_A, d[T_A])))
        lout = SystemLayout(((T_AP, d[T_AP]),)).concat(self.a_layout()).concat(SystemLayout(((W, d[W]),)))
        return lin, lout

    def decoder_input_layout(self) -> SystemLayout:
        d = self.dims
        return self.b_layout().concat(SystemLayout(((W, d[W]), (T_B, d[T_B]))))

    # -- resources --
    def rates(self, epsilon: float = 0.0) -> CodeRates:
        d = self.dims
        return CodeRates(
            C1=math.log2(self.V_size), C2=math.log2(self.M_size),
            Q1=math.log2(d[W]), Q2=math.log2(d[X]),
            E1=entropy(self.phi_i, [T_A]), E2=entropy(self.phi_f, [T_AP]),
            log_TA_prime=math.log2(d[T_AP]), epsilon=epsilon,
        )

    def triple(self) -> RateTriple:
        """Net ``(C, Q, E)`` in units of ``log q``."""
        r = self.rates()
        lq = math.log2(self.q)
        return RateTriple(_log_ratio(r.C, lq), _log_ratio(r.Q, lq), _log_ratio(r.E, lq))

    def tag(self) -> str | None:
        if not self.params:
            return None
        p = self.params
        return f"[[{p['n']},{p['k']}:{p['c']},{p['d']};{p['e']}]]_{p['q']}"

    def instruments_complete(self, tol: float = TOL_ALG) -> bool:
        return all(ins.is_complete(tol) for ins in list(self.encoder) + list(self.decoder))

    # -- JSON --
    def to_json(self) -> dict:
        return {
            "name": self.name, "q": self.q, "n": self.n, "M": self.M_size, "V": self.V_size,
            "dims": self.dims, "phi_i": state_to_json(self.phi_i), "phi_f": state_to_json(self.phi_f),
            "encoder": [ins.to_json() for ins in self.encoder],
            "decoder": [ins.to_json() for ins in self.decoder],
            "params": self.params, "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EACQCode":
        return cls(
            q=int(data["q"]), n=int(data["n"]), M_size=int(data["M"]), V_size=int(data["V"]),
            dims={k: int(v) for k, v in data["dims"].items()},
            phi_i=state_from_json(data["phi_i"]), phi_f=state_from_json(data["phi_f"]),
            encoder=[Instrument.from_json(x) for x in data["encoder"]],
            decoder=[Instrument.from_json(x) for x in data["decoder"]],
            params=data.get("params"), name=data.get("name", ""), meta=data.get("meta", {}),
        )


def taxonomy(n, k, c, d, e, q) -> dict:
    return {"n": n, "k": k, "c": c, "d": d, "e": e, "q": q}


# -- concrete codes -----------------------------------------------------------------

def classical_to_eacq(code: RSCode) -> EACQCode:
    """Classical MDS code with symbols written into ``A`` in the computational basis."""
    q, n = code.q, code.n
    dims = {r: 1 for r in REGISTERS}
    a_dim = q**n
    enc_in = SystemLayout(((X, 1), (T_A, 1)))
    enc_out = SystemLayout(((T_AP, 1),) + tuple((lab, q) for lab in a_labels(n)) + ((W, 1),))
    words = codeword_indices(code)
    encoder = []
    for m in range(code.num_messages):
        k = sp.coo_matrix((np.ones(1, dtype=complex), ([int(words[m])], [0])), shape=(a_dim, 1))
        encoder.append(Instrument(enc_in, enc_out, {0: [k]}))
    b_dim = (q + 1) ** n
    table, _ = decode_table(code)
    dec_in = SystemLayout(tuple((lab, q + 1) for lab in b_labels(n)) + ((W, 1), (T_B, 1)))
    dec_out = SystemLayout(((XHAT, 1), (T_BP, 1), (ENV, b_dim)))
    order = np.argsort(table, kind="stable")
    bounds = np.searchsorted(table[order], np.arange(code.num_messages + 1))
    branches = {}
    for m in range(code.num_messages):
        words_m = order[bounds[m]:bounds[m + 1]]
        if len(words_m) == 0:
            continue
        branches[m] = [sp.coo_matrix((np.ones(len(words_m), dtype=complex), (words_m, words_m)),
                                     shape=(b_dim, b_dim))]
    decoder = [Instrument(dec_in, dec_out, branches)]
    return EACQCode(q, n, code.num_messages, 1, dims, trivial_pair(T_A, T_B), trivial_pair(T_AP, T_BP),
                    encoder, decoder, taxonomy(n, 0, code.k, code.d, 0, q), name=f"rs:{q},{n},{code.k}")


def identity_code(q: int) -> EACQCode:
    """Send one qudit straight through a single channel use; flags decode to ``|0>``."""
    dims = {r: 1 for r in REGISTERS}
    dims[X] = q
    enc_in = SystemLayout(((X, q), (T_A, 1)))
    enc_out = SystemLayout(((T_AP, 1), ("A1", q), (W, 1)))
    encoder = [Instrument(enc_in, enc_out, {0: [np.eye(q)]})]
    dec_in = SystemLayout((("B1", q + 1), (W, 1), (T_B, 1)))
    dec_out = SystemLayout(((XHAT, q), (T_BP, 1)))
    keep = np.eye(q, q + 1)
    flag = np.zeros((q, q + 1))
    flag[0, q] = 1
    decoder = [Instrument(dec_in, dec_out, {0: [keep, flag]})]
    return EACQCode(q, 1, 1, 1, dims, trivial_pair(T_A, T_B), trivial_pair(T_AP, T_BP),
                    encoder, decoder, taxonomy(1, 1, 0, 1, 0, q), name=f"identity:{q}")


def ideal_output(code: EACQCode) -> DensityMatrix:
    """``Phibar^{M Mhat} (x) Phi^{R Xhat} (x) phi_f`` on ``M, Mhat, R, Xhat, T_A', T_B'``."""
    M = code.M_size
    cls = np.zeros((M * M, M * M))
    for m in range(M):
        cls[m * M + m, m * M + m] = 1.0 / M
    mm = DensityMatrix(SystemLayout((("M", M), ("Mhat", M))), cls)
    dx = code.dims[X]
    rx = pure(max_entangled_vector(dx), SystemLayout(((R, dx), (XHAT, dx))))
    return tensor_all([mm, rx, code.phi_f])
