"""Reed-Solomon codes over prime fields with erasure decoding."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import sympy

from ..errors import DecodeError, DomainError


@dataclass(frozen=True)
class RSCode:
    """Evaluation code of polynomials of degree < ``k`` at ``n`` distinct points of GF(q)."""

    q: int
    n: int
    k: int
    points: tuple[int, ...] | None = None

    def __post_init__(self):
        if not sympy.isprime(self.q):
            raise DomainError(f"q={self.q} is not prime (prime-power fields are not supported)")
        if not 1 <= self.k <= self.n <= self.q:
            raise DomainError(f"need 1 <= k <= n <= q, got k={self.k}, n={self.n}, q={self.q}")
        pts = tuple(range(self.n)) if self.points is None else tuple(int(p) % self.q for p in self.points)
        if len(pts) != self.n or len(set(pts)) != self.n:
            raise DomainError("evaluation points must be n distinct field elements")
        object.__setattr__(self, "points", pts)

    @property
    def d(self) -> int:
        return self.n - self.k + 1

    @property
    def num_messages(self) -> int:
        return self.q**self.k

    @cached_property
    def generator(self) -> np.ndarray:
        """``G[i, j] = points[j] ** i``, so a codeword is ``msg @ G``."""
        return np.array([[pow(x, i, self.q) for x in self.points] for i in range(self.k)], dtype=np.int64)

    def interpolation_matrix(self, positions) -> np.ndarray:
        """Inverse Vandermonde on ``k`` positions: ``coeffs = L @ values (mod q)``."""
        return _inverse_vandermonde(self.q, self.k, tuple(self.points[j] for j in positions))


@lru_cache(maxsize=4096)
def _inverse_vandermonde(q: int, k: int, pts: tuple[int, ...]) -> np.ndarray:
    vand = sympy.Matrix([[pow(x, i, q) for i in range(k)] for x in pts])
    out = np.array(vand.inv_mod(q), dtype=np.int64)
    out.setflags(write=False)
    return out


def rs_encode(code: RSCode, msg) -> tuple[int, ...]:
    msg = np.asarray(msg, dtype=np.int64)
    if msg.shape != (code.k,):
        raise DomainError(f"message must have {code.k} symbols")
    if np.any((msg < 0) | (msg >= code.q)):
        raise DomainError("message symbols must lie in [0, q)")
    return tuple(int(x) for x in (msg @ code.generator) % code.q)


def rs_erasure_decode(code: RSCode, received) -> tuple[int, ...]:
    """Recover the message from a word with erased symbols marked ``None``."""
    received = list(received)
    if len(received) != code.n:
        raise DomainError(f"received word must have {code.n} symbols")
    alive = [j for j, y in enumerate(received) if y is not None]
    if len(alive) < code.k:
        raise DecodeError(f"{code.n - len(alive)} erasures exceed the correctable {code.n - code.k}")
    use = alive[:code.k]
    vals = np.array([received[j] for j in use], dtype=np.int64)
    return tuple(int(x) for x in (code.interpolation_matrix(use) @ vals) % code.q)


def message_digits(code: RSCode, m: int) -> tuple[int, ...]:
    """Coefficients of message index ``m`` (constant term most significant)."""
    return tuple(int(x) for x in np.unravel_index(m, (code.q,) * code.k))


def message_index(code: RSCode, digits) -> int:
    return int(np.ravel_multi_index(tuple(digits), (code.q,) * code.k))


def codeword_indices(code: RSCode) -> np.ndarray:
    """Flat index in ``(C^q)^(x)n`` of the codeword of every message, in message order."""
    msgs = np.array(list(itertools.product(range(code.q), repeat=code.k)), dtype=np.int64)
    words = (msgs @ code.generator) % code.q
    weights = code.q ** np.arange(code.n - 1, -1, -1, dtype=np.int64)
    return words @ weights


def decode_table(code: RSCode) -> tuple[np.ndarray, np.ndarray]:
    """Decoded message index for every word in ``{0..q}^n`` (``q`` marks an erasure).

    Returns ``(messages, decodable)``. Words with too many erasures decode to
    message 0, so the table is total.
    """
    q, n, k = code.q, code.n, code.k
    total = (q + 1) ** n
    out = np.zeros(total, dtype=np.int64)
    ok = np.zeros(total, dtype=bool)
    weights_b = (q + 1) ** np.arange(n - 1, -1, -1, dtype=np.int64)
    weights_m = q ** np.arange(k - 1, -1, -1, dtype=np.int64)
    for pattern in itertools.product((False, True), repeat=n):
        alive = [j for j in range(n) if not pattern[j]]
        # enumerate all words with exactly this erasure pattern
        digits = np.zeros((q ** len(alive), n), dtype=np.int64)
        if alive:
            grid = np.array(list(itertools.product(range(q), repeat=len(alive))), dtype=np.int64)
            digits[:, alive] = grid
        for j in range(n):
            if pattern[j]:
                digits[:, j] = q
        flat = digits @ weights_b
        if len(alive) >= k:
            use = alive[:k]
            coeffs = (digits[:, use] @ code.interpolation_matrix(use).T) % q
            out[flat] = coeffs @ weights_m
            ok[flat] = True
    return out, ok
