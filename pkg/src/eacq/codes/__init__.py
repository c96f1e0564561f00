"""Concrete EACQ codes, the protocols that move between them, and exact simulation."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import DomainError
from .code import EACQCode, classical_to_eacq, ideal_output, identity_code
from .eaq import max_ent_eaq_small
from .instrument import Instrument
from .pipeline import PipelineResult, code_bounds, simulate, verify_min_distance, witness_ensemble
from .protocols import concat, protocol_instrument
from .rs import RSCode, rs_encode, rs_erasure_decode

__all__ = [
    "EACQCode", "Instrument", "PipelineResult", "RSCode", "SHIPPED", "classical_to_eacq", "code_bounds",
    "concat", "ideal_output", "identity_code", "load_code", "max_ent_eaq_small", "protocol_instrument",
    "rs_encode", "rs_erasure_decode", "shipped_codes", "simulate", "verify_min_distance", "witness_ensemble",
]

# name -> spec string understood by load_code
SHIPPED = {
    "rs-5-4-2": "rs:5,4,2",
    "rs-7-6-4": "rs:7,6,4",
    "rs-5-4-2-teleport": "rs:5,4,2+teleport",
    "rs-7-6-4-teleport": "rs:7,6,4+teleport",
    "eaq-3-2-2": "eaq:3,2,2",
    "eaq-2-2-3": "eaq:2,2,3",
    "identity-2": "identity:2",
}


def _ints(text: str, count: int, what: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",")]
    except ValueError:
        raise DomainError(f"{what} needs {count} comma-separated integers, got {text!r}") from None
    if len(vals) != count:
        raise DomainError(f"{what} needs {count} comma-separated integers, got {text!r}")
    return vals


def _base(spec: str) -> EACQCode:
    if spec in SHIPPED:
        return load_code(SHIPPED[spec])
    kind, _, args = spec.partition(":")
    if kind == "rs":
        q, n, k = _ints(args, 3, "rs")
        return classical_to_eacq(RSCode(q, n, k))
    if kind == "eaq":
        n, d, q = _ints(args, 3, "eaq")
        return max_ent_eaq_small(n, d, q)
    if kind == "identity":
        (q,) = _ints(args, 1, "identity")
        return identity_code(q)
    path = Path(spec)
    if path.suffix == ".json" and path.exists():
        return EACQCode.from_json(json.loads(path.read_text()))
    raise DomainError(f"unknown code spec {spec!r}")


def load_code(spec: str) -> EACQCode:
    """Build a code from ``rs:q,n,k``, ``eaq:n,d,q``, ``identity:q``, a shipped name or a JSON path.

    Append ``+protocol`` or ``+protocol*reps`` to concatenate, e.g.
    ``rs:5,4,2+teleport+dense_code*2``.
    """
    base, *steps = spec.split("+")
    code = _base(base)
    for step in steps:
        kind, _, reps = step.partition("*")
        code = concat(code, kind, int(reps) if reps else 1)
    return code


def shipped_codes() -> dict[str, EACQCode]:
    return {name: load_code(spec) for name, spec in SHIPPED.items()}
