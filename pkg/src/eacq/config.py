"""Tolerances and the desk-scale guard shared by every module."""

import os

from .errors import DomainError

# algebraic identities (trace, hermiticity, channel equalities)
TOL_ALG = 1e-12
# entropic and spectral checks
TOL_NUM = 1e-9

DEFAULT_MAX_DIM = 2**16


def max_dim() -> int:
    """Largest dense dimension allowed; ``EACQ_MAX_DIM`` overrides the default."""
    raw = os.environ.get("EACQ_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError as exc:
        raise DomainError(f"EACQ_MAX_DIM must be an integer, got {raw!r}") from exc
    if value < 1:
        raise DomainError("EACQ_MAX_DIM must be positive")
    return value


def check_dim(dim: int, what: str = "object") -> None:
    limit = max_dim()
    if dim > limit:
        raise DomainError(
            f"{what} has dimension {dim}, above the desk-scale limit {limit} "
            "(set EACQ_MAX_DIM to override)"
        )
