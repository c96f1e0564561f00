"""Finite-dimensional density matrices on labelled tensor layouts.

All entropies are in bits. States are immutable; every operation returns a
new object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.stats import unitary_group

from .config import TOL_ALG, TOL_NUM, check_dim
from .errors import DomainError, LayoutError, StateError

Prob = Union[Fraction, float]


@dataclass(frozen=True)
class SystemLayout:
    """Ordered tensor factors, each a ``(label, dim)`` pair."""

    parts: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        parts = tuple((str(label), int(dim)) for label, dim in self.parts)
        object.__setattr__(self, "parts", parts)
        labels = [label for label, _ in parts]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in layout {labels}")
        for label, dim in parts:
            if dim < 1:
                raise LayoutError(f"factor {label!r} has dimension {dim} < 1")

    @classmethod
    def of(cls, *parts: tuple[str, int]) -> "SystemLayout":
        return cls(tuple(parts))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.parts)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.parts)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.parts else 1

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; layout has {self.labels}") from None

    def dim_of(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.parts[self.index(lab)][1] for lab in labels], dtype=np.int64))

    def sub(self, labels: Iterable[str]) -> "SystemLayout":
        """Sub-layout on ``labels``, kept in this layout's order."""
        wanted = set(labels)
        for lab in wanted:
            self.index(lab)
        return SystemLayout(tuple(p for p in self.parts if p[0] in wanted))

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        return SystemLayout(self.parts + other.parts)

    def relabel(self, mapping: dict[str, str]) -> "SystemLayout":
        return SystemLayout(tuple((mapping.get(lab, lab), d) for lab, d in self.parts))


def _as_labels(labels) -> tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace matrix on a :class:`SystemLayout`.

    Construction checks hermiticity and trace at ``TOL_ALG``. Positivity is
    checked lazily by :meth:`check_positive` and by :func:`entropy`, which
    need the spectrum anyway.
    """

    layout: SystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        if not isinstance(self.layout, SystemLayout):
            object.__setattr__(self, "layout", SystemLayout(tuple(self.layout)))
        mat = np.asarray(self.matrix, dtype=complex)
        d = self.layout.dim
        check_dim(d, "density matrix")
        if mat.shape != (d, d):
            raise LayoutError(f"matrix shape {mat.shape} does not match layout dimension {d}")
        scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
        if mat.size and np.max(np.abs(mat - mat.conj().T)) > TOL_ALG * scale:
            raise StateError("matrix is not Hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > TOL_ALG:
            raise StateError(f"trace {tr!r} differs from 1")
        mat = (mat + mat.conj().T) / 2
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.layout.dim

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def check_positive(self) -> None:
        lam = self.eigenvalues()
        if lam.size and lam[0] < -TOL_NUM:
            raise StateError(f"negative eigenvalue {lam[0]:.3e}")

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def is_pure(self, tol: float = TOL_NUM) -> bool:
        return abs(self.purity() - 1.0) <= tol

    def top_vector(self) -> np.ndarray:
        """Eigenvector of the largest eigenvalue (the state vector of a pure state)."""
        lam, vecs = np.linalg.eigh(self.matrix)
        v = vecs[:, -1]
        k = int(np.argmax(np.abs(v)))
        return v * (abs(v[k]) / v[k])

    def relabel(self, mapping: dict[str, str]) -> "DensityMatrix":
        return DensityMatrix(self.layout.relabel(mapping), self.matrix)

    def __repr__(self):
        return f"DensityMatrix(layout={self.layout.parts}, dim={self.dim})"


# -- constructors -----------------------------------------------------------

def pure(vec, layout: SystemLayout) -> DensityMatrix:
    v = np.asarray(vec, dtype=complex).ravel()
    norm = np.linalg.norm(v)
    if norm == 0:
        raise StateError("zero vector")
    v = v / norm
    return DensityMatrix(layout, np.outer(v, v.conj()))


def basis_state(layout: SystemLayout, index: Sequence[int] | int) -> DensityMatrix:
    if not isinstance(index, (int, np.integer)):
        index = int(np.ravel_multi_index(tuple(index), layout.dims))
    v = np.zeros(layout.dim, dtype=complex)
    v[index] = 1
    return pure(v, layout)


def maximally_mixed(layout: SystemLayout) -> DensityMatrix:
    d = layout.dim
    return DensityMatrix(layout, np.eye(d) / d)


def max_entangled_vector(d: int) -> np.ndarray:
    """``sum_i |ii> / sqrt(d)``."""
    return np.eye(d, dtype=complex).ravel() / np.sqrt(d)


def max_entangled(a: str, b: str, d: int) -> DensityMatrix:
    return pure(max_entangled_vector(d), SystemLayout.of((a, d), (b, d)))


def classically_correlated(a: str, b: str, d: int) -> DensityMatrix:
    """Uniform perfectly correlated classical state on ``a b``."""
    diag = np.eye(d).ravel() / d
    return DensityMatrix(SystemLayout.of((a, d), (b, d)), np.diag(diag))


def diagonal(layout: SystemLayout, probs) -> DensityMatrix:
    return DensityMatrix(layout, np.diag(np.asarray(probs, dtype=float)))


# -- structural operations --------------------------------------------------

def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    overlap = set(a.labels) & set(b.labels)
    if overlap:
        raise LayoutError(f"duplicate labels {sorted(overlap)}")
    return DensityMatrix(a.layout.concat(b.layout), np.kron(a.matrix, b.matrix))


def tensor_all(states: Iterable[DensityMatrix]) -> DensityMatrix:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def partial_trace(s: DensityMatrix, keep) -> DensityMatrix:
    """Reduced state on ``keep`` (output factors follow the input layout order)."""
    keep = set(_as_labels(keep))
    for lab in keep:
        s.layout.index(lab)
    dims = s.layout.dims
    n = len(dims)
    k_axes = [i for i, lab in enumerate(s.labels) if lab in keep]
    t_axes = [i for i in range(n) if i not in k_axes]
    if not t_axes:
        return s
    dk = int(np.prod([dims[i] for i in k_axes], dtype=np.int64)) if k_axes else 1
    dt = int(np.prod([dims[i] for i in t_axes], dtype=np.int64))
    tens = s.matrix.reshape(dims + dims)
    perm = k_axes + t_axes + [n + i for i in k_axes] + [n + i for i in t_axes]
    tens = tens.transpose(perm).reshape(dk, dt, dk, dt)
    red = np.einsum("ijkj->ik", tens)
    return DensityMatrix(s.layout.sub(keep), red)


def permute(s: DensityMatrix, order: Sequence[str]) -> DensityMatrix:
    """Reorder the tensor factors to ``order`` (must be a permutation of the labels)."""
    order = list(order)
    if sorted(order) != sorted(s.labels):
        raise LayoutError(f"{order} is not a permutation of {s.labels}")
    dims = s.layout.dims
    n = len(dims)
    axes = [s.layout.index(lab) for lab in order]
    tens = s.matrix.reshape(dims + dims).transpose(axes + [n + a for a in axes])
    layout = SystemLayout(tuple(s.layout.parts[a] for a in axes))
    return DensityMatrix(layout, tens.reshape(s.dim, s.dim))


def conjugate(s: DensityMatrix, u: np.ndarray) -> DensityMatrix:
    return DensityMatrix(s.layout, u @ s.matrix @ u.conj().T)


# -- entropic quantities ----------------------------------------------------

def _spectral_entropy(lam: np.ndarray) -> float:
    if lam.size and lam.min() < -TOL_NUM:
        raise StateError(f"negative eigenvalue {lam.min():.3e}")
    lam = np.clip(lam, 0.0, 1.0)
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log2(lam))) + 0.0


def entropy(s: DensityMatrix, labels=None) -> float:
    """Von Neumann entropy in bits, optionally of the marginal on ``labels``."""
    if labels is not None:
        labels = _as_labels(labels)
        if not labels:
            return 0.0
        s = partial_trace(s, labels)
    return _spectral_entropy(np.linalg.eigvalsh(s.matrix))


def conditional_entropy(s: DensityMatrix, a, b) -> float:
    """``S(A|B) = S(AB) - S(B)``."""
    a, b = _as_labels(a), _as_labels(b)
    if set(a) & set(b):
        raise LayoutError(f"overlapping label sets {a} and {b}")
    return entropy(s, a + b) - entropy(s, b)


def coherent_information(s: DensityMatrix, a, b) -> float:
    """``I(A>B) = -S(A|B)``."""
    return -conditional_entropy(s, a, b)


def mutual_information(s: DensityMatrix, a, b) -> float:
    a, b = _as_labels(a), _as_labels(b)
    if set(a) & set(b):
        raise LayoutError(f"overlapping label sets {a} and {b}")
    return entropy(s, a) + entropy(s, b) - entropy(s, a + b)


def conditional_mutual_information(s: DensityMatrix, a, c, b) -> float:
    """``I(A:C|B) = S(AB) + S(BC) - S(B) - S(ABC)``."""
    a, b, c = _as_labels(a), _as_labels(b), _as_labels(c)
    return entropy(s, a + b) + entropy(s, b + c) - entropy(s, b) - entropy(s, a + b + c)


def trace_distance(s: DensityMatrix, r: DensityMatrix) -> float:
    if s.layout != r.layout:
        raise LayoutError(f"layout mismatch: {s.layout.parts} vs {r.layout.parts}")
    lam = np.linalg.eigvalsh(s.matrix - r.matrix)
    return float(min(1.0, 0.5 * np.sum(np.abs(lam))))


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy needs x in [0,1], got {x}")
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * np.log2(x) - (1 - x) * np.log2(1 - x))


def g_function(x: float) -> float:
    """``g(x) = (x+1) log(x+1) - x log x``, the Alicki-Fannes correction."""
    if x < 0:
        raise DomainError(f"g needs x >= 0, got {x}")
    if x == 0:
        return 0.0
    return float((x + 1) * np.log2(x + 1) - x * np.log2(x))


# -- random states ----------------------------------------------------------

def random_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_pure(layout: SystemLayout, rng: np.random.Generator) -> DensityMatrix:
    """Haar-random pure state: a normalized complex Gaussian vector."""
    return pure(random_vector(layout.dim, rng), layout)


def random_mixed(layout: SystemLayout, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Induced-measure mixed state: marginal of a random pure state with a rank-sized ancilla."""
    rank = layout.dim if rank is None else rank
    psi = random_vector(layout.dim * rank, rng).reshape(layout.dim, rank)
    return DensityMatrix(layout, psi @ psi.conj().T)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return unitary_group.rvs(dim, random_state=rng)


# -- classical-quantum ensembles ---------------------------------------------

@dataclass(frozen=True, eq=False)
class CQEnsemble:
    """``sum_u p(u) |u><u| (x) state_u`` with all states on one layout."""

    items: tuple[tuple[Prob, DensityMatrix], ...]

    def __post_init__(self):
        items = tuple((p, s) for p, s in self.items)
        if not items:
            raise DomainError("empty ensemble")
        layout = items[0][1].layout
        for p, s in items:
            if s.layout != layout:
                raise LayoutError("ensemble states must share one layout")
            if float(p) < 0:
                raise DomainError(f"negative probability {p}")
        total = sum(float(p) for p, _ in items)
        if abs(total - 1.0) > TOL_ALG:
            raise DomainError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "items", items)

    @property
    def layout(self) -> SystemLayout:
        return self.items[0][1].layout

    @property
    def probs(self) -> np.ndarray:
        return np.array([float(p) for p, _ in self.items])

    @property
    def states(self) -> list[DensityMatrix]:
        return [s for _, s in self.items]

    def __len__(self):
        return len(self.items)

    def shannon(self) -> float:
        p = self.probs
        p = p[p > 0]
        return float(-np.sum(p * np.log2(p)))

    def average(self, labels=None) -> DensityMatrix:
        """``E_u state_u``, optionally reduced to ``labels``."""
        states = self.states if labels is None else [partial_trace(s, labels) for s in self.states]
        mat = sum(float(p) * s.matrix for (p, _), s in zip(self.items, states))
        return DensityMatrix(states[0].layout, mat)

    def entropy(self, labels, with_u: bool = False) -> float:
        """``S(labels U)`` if ``with_u`` else ``S(labels)``, from the block structure."""
        labels = _as_labels(labels)
        if with_u:
            cond = sum(float(p) * entropy(s, labels) for p, s in self.items if float(p) > 0)
            return self.shannon() + cond
        if not labels:
            return 0.0
        return entropy(self.average(labels))

    def conditional_entropy_given_u(self, labels) -> float:
        """``S(labels | U) = E_u S(state_u on labels)``."""
        return self.entropy(labels, with_u=True) - self.shannon()

    def map(self, fn) -> "CQEnsemble":
        return CQEnsemble(tuple((p, fn(s)) for p, s in self.items))

    def to_density_matrix(self, u_label: str = "U") -> DensityMatrix:
        """Materialize the classical register as a genuine Hilbert factor (first factor)."""
        k = len(self.items)
        layout = SystemLayout(((u_label, k),) + self.layout.parts)
        d = self.layout.dim
        mat = np.zeros((k * d, k * d), dtype=complex)
        for u, (p, s) in enumerate(self.items):
            mat[u * d:(u + 1) * d, u * d:(u + 1) * d] = float(p) * s.matrix
        return DensityMatrix(layout, mat)


# -- JSON -------------------------------------------------------------------

def _matrix_to_json(mat: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(mat)]


def _matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 3:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)


def layout_to_json(layout: SystemLayout) -> list:
    return [[lab, d] for lab, d in layout.parts]


def layout_from_json(data) -> SystemLayout:
    return SystemLayout(tuple((lab, int(d)) for lab, d in data))


def state_to_json(s: DensityMatrix) -> dict:
    return {"layout": layout_to_json(s.layout), "matrix": _matrix_to_json(s.matrix)}


def state_from_json(data: dict) -> DensityMatrix:
    return DensityMatrix(layout_from_json(data["layout"]), _matrix_from_json(data["matrix"]))


def parse_prob(p) -> Prob:
    if isinstance(p, str):
        return Fraction(p)
    if isinstance(p, int):
        return Fraction(p)
    return float(p)


def ensemble_to_json(ens: CQEnsemble) -> dict:
    items = []
    for p, s in ens.items:
        items.append({"p": str(p) if isinstance(p, Fraction) else float(p), "state": state_to_json(s)})
    return {"items": items}


def ensemble_from_json(data: dict) -> CQEnsemble:
    return CQEnsemble(tuple((parse_prob(it["p"]), state_from_json(it["state"])) for it in data["items"]))


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)
