"""Labeled finite-dimensional operators and states.

Operators carry the basis they are expressed in; arithmetic between objects
on different bases raises :class:`BasisMismatchError` instead of silently
combining matrices that happen to have the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from numbers import Number
from typing import Sequence, Union

import numpy as np

from .errors import BasisMismatchError

FLAG_TOL = 1e-10


# ---------------------------------------------------------------- labels


@dataclass(frozen=True)
class Fock:
    n: int

    def to_json(self):
        return {"kind": "fock", "n": self.n}

    def __str__(self):
        return f"|{self.n}>"


@dataclass(frozen=True)
class SpinHalf:
    """Eigenstate of sigma_z with eigenvalue ``s`` (+1 is basis index 0)."""

    s: int

    def __post_init__(self):
        if self.s not in (1, -1):
            raise ValueError(f"SpinHalf label must be +1 or -1, got {self.s}")

    def to_json(self):
        return {"kind": "spin_half", "s": self.s}

    def __str__(self):
        return "|up>" if self.s == 1 else "|dn>"


@dataclass(frozen=True)
class Dicke:
    """Collective state ``|S, S_x>``."""

    S: float
    Sx: float

    def __post_init__(self):
        if abs(self.Sx) > self.S + 1e-12:
            raise ValueError(f"Dicke label needs |Sx| <= S, got S={self.S}, Sx={self.Sx}")
        diff = self.S - self.Sx
        if abs(diff - round(diff)) > 1e-12:
            raise ValueError(f"S - Sx must be a non-negative integer, got {diff}")

    def to_json(self):
        return {"kind": "dicke", "S": self.S, "Sx": self.Sx}

    def __str__(self):
        return f"|S={self.S:g},Sx={self.Sx:g}>"


@dataclass(frozen=True)
class Product:
    parts: tuple

    def to_json(self):
        return {"kind": "product", "parts": [p.to_json() for p in self.parts]}

    def __str__(self):
        return "".join(str(p) for p in self.parts)


@dataclass(frozen=True)
class Eigen:
    """Label of a computed eigenvector, e.g. ``Eigen((("n", 3), ("lambda", 1)))``."""

    tags: tuple

    @classmethod
    def of(cls, **tags):
        return cls(tuple(tags.items()))

    def get(self, key, default=None):
        for k, v in self.tags:
            if k == key:
                return v
        return default

    def to_json(self):
        return {"kind": "eigen", "tags": {k: v for k, v in self.tags}}

    def __str__(self):
        return "|" + ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.tags) + ">"


BasisLabel = Union[Fock, SpinHalf, Dicke, Product, Eigen]


def label_from_json(obj) -> BasisLabel:
    kind = obj["kind"]
    if kind == "fock":
        return Fock(int(obj["n"]))
    if kind == "spin_half":
        return SpinHalf(int(obj["s"]))
    if kind == "dicke":
        return Dicke(float(obj["S"]), float(obj["Sx"]))
    if kind == "product":
        return Product(tuple(label_from_json(p) for p in obj["parts"]))
    if kind == "eigen":
        return Eigen(tuple(obj["tags"].items()))
    raise ValueError(f"unknown basis label kind {kind!r}")


def product_label(a: BasisLabel, b: BasisLabel) -> Product:
    left = a.parts if isinstance(a, Product) else (a,)
    right = b.parts if isinstance(b, Product) else (b,)
    return Product(left + right)


def index_basis(dim: int) -> tuple:
    return tuple(Eigen.of(index=i) for i in range(dim))


# ---------------------------------------------------------------- operators


def _frozen(array, dtype=complex):
    arr = np.array(array, dtype=dtype)
    arr.setflags(write=False)
    return arr


class Operator:
    """Dense complex matrix on a labeled basis. Immutable."""

    __slots__ = ("matrix", "basis")

    def __init__(self, matrix, basis: Sequence[BasisLabel] | None = None, *, hermitian=False, unitary=False):
        m = _frozen(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        basis = index_basis(m.shape[0]) if basis is None else tuple(basis)
        if len(basis) != m.shape[0]:
            raise ValueError(f"basis has {len(basis)} labels for dimension {m.shape[0]}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "basis", basis)
        if hermitian:
            dev = np.abs(m - m.conj().T).max(initial=0.0)
            if dev > FLAG_TOL:
                raise ValueError(f"operator flagged Hermitian deviates by {dev:.3e}")
        if unitary:
            dev = np.abs(m.conj().T @ m - np.eye(self.dim)).max(initial=0.0)
            if dev > FLAG_TOL:
                raise ValueError(f"operator flagged unitary deviates by {dev:.3e}")

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def _check(self, other):
        if self.basis != other.basis:
            raise BasisMismatchError(f"basis mismatch between operators of dims {self.dim} and {other.dim}")

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.basis)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.matrix @ other.matrix, self.basis)
        if isinstance(other, State):
            if self.basis != other.basis:
                raise BasisMismatchError("operator and state live on different bases")
            return State(self.matrix @ other.amplitudes, self.basis)
        return NotImplemented

    def __add__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        self._check(other)
        return Operator(self.matrix + other.matrix, self.basis)

    def __sub__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        self._check(other)
        return Operator(self.matrix - other.matrix, self.basis)

    def __neg__(self):
        return Operator(-self.matrix, self.basis)

    def __mul__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return Operator(scalar * self.matrix, self.basis)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return Operator(self.matrix / scalar, self.basis)

    def __repr__(self):
        return f"Operator(dim={self.dim})"

    def hermitian_deviation(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max(initial=0.0))

    def norm(self) -> float:
        """Spectral norm."""
        return float(np.linalg.norm(self.matrix, 2))

    def expectation(self, state: "State") -> complex:
        if self.basis != state.basis:
            raise BasisMismatchError("operator and state live on different bases")
        v = state.amplitudes
        return complex(np.vdot(v, self.matrix @ v) / np.vdot(v, v))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "basis": [b.to_json() for b in self.basis],
            "entries": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }

    @classmethod
    def from_json(cls, obj) -> "Operator":
        entries = np.array(obj["entries"], dtype=float)
        matrix = entries[..., 0] + 1j * entries[..., 1]
        if matrix.shape != (obj["dim"], obj["dim"]):
            raise ValueError("entries do not match dim")
        return cls(matrix, [label_from_json(b) for b in obj["basis"]])


class State:
    """Complex amplitude vector on a labeled basis. Immutable."""

    __slots__ = ("amplitudes", "basis")

    def __init__(self, amplitudes, basis: Sequence[BasisLabel] | None = None, *, normalized=False):
        v = _frozen(amplitudes)
        if v.ndim != 1:
            raise ValueError("state amplitudes must be a vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("state amplitudes must be finite")
        basis = index_basis(v.shape[0]) if basis is None else tuple(basis)
        if len(basis) != v.shape[0]:
            raise ValueError(f"basis has {len(basis)} labels for dimension {v.shape[0]}")
        object.__setattr__(self, "amplitudes", v)
        object.__setattr__(self, "basis", basis)
        if normalized and abs(self.norm() - 1.0) > FLAG_TOL:
            raise ValueError(f"state flagged normalized has norm {self.norm():.15f}")

    def __setattr__(self, name, value):
        raise AttributeError("State is immutable")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "State":
        return State(self.amplitudes / self.norm(), self.basis)

    def inner(self, other: "State") -> complex:
        """``<self|other>``."""
        if self.basis != other.basis:
            raise BasisMismatchError("states live on different bases")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"State(dim={self.dim}, norm={self.norm():.12g})"

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "basis": [b.to_json() for b in self.basis],
            "entries": [[float(z.real), float(z.imag)] for z in self.amplitudes],
        }

    @classmethod
    def from_json(cls, obj) -> "State":
        entries = np.array(obj["entries"], dtype=float).reshape(-1, 2)
        if entries.shape[0] != obj["dim"]:
            raise ValueError("entries do not match dim")
        return cls(entries[:, 0] + 1j * entries[:, 1], [label_from_json(b) for b in obj["basis"]])


def basis_state(basis: Sequence[BasisLabel], label: BasisLabel) -> State:
    basis = tuple(basis)
    v = np.zeros(len(basis), dtype=complex)
    v[basis.index(label)] = 1.0
    return State(v, basis)


# ---------------------------------------------------------------- constructors

SPIN_BASIS = (SpinHalf(1), SpinHalf(-1))

_PAULI = {
    "x": [[0, 1], [1, 0]],
    "y": [[0, -1j], [1j, 0]],
    "z": [[1, 0], [0, -1]],
}


def identity(basis_or_dim) -> Operator:
    if isinstance(basis_or_dim, int):
        return Operator(np.eye(basis_or_dim))
    basis = tuple(basis_or_dim)
    return Operator(np.eye(len(basis)), basis)


def pauli(axis: str) -> Operator:
    """Pauli matrix on the sigma_z basis ``(|up>, |dn>)``."""
    try:
        return Operator(_PAULI[axis], SPIN_BASIS)
    except KeyError:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}") from None


def fock_basis(n_max: int) -> tuple:
    return tuple(Fock(n) for n in range(n_max))


def fock_ladder(n_max: int) -> tuple[Operator, Operator]:
    """Annihilation and creation operators on ``|0>, ..., |n_max-1>``.

    The truncation makes ``[a, a^dagger]`` equal to the identity except for the
    last diagonal entry, which is ``-(n_max - 1)``.
    """
    if n_max < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max}")
    a = np.diag(np.sqrt(np.arange(1, n_max, dtype=float)), 1)
    basis = fock_basis(n_max)
    return Operator(a, basis), Operator(a.T, basis)


def commutator_truncation_defect(n_max: int) -> float:
    """Value of the top diagonal entry of ``[a, a^dagger]`` for a given truncation."""
    return -(n_max - 1.0)


def _spin_block(N: int):
    # maximal block S = N/2 in the S_x eigenbasis, Sx descending from +S
    S = N / 2.0
    m = S - np.arange(N + 1)
    # raising operator along x: <m+1|J+|m> = sqrt(S(S+1) - m(m+1)); index of m+1 is one lower
    jp = np.zeros((N + 1, N + 1))
    for i in range(1, N + 1):
        jp[i - 1, i] = math.sqrt(S * (S + 1) - m[i] * (m[i] + 1))
    jm = jp.T
    sx = np.diag(m)
    # cyclic relabeling (z, x, y) -> (x, y, z) keeps [S_i, S_j] = i eps_ijk S_k
    sy = (jp + jm) / 2.0
    sz = (jp - jm) / 2.0j
    basis = tuple(Dicke(S, float(mi)) for mi in m)
    return sx, sy, sz, basis


def _spin_dense(N: int):
    ops = {}
    for axis in "xyz":
        p = np.array(_PAULI[axis], dtype=complex) / 2.0
        total = np.zeros((2**N, 2**N), dtype=complex)
        for i in range(N):
            factors = [np.eye(2)] * N
            factors[i] = p
            total += reduce(np.kron, factors)
        ops[axis] = total
    basis = tuple(Product(tuple(SpinHalf(1 - 2 * ((idx >> (N - 1 - k)) & 1)) for k in range(N))) for idx in range(2**N))
    if N == 1:
        basis = SPIN_BASIS
    return ops["x"], ops["y"], ops["z"], basis


MAX_DENSE_SPINS = 12


def collective_spin(N: int, representation: str = "dense") -> tuple[Operator, Operator, Operator, Operator]:
    """Collective spin operators ``S_i = (1/2) sum_k sigma_i^(k)`` and ``S^2``.

    ``representation="dense"`` builds the full 2^N product space in the
    sigma_z basis; ``"block"`` builds only the maximal ``S = N/2`` block of
    dimension N+1, in the S_x eigenbasis with S_x descending.
    """
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    if representation == "dense":
        if N > MAX_DENSE_SPINS:
            raise ValueError(f"dense spin representation limited to N <= {MAX_DENSE_SPINS}, got {N}")
        sx, sy, sz, basis = _spin_dense(N)
    elif representation == "block":
        sx, sy, sz, basis = _spin_block(N)
    else:
        raise ValueError(f"representation must be 'dense' or 'block', got {representation!r}")
    s2 = sx @ sx + sy @ sy + sz @ sz
    return tuple(Operator(m, basis) for m in (sx, sy, sz, s2))


def tensor(A: Operator, B: Operator) -> Operator:
    """Kronecker product with product labels ``(a, b)``; ``a`` is the slow index."""
    basis = tuple(product_label(a, b) for a in A.basis for b in B.basis)
    return Operator(np.kron(A.matrix, B.matrix), basis)


def tensor_state(u: State, v: State) -> State:
    basis = tuple(product_label(a, b) for a in u.basis for b in v.basis)
    return State(np.kron(u.amplitudes, v.amplitudes), basis)


def commutator(A: Operator, B: Operator) -> Operator:
    return A @ B - B @ A
