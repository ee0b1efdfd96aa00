"""Leading order of the strong-coupling expansion.

The perturbation is given as a sum of commuting terms ``V(t) = sum_j f_j(t) B_j``
so that its eigenvectors do not depend on time. The free-picture unitary is
then diagonal in that common eigenbasis,

    U_F(t) = sum_n exp(-i Phi_n(t)) |n><n|,   Phi_n(t) = sum_j <n|B_j|n> F_j(t),

with ``F_j`` the antiderivative of the profile ``f_j``. Geometric phases
vanish for constant eigenvectors and are kept only as an explicit zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigError, NonCommutingPerturbationError
from .operators import Eigen, Operator

DEGENERACY_TOL = 1e-8
HERMITIAN_TOL = 1e-10


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class Constant:
    def value(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def integral(self, t):
        return np.asarray(t, dtype=float)


@dataclass(frozen=True)
class Cosine:
    """``cos(omega t)`` drive profile."""

    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigError(f"drive frequency must be positive, got {self.omega}")

    def value(self, t):
        return np.cos(self.omega * np.asarray(t, dtype=float))

    def integral(self, t):
        return np.sin(self.omega * np.asarray(t, dtype=float)) / self.omega


@dataclass(frozen=True)
class Custom:
    """User-supplied profile; the antiderivative falls back to adaptive quadrature."""

    func: Callable[[float], float]
    antiderivative: Callable[[float], float] | None = None
    quad_tol: float = 1e-10

    def value(self, t):
        return np.vectorize(self.func, otypes=[float])(t)

    def integral(self, t):
        if self.antiderivative is not None:
            return np.vectorize(self.antiderivative, otypes=[float])(t)

        def one(s):
            val, _ = integrate.quad(self.func, 0.0, s, epsabs=self.quad_tol, epsrel=self.quad_tol, limit=200)
            return val

        return np.vectorize(one, otypes=[float])(t)


def as_terms(V) -> tuple:
    """Normalize a perturbation into a tuple of ``(Operator, profile)`` pairs."""
    if isinstance(V, Operator):
        return ((V, Constant()),)
    terms = tuple(V)
    for term in terms:
        if not (isinstance(term, tuple) and len(term) == 2 and isinstance(term[0], Operator)):
            raise TypeError("perturbation must be an Operator or a sequence of (Operator, profile) pairs")
    return terms


# ---------------------------------------------------------------- decomposition


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Common eigenbasis of the perturbation terms.

    ``vectors[:, n]`` is ``|n>``; ``weights[n, j] = <n|B_j|n>`` so that the
    eigenvalue at time t is ``weights[n] @ [f_j(t)]``.
    """

    vectors: np.ndarray
    weights: np.ndarray
    profiles: tuple
    labels: tuple
    degeneracy_classes: tuple
    bare_basis: tuple
    terms: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def eigenvalues(self, t: float = 0.0) -> np.ndarray:
        f = np.array([float(p.value(t)) for p in self.profiles])
        return self.weights @ f

    def phases(self, t: float) -> np.ndarray:
        """Dynamical phases ``int_0^t v_n(t') dt'``."""
        F = np.array([float(p.integral(t)) for p in self.profiles])
        return self.weights @ F

    def geometric_phases(self, t: float) -> np.ndarray:
        # constant eigenvectors carry no geometric phase
        return np.zeros(self.dim)

    def bands(self) -> list | None:
        """Band index of each eigenvector; None entries mark unlabeled vectors."""
        values = [lab.get("sigma") if isinstance(lab, Eigen) else None for lab in self.labels]
        return None if all(v is None for v in values) else values

    def to_frame(self, op: Operator | np.ndarray) -> np.ndarray:
        m = op.matrix if isinstance(op, Operator) else op
        return self.vectors.conj().T @ m @ self.vectors

    def to_bare(self, matrix: np.ndarray) -> Operator:
        return Operator(self.vectors @ matrix @ self.vectors.conj().T, self.bare_basis)

    def frame_operator(self, matrix: np.ndarray) -> Operator:
        return Operator(matrix, self.labels)


def _opnorm(m: np.ndarray) -> float:
    # induced infinity norm, an upper bound on the spectral norm
    return float(np.abs(m).sum(axis=1).max(initial=0.0))


def _split_clusters(values: np.ndarray, tol: float) -> list[slice]:
    out, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > tol:
            out.append(slice(start, i))
            start = i
    return out


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    mags = np.abs(vec)
    top = mags.max()
    # first index within rounding of the maximum, so exact ties stay deterministic
    idx = int(np.argmax(mags >= top * (1.0 - 1e-9)))
    return vec * (abs(vec[idx]) / vec[idx])


def spectral_decompose(
    V,
    secondary: Sequence[Operator] = (),
    hermitian: bool = True,
    references: Sequence[tuple[np.ndarray, Eigen]] | None = None,
    tol: float = DEGENERACY_TOL,
) -> SpectralDecomposition:
    """Eigenbasis of a perturbation with time-independent eigenvectors.

    Degenerate clusters (gap below ``tol * ||B||``) are resolved by
    diagonalizing each ``secondary`` observable inside the cluster in turn.
    Every eigenvector's largest component is made real and positive. When
    ``references`` are given, each eigenvector takes the label of the
    reference it overlaps with more than 1/2.
    """
    terms = as_terms(V)
    if not hermitian:
        raise ValueError("spectral_decompose requires a Hermitian perturbation")
    mats = [np.asarray(op.matrix) for op, _ in terms]
    basis = terms[0][0].basis
    for op, _ in terms:
        if op.basis != basis:
            raise ValueError("perturbation terms are on different bases")
        dev = op.hermitian_deviation()
        if dev > HERMITIAN_TOL * max(1.0, _opnorm(op.matrix)):
            raise ValueError(f"perturbation term is not Hermitian (deviation {dev:.3e})")
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            c = mats[i] @ mats[j] - mats[j] @ mats[i]
            scale = max(1.0, _opnorm(mats[i]) * _opnorm(mats[j]))
            if np.abs(c).max() > 1e-10 * scale:
                raise NonCommutingPerturbationError(
                    "perturbation terms do not commute, so its eigenvectors depend on time"
                )

    dim = mats[0].shape[0]
    observables = mats + [np.asarray(s.matrix) for s in secondary]
    clusters = [np.eye(dim, dtype=complex)]
    for A in observables:
        A = 0.5 * (A + A.conj().T)
        scale = max(_opnorm(A), 1e-300)
        refined = []
        for Q in clusters:
            if Q.shape[1] == 1:
                refined.append(Q)
                continue
            w, Y = np.linalg.eigh(Q.conj().T @ A @ Q)
            Q2 = Q @ Y
            for sl in _split_clusters(w, tol * scale):
                refined.append(Q2[:, sl])
        clusters = refined

    vectors = np.empty((dim, dim), dtype=complex)
    classes = []
    col = 0
    for Q in clusters:
        idx = []
        for k in range(Q.shape[1]):
            vectors[:, col] = _fix_phase(Q[:, k])
            idx.append(col)
            col += 1
        classes.append(tuple(idx))

    weights = np.stack([np.real(np.einsum("in,ij,jn->n", vectors.conj(), m, vectors)) for m in mats], axis=1)
    # degeneracy classes of the full perturbation (all terms at once)
    full_classes = _group_by_weights(weights, tol * max(1.0, max(_opnorm(m) for m in mats)))

    labels = _assign_labels(vectors, references)
    return SpectralDecomposition(
        vectors=vectors,
        weights=weights,
        profiles=tuple(p for _, p in terms),
        labels=labels,
        degeneracy_classes=full_classes,
        bare_basis=basis,
        terms=terms,
    )


def _group_by_weights(weights: np.ndarray, tol: float) -> tuple:
    groups: list[list[int]] = []
    reps: list[np.ndarray] = []
    for n, w in enumerate(weights):
        for g, r in zip(groups, reps):
            if np.abs(w - r).max() <= tol:
                g.append(n)
                break
        else:
            groups.append([n])
            reps.append(w)
    return tuple(tuple(g) for g in groups)


def _assign_labels(vectors: np.ndarray, references) -> tuple:
    dim = vectors.shape[1]
    labels = [Eigen.of(index=j) for j in range(dim)]
    if references:
        R = np.stack([np.asarray(v, dtype=complex) for v, _ in references], axis=1)
        overlap = np.abs(R.conj().T @ vectors) ** 2
        best = overlap.argmax(axis=0)
        for j in range(dim):
            if overlap[best[j], j] > 0.5:
                labels[j] = references[best[j]][1]
    return tuple(labels)


def check_static_eigenvectors(decomp: SpectralDecomposition, times: Sequence[float]) -> float:
    """Largest residual ``||V(t)|n> - v_n(t)|n>||`` over ``times``; zero for valid decompositions."""
    worst = 0.0
    for t in times:
        Vt = sum(float(p.value(t)) * op.matrix for op, p in decomp.terms)
        resid = Vt @ decomp.vectors - decomp.vectors * decomp.eigenvalues(t)[None, :]
        worst = max(worst, float(np.abs(resid).max()))
    return worst


# ---------------------------------------------------------------- free picture


def free_propagator(decomp: SpectralDecomposition, t: float) -> Operator:
    """``U_F(t)`` in the bare basis."""
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"time must be finite, got {t}")
    phase = np.exp(1j * decomp.geometric_phases(t) - 1j * decomp.phases(t))
    W = decomp.vectors
    return Operator((W * phase[None, :]) @ W.conj().T, decomp.bare_basis)


def transformed_hamiltonian(H0: Operator, decomp: SpectralDecomposition, t: float) -> Operator:
    """``H_F(t) = U_F(t)^dagger H0 U_F(t)`` in the bare basis."""
    if H0.dim != decomp.dim:
        raise ValueError(f"H0 has dimension {H0.dim}, decomposition {decomp.dim}")
    U = free_propagator(decomp, t)
    if H0.basis != U.basis:
        raise ValueError("H0 and the perturbation are on different bases")
    return U.dag() @ H0 @ U


@dataclass(frozen=True, eq=False)
class DressedSpectrum:
    """Diagonal energies ``h_0n = <n|H0|n>`` and coupling matrix in the eigenbasis."""

    decomp: SpectralDecomposition
    h0_diagonal: np.ndarray
    coupling: np.ndarray

    def total_energies(self, t: float) -> np.ndarray:
        """``eps_n(t) = h_0n + v_n(t)``."""
        return self.h0_diagonal + self.decomp.eigenvalues(t)

    def total_phases(self, t: float) -> np.ndarray:
        return self.h0_diagonal * t + self.decomp.phases(t)


def dressed_spectrum(decomp: SpectralDecomposition, H0: Operator) -> DressedSpectrum:
    M = decomp.to_frame(H0)
    return DressedSpectrum(decomp, np.real(np.diag(M)).copy(), M)


def amplitude_rhs(
    decomp: SpectralDecomposition, dressed: DressedSpectrum, H0: Operator, t: float, c: np.ndarray
) -> np.ndarray:
    """Time derivative of the free-picture amplitudes ``c_n``.

    With ``|psi_F> = sum_n c_n exp(-i int h_0n) |n>`` the amplitudes obey
    ``i dc_n/dt = sum_{k != n} exp(-i int (eps_k - eps_n)) <n|H0|k> c_k``.
    """
    if dressed.decomp is not decomp:
        raise ValueError("dressed spectrum was built from a different decomposition")
    M = dressed.coupling if H0 is None else decomp.to_frame(H0)
    theta = dressed.total_phases(t) + decomp.geometric_phases(t)
    off = M - np.diag(np.diag(M))
    phase = np.exp(1j * (theta[:, None] - theta[None, :]))
    return -1j * (phase * off) @ np.asarray(c, dtype=complex)


def dress(H0: Operator, decomp: SpectralDecomposition, generator: np.ndarray, references=None, secondary=()):
    """Move a secular generator from H0 into the perturbation.

    ``generator`` is a frame-basis matrix commuting with the perturbation.
    Returns ``(H0 - G, decomposition of V + G)`` where ``G`` is the generator in
    the bare basis; the new eigenbasis refines the old degenerate clusters.
    """
    G = decomp.to_bare(generator)
    G = Operator(0.5 * (G.matrix + G.matrix.conj().T), G.basis)
    terms = decomp.terms + ((G, Constant()),)
    new = spectral_decompose(terms, secondary=secondary, references=references)
    return H0 - G, new
