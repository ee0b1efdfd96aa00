"""Envelope resummation of the first-order series.

The secular generator ``G1`` becomes the generator of a slow evolution
``U_R(t) = exp(-i G1 t)`` that replaces the initial condition, and the
envelope of the local solutions ``U_F(t) S_D(t, t0) U_R(t0)`` at ``t0 = t`` is

    U(t) = U_F(t) [I - i sum_osc C (exp(-i nu t) - 1) / (-i nu)] U_R(t).

The renormalized phase has zero rate at first order; its value is carried
explicitly so the initial-time exponential reads ``exp(i nu phi)`` with ``phi = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dualdyson import FirstOrderSeries, detect_resonances, first_order, harmonic_decompose
from .errors import ProvenanceError
from .freepicture import SpectralDecomposition, dress
from .operators import Operator, State


@dataclass(frozen=True, eq=False)
class RgFlow:
    """Flow generator ``G1`` (eigenbasis matrix) and renormalized phase rate."""

    fos: FirstOrderSeries
    generator: np.ndarray
    phase_rate: float = 0.0
    order: int = 1

    def __post_init__(self):
        w, Y = np.linalg.eigh(self.generator)
        object.__setattr__(self, "_eig", (w, Y))

    def frame_evolution(self, t: float) -> np.ndarray:
        """``exp(-i G1 t)`` in the eigenbasis, built from the spectral decomposition of G1."""
        w, Y = self._eig
        return (Y * np.exp(-1j * w * t)[None, :]) @ Y.conj().T

    def phase(self, t: float) -> float:
        return self.phase_rate * t

    def generator_operator(self) -> Operator:
        return self.fos.generator_operator()


def rg_generator(fos: FirstOrderSeries) -> RgFlow:
    """Flow equations ``i dU_R/dt = G1 U_R`` and ``dphi/dt = 0`` at first order."""
    return RgFlow(fos=fos, generator=fos.generator.copy(), phase_rate=0.0, order=1)


def renormalized_evolution(flow: RgFlow, t: float) -> Operator:
    """``U_R(t)`` in the bare basis."""
    return flow.fos.to_bare(flow.frame_evolution(t))


@dataclass(frozen=True, eq=False)
class EnvelopeSolution:
    """Resummed first-order evolution operator."""

    decomp: SpectralDecomposition
    fos: FirstOrderSeries
    flow: RgFlow

    @property
    def dim(self) -> int:
        return self.decomp.dim

    def _free_phases(self, t: float) -> np.ndarray:
        return np.exp(1j * self.decomp.geometric_phases(t) - 1j * self.decomp.phases(t))

    def correction(self, t: float) -> np.ndarray:
        """``I - i X(t)`` in the eigenbasis, the bounded oscillatory factor."""
        X = self.fos.renormalized_oscillatory(t, self.flow.phase(t))
        return np.eye(self.dim) - 1j * self.fos.epsilon * X

    def frame_matrix(self, t: float) -> np.ndarray:
        """``U_F(t) U(t)`` expressed in the eigenbasis, i.e. the free-picture propagator."""
        return self.correction(t) @ self.flow.frame_evolution(t)

    def __call__(self, t: float) -> Operator:
        W = self.decomp.vectors
        M = self._free_phases(t)[:, None] * self.frame_matrix(t)
        return Operator(W @ M @ W.conj().T, self.decomp.bare_basis)

    def components(self, t: float) -> tuple[Operator, Operator, Operator]:
        """``(U_F, I + oscillatory correction, U_R)`` in the bare basis; their product is ``U(t)``."""
        from .freepicture import free_propagator

        return (
            free_propagator(self.decomp, t),
            self.fos.to_bare(self.correction(t)),
            renormalized_evolution(self.flow, t),
        )

    def local_solution(self, t: float, t0: float) -> Operator:
        """Member ``U_F(t) S_D(t, t0) U_R(t0)`` of the family whose envelope is ``U``.

        The initial-time exponentials carry the renormalized phase, so the
        member touches the envelope at ``t = t0``.
        """
        S = (
            np.eye(self.dim)
            - 1j * self.fos.secular(t, t0)
            - 1j * self.fos.renormalized_oscillatory(t, self.flow.phase(t0))
        )
        W = self.decomp.vectors
        M = self._free_phases(t)[:, None] * (S @ self.flow.frame_evolution(t0))
        return Operator(W @ M @ W.conj().T, self.decomp.bare_basis)

    def unresummed(self, t: float, t0: float = 0.0) -> Operator:
        """Plain first-order propagator ``U_F(t) S_D(t, t0) U_F(t0)^dagger`` with secular terms intact."""
        W = self.decomp.vectors
        M = self._free_phases(t)[:, None] * self.fos.S_D(t, t0) * self._free_phases(t0).conj()[None, :]
        return Operator(W @ M @ W.conj().T, self.decomp.bare_basis)

    def amplitudes(self, psi0, times, resummed: bool = True) -> np.ndarray:
        """Free-picture amplitudes ``c_n(t)`` on the eigenbasis, shape ``(len(times), dim)``."""
        c0 = self.decomp.vectors.conj().T @ _vector(psi0)
        out = np.empty((len(times), self.dim), dtype=complex)
        for i, t in enumerate(times):
            if resummed:
                out[i] = self.correction(t) @ (self.flow.frame_evolution(t) @ c0)
            else:
                out[i] = self.fos.S_D(t, 0.0) @ c0
        return out

    def apply(self, psi0, times) -> list[State]:
        """States ``U(t) psi0`` in the bare basis."""
        W = self.decomp.vectors
        amps = self.amplitudes(psi0, times)
        return [State(W @ (self._free_phases(t) * c), self.decomp.bare_basis) for t, c in zip(times, amps)]


def _vector(psi) -> np.ndarray:
    return psi.amplitudes if isinstance(psi, State) else np.asarray(psi, dtype=complex)


def assemble_envelope(decomp: SpectralDecomposition, fos: FirstOrderSeries, flow: RgFlow) -> EnvelopeSolution:
    if fos.decomp is not decomp:
        raise ProvenanceError("first-order series was built on a different decomposition")
    if flow.fos is not fos:
        raise ProvenanceError("RG flow was built from a different first-order series")
    return EnvelopeSolution(decomp=decomp, fos=fos, flow=flow)


def build_envelope(model, dressed: bool = False, tol: float | None = None, bessel_order: int | None = None):
    """Full pipeline from a model to its envelope solution.

    With ``dressed`` the secular generator is first moved into the
    perturbation (allowed only when it commutes with it, i.e. static
    perturbations), which puts its exact exponential into ``U_F`` and leaves
    only detuned terms for the series.
    """
    decomp = model.decompose()
    series = harmonic_decompose(model.h0, decomp, bessel_order)
    fos = first_order(series, detect_resonances(series, tol))
    if dressed:
        from .models import dressed_references

        h0, decomp = dress(model.h0, decomp, fos.generator, references=dressed_references(model), secondary=model.secondary)
        series = harmonic_decompose(h0, decomp, bessel_order)
        fos = first_order(series, detect_resonances(series, tol))
    flow = rg_generator(fos)
    return assemble_envelope(decomp, fos, flow)
