"""Harmonic expansion of the free-picture Hamiltonian and its first-order series.

In the eigenbasis of the perturbation, ``H_F(t)`` has entries

    <n|H_F(t)|k> = <n|H0|k> exp(i (Phi_n(t) - Phi_k(t)))

and each phase difference is ``da t + db sin(omega t)``. Expanding with
``exp(i z sin x) = sum_p J_p(z) exp(i p x)`` turns ``H_F`` into a finite sum
``sum_j C_j exp(-i nu_j t) |n_j><k_j|`` with ``nu_j = -(da + p omega)``.
Terms with ``nu = 0`` integrate to secular growth, the rest to bounded
oscillations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import specfun
from .errors import ConfigError, ProvenanceError, TruncationTailError
from .freepicture import Constant, Cosine, SpectralDecomposition
from .operators import Operator

TAIL_TOL = 1e-10
AMPLITUDE_TAIL_TOL = 1e-13
DROP_REL = 1e-14


class NearResonanceWarning(UserWarning):
    """An oscillatory term has a detuning small enough to inflate its correction."""


def _phase_coefficients(decomp: SpectralDecomposition):
    """Split each phase ``Phi_n(t)`` into ``a_n t + b_n sin(omega t)``."""
    a = np.zeros(decomp.dim)
    b = np.zeros(decomp.dim)
    omega = None
    for j, prof in enumerate(decomp.profiles):
        if isinstance(prof, Constant):
            a += decomp.weights[:, j]
        elif isinstance(prof, Cosine):
            if omega is not None and not math.isclose(prof.omega, omega, rel_tol=1e-15):
                raise ConfigError("harmonic expansion supports a single drive frequency")
            omega = prof.omega
            b += decomp.weights[:, j] / prof.omega
        else:
            raise ConfigError(f"profile {type(prof).__name__} has no harmonic expansion")
    return a, b, omega


def _tail_terms(z: float, order: int) -> np.ndarray:
    # J_p(z) for p = order+1 .. order+extra, far enough that the rest is negligible
    extra = 40 + int(abs(z))
    return np.array([specfun.bessel_j(p, z) for p in range(order + 1, order + 1 + extra)])


def bessel_tail(z: float, order: int) -> float:
    """Weight ``sum_{|p| > order} J_p(z)^2`` left out of a cut Jacobi-Anger sum."""
    return float(2.0 * np.sum(_tail_terms(z, order) ** 2))


def bessel_amplitude_tail(z: float, order: int) -> float:
    """``sum_{|p| > order} |J_p(z)|``, a bound on the reconstruction error per unit coefficient."""
    return float(2.0 * np.sum(np.abs(_tail_terms(z, order))))


def suggested_order(z: float, tol: float = TAIL_TOL) -> int:
    """Smallest order whose tail weight is below ``tol``."""
    k = 0
    while bessel_tail(z, k) > tol:
        k += 1
    return k


def default_order(z: float, tol: float = AMPLITUDE_TAIL_TOL) -> int:
    """Smallest order whose amplitude tail is below ``tol``."""
    k = suggested_order(z)
    while bessel_amplitude_tail(z, k) > tol:
        k += 1
    return k


@dataclass(frozen=True, eq=False)
class HarmonicSeries:
    """``H_F(t) = sum_j coefs[j] exp(-i freqs[j] t) |rows[j]><cols[j]|`` in the eigenbasis."""

    decomp: SpectralDecomposition
    rows: np.ndarray
    cols: np.ndarray
    freqs: np.ndarray
    coefs: np.ndarray
    scale: float
    bessel_order: int
    tail: float
    h0_norm: float = field(default=1.0)

    @property
    def dim(self) -> int:
        return self.decomp.dim

    def __len__(self) -> int:
        return len(self.freqs)

    def evaluate(self, t: float) -> np.ndarray:
        """Eigenbasis matrix of ``H_F(t)``."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        np.add.at(out, (self.rows, self.cols), self.coefs * np.exp(-1j * self.freqs * t))
        return out

    def to_bare(self, t: float) -> Operator:
        return self.decomp.to_bare(self.evaluate(t))

    def terms(self, group_tol: float | None = None) -> list[tuple[float, Operator]]:
        """``(nu, A_nu)`` pairs with equal frequencies merged, sorted by frequency."""
        tol = 1e-12 * self.scale if group_tol is None else group_tol
        order = np.lexsort((self.cols, self.rows, self.freqs))
        out = []
        start = 0
        for i in range(1, len(order) + 1):
            if i == len(order) or self.freqs[order[i]] - self.freqs[order[i - 1]] > tol:
                sel = order[start:i]
                M = np.zeros((self.dim, self.dim), dtype=complex)
                np.add.at(M, (self.rows[sel], self.cols[sel]), self.coefs[sel])
                out.append((float(np.mean(self.freqs[sel])), self.decomp.to_bare(M)))
                start = i
        return out

    def to_json(self) -> dict:
        return {
            "scale": self.scale,
            "bessel_order": self.bessel_order,
            "tail": self.tail,
            "terms": [{"frequency": nu, "operator": op.to_json()} for nu, op in self.terms()],
        }


def harmonic_decompose(h0: Operator, decomp: SpectralDecomposition, bessel_order: int | None = None) -> HarmonicSeries:
    """Exact harmonic list of ``H_F`` for constant and single-frequency cosine profiles.

    ``bessel_order`` bounds ``|p|``. By default the summed magnitude of the
    dropped Bessel coefficients is below 1e-13; an explicit order is refused
    when it leaves more than 1e-10 of the Jacobi-Anger weight behind.
    """
    if h0.basis != decomp.bare_basis:
        raise ProvenanceError("H0 and the decomposition live on different bases")
    a, b, omega = _phase_coefficients(decomp)
    M = decomp.to_frame(h0)
    h0_norm = float(np.abs(M).sum(axis=1).max(initial=0.0))
    # entries at roundoff level are artifacts of the basis change
    n_idx, k_idx = np.nonzero(np.abs(M) > DROP_REL * h0_norm)
    m_vals = M[n_idx, k_idx]
    da = a[n_idx] - a[k_idx]
    db = b[n_idx] - b[k_idx]
    scale = omega if omega is not None else max(float(np.abs(a).max(initial=0.0)), h0_norm, 1.0)
    if omega is None or not np.any(db != 0):
        K, tail = 0, 0.0
    else:
        zmax = float(np.abs(db).max())
        K = default_order(zmax) if bessel_order is None else int(bessel_order)
        tail = bessel_tail(zmax, K)
        if tail > TAIL_TOL:
            raise TruncationTailError(
                f"Bessel order {K} leaves tail weight {tail:.3e} at argument {zmax:.6g}; "
                f"use bessel_order >= {suggested_order(zmax)}"
            )

    flat = (db == 0.0) if omega is not None else np.ones(da.shape, dtype=bool)
    rows, cols, freqs, coefs = [n_idx[flat]], [k_idx[flat]], [-da[flat]], [m_vals[flat]]
    cache: dict[float, np.ndarray] = {}
    p = np.arange(-K, K + 1)
    for n, k, m, x, z in zip(n_idx[~flat], k_idx[~flat], m_vals[~flat], da[~flat], db[~flat]):
        if z not in cache:
            cache[z] = specfun.bessel_table(z, K)
        rows.append(np.full(p.size, n))
        cols.append(np.full(p.size, k))
        freqs.append(-(x + p * omega))
        coefs.append(m * cache[z])
    if sum(len(r) for r in rows):
        rows_a = np.concatenate(rows).astype(int)
        cols_a = np.concatenate(cols).astype(int)
        freqs_a = np.concatenate(freqs).astype(float)
        coefs_a = np.concatenate(coefs).astype(complex)
        keep = np.abs(coefs_a) > DROP_REL * max(float(np.abs(coefs_a).max()), 1e-300)
        rows_a, cols_a, freqs_a, coefs_a = rows_a[keep], cols_a[keep], freqs_a[keep], coefs_a[keep]
    else:
        rows_a = cols_a = np.zeros(0, dtype=int)
        freqs_a = np.zeros(0)
        coefs_a = np.zeros(0, dtype=complex)
    # deterministic order: frequency, then basis indices
    order = np.lexsort((cols_a, rows_a, freqs_a))
    return HarmonicSeries(
        decomp=decomp,
        rows=rows_a[order],
        cols=cols_a[order],
        freqs=freqs_a[order],
        coefs=coefs_a[order],
        scale=float(scale),
        bessel_order=K,
        tail=tail,
        h0_norm=h0_norm,
    )


@dataclass(frozen=True, eq=False)
class ResonanceSet:
    """Partition of a harmonic series into secular (``|nu| <= tol``) and oscillatory entries."""

    series: HarmonicSeries
    tol: float
    secular: np.ndarray
    kinds: tuple

    @property
    def oscillatory(self) -> np.ndarray:
        return ~self.secular

    @property
    def delta_min(self) -> float:
        osc = np.abs(self.series.freqs[self.oscillatory])
        return float(osc.min()) if osc.size else math.inf

    def secular_terms(self) -> list[tuple]:
        """``(row, col, nu, coefficient, kind)`` for each secular entry."""
        s = self.series
        idx = np.flatnonzero(self.secular)
        return [(int(s.rows[i]), int(s.cols[i]), float(s.freqs[i]), complex(s.coefs[i]), k) for i, k in zip(idx, self.kinds)]

    def oscillatory_terms(self) -> list[tuple]:
        """``(row, col, nu, coefficient)`` for each oscillatory entry."""
        s = self.series
        idx = np.flatnonzero(self.oscillatory)
        return [(int(s.rows[i]), int(s.cols[i]), float(s.freqs[i]), complex(s.coefs[i])) for i in idx]


def detect_resonances(series: HarmonicSeries, tol: float | None = None) -> ResonanceSet:
    """Classify entries by detuning; ``tol`` defaults to ``1e-8`` times the frequency scale.

    Secular entries are tagged ``diagonal``, ``intraband`` or ``interband`` when
    the eigenvectors carry band labels, otherwise ``None``.
    """
    tol = 1e-8 * series.scale if tol is None else float(tol)
    if not tol > 0:
        raise ConfigError(f"resonance tolerance must be positive, got {tol}")
    nu = np.abs(series.freqs)
    secular = nu <= tol
    near = (~secular) & (nu < 1e-2 * series.scale)
    if near.any():
        warnings.warn(
            f"{int(near.sum())} oscillatory terms with detuning below 1e-2 of the frequency scale "
            f"(smallest {nu[near].min():.3e}); first-order corrections may be large",
            NearResonanceWarning,
            stacklevel=2,
        )
    bands = series.decomp.bands()
    kinds = []
    for i in np.flatnonzero(secular):
        n, k = int(series.rows[i]), int(series.cols[i])
        if n == k:
            kinds.append("diagonal")
        elif bands is None or bands[n] is None or bands[k] is None:
            kinds.append(None)
        else:
            kinds.append("intraband" if bands[n] == bands[k] else "interband")
    return ResonanceSet(series=series, tol=tol, secular=secular, kinds=tuple(kinds))


@dataclass(frozen=True, eq=False)
class FirstOrderSeries:
    """``S_D(t, t0) = I - i eps f1(t, t0)`` with the secular generator kept apart.

    ``f1 = G1 (t - t0) + sum_osc C (exp(-i nu t) - exp(-i nu t0)) / (-i nu)``.
    All matrices are in the perturbation eigenbasis; ``to_bare`` converts.
    """

    series: HarmonicSeries
    resonances: ResonanceSet
    generator: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    freqs: np.ndarray
    coefs: np.ndarray
    order: int = 1
    epsilon: float = 1.0

    @property
    def decomp(self) -> SpectralDecomposition:
        return self.series.decomp

    @property
    def dim(self) -> int:
        return self.series.dim

    def _osc_matrix(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        np.add.at(out, (self.rows, self.cols), values)
        return out

    def secular(self, t: float, t0: float = 0.0) -> np.ndarray:
        return self.generator * (t - t0)

    def oscillatory(self, t: float, t0: float = 0.0) -> np.ndarray:
        nu = self.freqs
        vals = self.coefs * (np.exp(-1j * nu * t) - np.exp(-1j * nu * t0)) / (-1j * nu)
        return self._osc_matrix(vals)

    def renormalized_oscillatory(self, t: float, phase: float = 0.0) -> np.ndarray:
        """Oscillatory part with the initial-time exponential replaced by ``exp(i nu phase)``."""
        nu = self.freqs
        vals = self.coefs * (np.exp(-1j * nu * t) - np.exp(1j * nu * phase)) / (-1j * nu)
        return self._osc_matrix(vals)

    def f1(self, t: float, t0: float = 0.0) -> np.ndarray:
        return self.secular(t, t0) + self.oscillatory(t, t0)

    def S_D(self, t: float, t0: float = 0.0) -> np.ndarray:
        return np.eye(self.dim) - 1j * self.epsilon * self.f1(t, t0)

    def evaluate(self, t: float, t0: float = 0.0) -> Operator:
        """``S_D(t, t0)`` in the bare basis."""
        return self.to_bare(self.S_D(t, t0))

    def to_bare(self, matrix: np.ndarray) -> Operator:
        return self.decomp.to_bare(matrix)

    def generator_operator(self) -> Operator:
        return Operator(self.to_bare(self.generator).matrix, self.decomp.bare_basis, hermitian=True)


def first_order(series: HarmonicSeries, resonances: ResonanceSet) -> FirstOrderSeries:
    """Integrate the harmonic series term by term, leaving secular terms linear in time."""
    if resonances.series is not series:
        raise ProvenanceError("resonance set was detected on a different harmonic series")
    sec = resonances.secular
    G = np.zeros((series.dim, series.dim), dtype=complex)
    np.add.at(G, (series.rows[sec], series.cols[sec]), series.coefs[sec])
    G = 0.5 * (G + G.conj().T)
    osc = ~sec
    return FirstOrderSeries(
        series=series,
        resonances=resonances,
        generator=G,
        rows=series.rows[osc],
        cols=series.cols[osc],
        freqs=series.freqs[osc],
        coefs=series.coefs[osc],
    )
