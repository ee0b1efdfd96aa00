"""Amplification of the field vacuum by N collectively coupled atoms.

Starting from the vacuum times the maximal ``S_x`` Dicke state, the leading
order evolution keeps the atoms in that state and puts the field in a
superposition of displaced number states ``exp(beta (a - a^dag))|n>`` with
``beta = (2g/omega)(N/2)``. The weights are the overlaps ``<n|exp(-beta (a - a^dag))|0>``,
recomputed from displacement elements on every call; they form a coherent
state with amplitude ``alpha_N = gN/omega``.

Photon statistics refer to the displaced number basis, in which the
distribution is stationary. The bare occupation ``<a^dag a>`` of the same
state oscillates as ``2 alpha_N^2 (1 - cos(omega t))``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import specfun
from .errors import ConfigError
from .models import GUARD_MARGIN, check_guard, recommended_n_max
from .operators import State, collective_spin, fock_ladder

LIMIT_MODES = ("fixed_g", "density_scaled_g")


def _displacement(N: int, g: float, omega: float) -> float:
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega}")
    return 2 * g * (N / 2) / omega


def _max_sx_vector(N: int, representation: str) -> np.ndarray:
    sx = collective_spin(N, representation)[0]
    w, Y = np.linalg.eigh(sx.matrix)
    v = Y[:, -1]
    # top eigenvalue is nondegenerate; fix its phase
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k]), sx.basis


def qamp_initial_state(N: int, n_max: int, representation: str = "block") -> State:
    """``|0> |N/2, S_x = N/2>`` on the Dicke-model basis (field index first)."""
    if n_max < 2:
        raise ConfigError(f"n_max must be >= 2, got {n_max}")
    spin, spin_basis = _max_sx_vector(N, representation)
    vac = np.zeros(n_max)
    vac[0] = 1.0
    from .operators import product_label

    field_basis = fock_ladder(n_max)[0].basis
    basis = [product_label(f, s) for f in field_basis for s in spin_basis]
    return State(np.kron(vac, spin), basis, normalized=True)


def leading_weights(N: int, g: float, omega: float, n_levels: int) -> np.ndarray:
    """Overlaps ``<[n; N/2, N/2] | 0, N/2, N/2>`` for ``n < n_levels``."""
    beta = _displacement(N, g, omega)
    return np.array([specfun.displacement_element(0, n, beta) for n in range(n_levels)])


def coherent_amplitude(N: int, g: float, omega: float) -> float:
    """``alpha_N`` read off the overlaps as ``c_1 / c_0``."""
    c = leading_weights(N, g, omega, 2)
    return float(c[1] / c[0])


def qamp_leading_evolution(N: int, g: float, omega: float, t: float, n_max: int, representation: str = "block") -> State:
    """``U_F(t)|psi(0)>``: displaced number states with coherent weights and phases ``E_{n,N/2} t``."""
    beta = _displacement(N, g, omega)
    check_guard(n_max, abs(beta))
    spin, spin_basis = _max_sx_vector(N, representation)
    n_levels = n_max - GUARD_MARGIN
    c = leading_weights(N, g, omega, n_levels)
    sx = N / 2
    energies = (np.arange(n_levels) - 4 * g**2 * sx**2 / omega**2) * omega
    D = specfun.displacement_matrix(n_max, beta)
    field_vec = D[:, :n_levels] @ (np.exp(-1j * energies * t) * c)
    from .operators import product_label

    field_basis = fock_ladder(n_max)[0].basis
    basis = [product_label(f, s) for f in field_basis for s in spin_basis]
    return State(np.kron(field_vec, spin), basis)


def dressed_photon_distribution(state: State, N: int, g: float, omega: float, n_max: int, representation: str = "block") -> np.ndarray:
    """``p_n = sum_{S_x} |<[n; S_x]|psi>|^2`` over all spin eigenvectors of ``S_x``."""
    sx = collective_spin(N, representation)[0]
    w, Y = np.linalg.eigh(sx.matrix)
    spin_dim = Y.shape[0]
    psi = state.amplitudes.reshape(n_max, spin_dim)
    p = np.zeros(n_max)
    for m, v in zip(w, Y.T):
        field = psi @ v.conj()
        D = specfun.displacement_matrix(n_max, 2 * g * m / omega)
        p += np.abs(D.T @ field) ** 2
    return p


@dataclass(frozen=True)
class QampReport:
    N: int
    g: float
    omega: float
    alpha: float
    mean_photons: float
    variance: float
    photon_distribution: list = field(repr=False)
    limit_mode: str = "fixed_g"
    n_max: int = 0

    @property
    def classicality(self) -> float:
        """Mandel-style ratio variance / mean (1 for a coherent state)."""
        return self.variance / self.mean_photons if self.mean_photons > 0 else 1.0

    mandel_ratio = classicality

    def bare_mean_photons(self, t: float) -> float:
        """``<a^dag a>`` of the leading-order state at time t."""
        return 2 * self.alpha**2 * (1 - math.cos(self.omega * t))

    def poisson_distance(self) -> float:
        """Total-variation distance to Poisson(alpha^2), counting mass beyond the truncation."""
        from scipy.stats import poisson

        n = np.arange(len(self.photon_distribution))
        q = poisson.pmf(n, self.alpha**2)
        p = np.asarray(self.photon_distribution)
        return float(0.5 * (np.abs(p - q).sum() + abs(poisson.sf(n[-1], self.alpha**2) - max(0.0, 1 - p.sum()))))

    def to_json(self) -> dict:
        d = asdict(self)
        d["mandel_ratio"] = self.classicality
        return d


def _report(N, g, omega, p, limit_mode, n_max) -> QampReport:
    n = np.arange(len(p))
    mean = float(np.dot(n, p))
    var = float(np.dot(n**2, p) - mean**2)
    return QampReport(
        N=N,
        g=g,
        omega=omega,
        alpha=coherent_amplitude(N, g, omega),
        mean_photons=mean,
        variance=var,
        photon_distribution=[float(x) for x in p],
        limit_mode=limit_mode,
        n_max=n_max,
    )


def qamp_report(
    N: int,
    g: float,
    omega: float,
    n_max: int | None = None,
    limit_mode: str = "fixed_g",
    representation: str | None = None,
) -> QampReport:
    """Leading-order photon statistics.

    Without ``representation`` only the field sector of the maximal Dicke
    state is built (cheap for large N). With ``"block"`` or ``"dense"`` the
    full state is constructed and projected numerically.
    """
    alpha = abs(_displacement(N, g, omega))
    n_max = n_max or recommended_n_max(alpha)
    check_guard(n_max, alpha)
    if representation is None:
        # same level cut as the full-state construction
        p = np.zeros(n_max)
        p[: n_max - GUARD_MARGIN] = leading_weights(N, g, omega, n_max - GUARD_MARGIN) ** 2
    else:
        state = qamp_leading_evolution(N, g, omega, 0.0, n_max, representation)
        p = dressed_photon_distribution(state, N, g, omega, n_max, representation)
    return _report(N, g, omega, p, limit_mode, n_max)


def scan_coupling(N: int, g0: float, limit_mode: str) -> float:
    if limit_mode == "fixed_g":
        return g0
    if limit_mode == "density_scaled_g":
        # g ~ V^(-1/2) with V ~ N at fixed density, normalized to g0 at N = 1
        return g0 / math.sqrt(N)
    raise ConfigError(f"limit_mode must be one of {LIMIT_MODES}, got {limit_mode!r}")


def qamp_scan(N_list: Sequence[int], g0: float, omega: float, limit_mode: str = "fixed_g", n_max: int | None = None) -> list[QampReport]:
    """One report per N, in input order."""
    out = []
    for N in N_list:
        g = scan_coupling(int(N), g0, limit_mode)
        out.append(qamp_report(int(N), g, omega, n_max, limit_mode))
    return out


QAMP_COLUMNS = ("N", "alpha", "mean_photons", "variance", "mandel_ratio")


def write_qamp_csv(reports: Sequence[QampReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["limit_mode", *QAMP_COLUMNS])
        for r in reports:
            w.writerow([r.limit_mode, r.N, *(f"{x:.17g}" for x in (r.alpha, r.mean_photons, r.variance, r.classicality))])
