"""Bundled Hamiltonians ``H(t) = H0 + V(t)`` with their analytic structure.

* driven two-level atom: ``H0 = (Delta/2) sigma_z``, ``V = g sigma_x cos(omega t)``
* quantum Rabi model: ``H0 = (Delta/2) sigma_z``, ``V = omega a^dag a + g sigma_x (a + a^dag)``
* Dicke model: ``H0 = Delta S_z``, ``V = omega a^dag a + 2 g S_x (a + a^dag)``

Composite bases put the field first: index ``n * dim_spin + s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import specfun
from .errors import ConfigError, TruncationGuardError
from .freepicture import Constant, Cosine, spectral_decompose
from .operators import (
    SPIN_BASIS,
    Eigen,
    Operator,
    State,
    collective_spin,
    fock_ladder,
    identity,
    pauli,
    tensor,
)

GUARD_MARGIN = 10
GUARD_TAIL = 1e-10
MAX_DENSE_DIM = 4096


def recommended_n_max(alpha: float) -> int:
    """Conservative truncation ``alpha^2 + 10 alpha + 50`` for displacement ``alpha``."""
    a = abs(alpha)
    return int(math.ceil(a * a + 10 * a + 50))


def truncation_tail(n_max: int, alpha: float) -> float:
    """Weight of the displaced vacuum above ``n_max - GUARD_MARGIN``."""
    return specfun.coherent_tail(n_max - GUARD_MARGIN, abs(alpha))


def check_guard(n_max: int, alpha: float) -> None:
    tail = truncation_tail(n_max, alpha)
    if tail > GUARD_TAIL:
        raise TruncationGuardError(
            f"n_max={n_max} leaves weight {tail:.3e} above n_max-{GUARD_MARGIN} for displacement "
            f"{abs(alpha):.6g}; use n_max >= {minimal_n_max(alpha)} (conservative: {recommended_n_max(alpha)})"
        )


def minimal_n_max(alpha: float) -> int:
    n = GUARD_MARGIN + 1
    while truncation_tail(n, alpha) > GUARD_TAIL:
        n += 1
    return n


def reliable_levels(n_max: int, alpha: float, tol: float = 1e-12) -> int:
    """Number of displaced number states ``D(alpha)|n>`` that fit in the truncation.

    Level n counts when its weight outside ``|0>..|n_max-1>`` is below ``tol``.
    """
    D = specfun.displacement_matrix(n_max, abs(alpha))
    tail = 1.0 - np.sum(D**2, axis=0)
    ok = tail < tol
    return int(np.argmin(ok)) if not ok.all() else n_max


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A Hamiltonian split into H0 and a perturbation with constant eigenvectors."""

    name: str
    params: dict
    h0: Operator
    drive: tuple
    secondary: tuple = ()
    closed_form: Any = None
    displacement: float = 0.0
    scale: float = 1.0
    references: tuple = field(default=(), repr=False)

    @property
    def dim(self) -> int:
        return self.h0.dim

    @property
    def basis(self) -> tuple:
        return self.h0.basis

    @property
    def is_static(self) -> bool:
        return all(isinstance(p, Constant) for _, p in self.drive)

    @property
    def drive_frequency(self) -> float | None:
        freqs = {p.omega for _, p in self.drive if isinstance(p, Cosine)}
        if len(freqs) > 1:
            return None
        return freqs.pop() if freqs else None

    @property
    def period(self) -> float | None:
        w = self.drive_frequency
        return None if w is None else 2 * math.pi / w

    def perturbation(self, t: float) -> Operator:
        m = sum(float(p.value(t)) * op.matrix for op, p in self.drive)
        return Operator(m, self.basis)

    def hamiltonian(self, t: float) -> np.ndarray:
        return self.h0.matrix + sum(float(p.value(t)) * op.matrix for op, p in self.drive)

    def decompose(self):
        return spectral_decompose(self.drive, secondary=self.secondary, references=self.references or None)


# ---------------------------------------------------------------- driven two-level


@dataclass(frozen=True)
class TwoLevelClosedForm:
    delta: float
    g: float
    omega: float

    @property
    def z(self) -> float:
        return 2 * self.g / self.omega

    def phase(self, sign: int, t):
        """Dynamical phase of the sigma_x eigenvector with eigenvalue ``sign``."""
        return sign * (self.g / self.omega) * np.sin(self.omega * np.asarray(t, dtype=float))

    def free_propagator(self, t: float) -> np.ndarray:
        """``exp(-i sigma_x (g/omega) sin(omega t))``."""
        th = (self.g / self.omega) * math.sin(self.omega * t)
        return np.array([[math.cos(th), -1j * math.sin(th)], [-1j * math.sin(th), math.cos(th)]])

    @property
    def rabi_frequency(self) -> float:
        """Renormalized Rabi frequency ``Delta J_0(2g/omega)``."""
        return self.delta * specfun.bessel_j(0, self.z)


SIGMA_X_STATES = {1: np.array([1.0, 1.0]) / math.sqrt(2), -1: np.array([1.0, -1.0]) / math.sqrt(2)}


def driven_two_level(delta: float, g: float, omega: float) -> ModelSpec:
    """``H = (Delta/2) sigma_z + g sigma_x cos(omega t)``."""
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega}")
    sz, sx = pauli("z"), pauli("x")
    refs = tuple((SIGMA_X_STATES[s].astype(complex), Eigen.of(sx=s)) for s in (1, -1))
    return ModelSpec(
        name="two_level",
        params={"delta": delta, "g": g, "omega": omega},
        h0=(delta / 2) * sz,
        drive=((g * sx, Cosine(omega)),),
        secondary=(sx,),
        closed_form=TwoLevelClosedForm(delta, g, omega),
        scale=omega,
        references=refs,
    )


# ---------------------------------------------------------------- quantum Rabi


@dataclass(frozen=True)
class RabiClosedForm:
    delta: float
    omega: float
    g: float
    n_max: int

    def energy(self, n: int) -> float:
        """Eigenvalue ``n omega - g^2/omega`` of the perturbation (both lambda)."""
        return n * self.omega - self.g**2 / self.omega

    def dressed_energy(self, n: int, sigma: int) -> float:
        x = 4 * self.g**2 / self.omega**2
        return sigma * (self.delta / 2) * math.exp(-x / 2) * specfun.laguerre(n, x)

    def _displaced(self, lam: int) -> np.ndarray:
        return specfun.displacement_matrix(self.n_max, lam * self.g / self.omega)

    def displaced_state(self, n: int, lam: int) -> np.ndarray:
        """``exp((g/omega) lambda (a - a^dag))|n> |lambda>`` restricted to the truncation."""
        return np.kron(self._displaced(lam)[:, n], SIGMA_X_STATES[lam]).astype(complex)

    def dressed_state(self, n: int, sigma: int) -> np.ndarray:
        return (sigma * self.displaced_state(n, 1) + self.displaced_state(n, -1)) / math.sqrt(2)

    def coupling(self, m: int, n: int, sigma1: int, sigma2: int) -> float:
        return rabi_coupling(m, n, sigma1, sigma2, self.g, self.omega)

    def reliable_levels(self) -> int:
        return reliable_levels(self.n_max, self.g / self.omega)


def rabi_coupling(m: int, n: int, sigma1: int, sigma2: int, g: float, omega: float) -> float:
    """Coupling ``R_{mn,s1 s2}`` between dressed states of the Rabi model."""
    beta = 2 * g / omega
    return 0.5 * (
        specfun.displacement_element(n, m, -beta) * sigma1 + specfun.displacement_element(n, m, beta) * sigma2
    )


def _field_spin_ops(n_max: int):
    a, ad = fock_ladder(n_max)
    return a, ad, identity(a.basis)


def quantum_rabi(delta: float, omega: float, g: float, n_max: int) -> ModelSpec:
    """``H = (Delta/2) sigma_z + omega a^dag a + g sigma_x (a + a^dag)``."""
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega}")
    if n_max < 2:
        raise ConfigError(f"n_max must be >= 2, got {n_max}")
    alpha = abs(g) / omega
    check_guard(n_max, alpha)
    a, ad, I_f = _field_spin_ops(n_max)
    I_s = identity(SPIN_BASIS)
    h0 = tensor(I_f, (delta / 2) * pauli("z"))
    V = omega * tensor(ad @ a, I_s) + g * tensor(a + ad, pauli("x"))
    cf = RabiClosedForm(delta, omega, g, n_max)
    n_ok = cf.reliable_levels()
    refs = tuple((cf.displaced_state(n, lam), Eigen.of(n=n, lam=lam)) for n in range(n_ok) for lam in (1, -1))
    return ModelSpec(
        name="rabi",
        params={"delta": delta, "omega": omega, "g": g, "n_max": n_max},
        h0=h0,
        drive=((V, Constant()),),
        secondary=(tensor(I_f, pauli("x")),),
        closed_form=cf,
        displacement=alpha,
        scale=omega,
        references=refs,
    )


def rabi_dressed_references(model: ModelSpec) -> tuple:
    cf = model.closed_form
    n_ok = cf.reliable_levels()
    return tuple((cf.dressed_state(n, s), Eigen.of(n=n, sigma=s)) for n in range(n_ok) for s in (1, -1))


# ---------------------------------------------------------------- Dicke


@dataclass(frozen=True)
class DickeClosedForm:
    N: int
    delta: float
    omega: float
    g: float
    n_max: int

    def energy(self, n: int, sx: float) -> float:
        """``E_{n,S_x} = [n - 4 g^2 S_x^2 / omega^2] omega``."""
        return (n - 4 * self.g**2 * sx**2 / self.omega**2) * self.omega

    @property
    def alpha(self) -> float:
        """Coherent amplitude ``g N / omega`` of the maximal Dicke state."""
        return self.g * self.N / self.omega

    def displaced_field(self, n: int, sx: float) -> np.ndarray:
        """Field part ``exp((2g/omega) S_x (a - a^dag))|n>`` at eigenvalue ``sx``."""
        return specfun.displacement_matrix(self.n_max, 2 * self.g * sx / self.omega)[:, n]


def dicke(N: int, delta: float, omega: float, g: float, n_max: int, representation: str = "block") -> ModelSpec:
    """``H = Delta S_z + omega a^dag a + 2 g S_x (a + a^dag)`` for N two-level atoms."""
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega}")
    if n_max < 2:
        raise ConfigError(f"n_max must be >= 2, got {n_max}")
    if representation == "dense" and (N > 8 or 2**N * n_max > MAX_DENSE_DIM):
        raise ConfigError(
            f"dense representation bound exceeded: N={N}, dim={2**N * n_max} (limits N <= 8, dim <= {MAX_DENSE_DIM})"
        )
    alpha = abs(g) * N / omega
    check_guard(n_max, alpha)
    sx, sy, sz, s2 = collective_spin(N, representation)
    a, ad, I_f = _field_spin_ops(n_max)
    I_s = identity(sx.basis)
    h0 = delta * tensor(I_f, sz)
    V = omega * tensor(ad @ a, I_s) + 2 * g * tensor(a + ad, sx)
    secondary = [tensor(I_f, sx)]
    if representation == "dense":
        secondary.append(tensor(I_f, s2))
    cf = DickeClosedForm(N, delta, omega, g, n_max)
    refs = ()
    if representation == "block":
        S = N / 2
        refs_list = []
        for j, lab in enumerate(sx.basis):
            m = lab.Sx
            beta = 2 * g * m / omega
            n_ok = reliable_levels(n_max, beta)
            D = specfun.displacement_matrix(n_max, beta)
            spin = np.zeros(N + 1)
            spin[j] = 1.0
            for n in range(n_ok):
                refs_list.append((np.kron(D[:, n], spin).astype(complex), Eigen.of(n=n, S=S, Sx=m)))
        refs = tuple(refs_list)
    return ModelSpec(
        name="dicke",
        params={"N": N, "delta": delta, "omega": omega, "g": g, "n_max": n_max, "representation": representation},
        h0=h0,
        drive=((V, Constant()),),
        secondary=tuple(secondary),
        closed_form=cf,
        displacement=alpha,
        scale=omega,
        references=refs,
    )


def spin_operators(model: ModelSpec):
    """Collective spin operators of a Dicke or Rabi model embedded in the full space."""
    n_max = model.params["n_max"]
    I_f = identity(fock_ladder(n_max)[0].basis)
    if model.name == "rabi":
        ops = tuple(0.5 * pauli(ax) for ax in "xyz")
    else:
        ops = collective_spin(model.params["N"], model.params.get("representation", "block"))[:3]
    return tuple(tensor(I_f, op) for op in ops)


def number_operator(model: ModelSpec) -> Operator:
    n_max = model.params["n_max"]
    a, ad = fock_ladder(n_max)
    spin_dim = model.dim // n_max
    return Operator(np.kron((ad @ a).matrix, np.eye(spin_dim)), model.basis)


def default_initial_state(model: ModelSpec, kind: str | None = None) -> State:
    """Named initial states: ``plus``/``minus``/``up``/``down`` for spins (field in vacuum),
    ``max_dicke`` for the Dicke model (vacuum times the maximal S_x state)."""
    spin_vecs = {
        "plus": SIGMA_X_STATES[1],
        "minus": SIGMA_X_STATES[-1],
        "up": np.array([1.0, 0.0]),
        "down": np.array([0.0, 1.0]),
    }
    if model.name == "two_level":
        kind = kind or "plus"
        if kind not in spin_vecs:
            raise ConfigError(f"unknown initial state {kind!r} for two_level")
        return State(spin_vecs[kind], model.basis)
    n_max = model.params["n_max"]
    vac = np.zeros(n_max)
    vac[0] = 1.0
    if model.name == "rabi":
        kind = kind or "up"
        if kind not in spin_vecs:
            raise ConfigError(f"unknown initial state {kind!r} for rabi")
        return State(np.kron(vac, spin_vecs[kind]), model.basis)
    kind = kind or "max_dicke"
    if kind != "max_dicke":
        raise ConfigError(f"unknown initial state {kind!r} for dicke")
    from .qamp import qamp_initial_state

    return qamp_initial_state(model.params["N"], n_max, model.params.get("representation", "block"))


def build_model(cfg: dict) -> ModelSpec:
    """Model from a validated run configuration."""
    name = cfg["model"]
    if name == "two_level":
        return driven_two_level(cfg["delta"], cfg["g"], cfg["omega"])
    if name == "rabi":
        n_max = cfg.get("n_max") or recommended_n_max(abs(cfg["g"]) / cfg["omega"])
        return quantum_rabi(cfg["delta"], cfg["omega"], cfg["g"], n_max)
    if name == "dicke":
        alpha = abs(cfg["g"]) * cfg["N"] / cfg["omega"]
        n_max = cfg.get("n_max") or recommended_n_max(alpha)
        return dicke(cfg["N"], cfg["delta"], cfg["omega"], cfg["g"], n_max, cfg.get("representation", "block"))
    raise ConfigError(f"unknown model {name!r}")


def dressed_references(model: ModelSpec):
    """Reference vectors labelling the eigenbasis after the secular generator is absorbed."""
    if model.name == "rabi":
        return rabi_dressed_references(model)
    return None
