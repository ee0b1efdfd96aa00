"""Reference propagation of ``i d|psi>/dt = H(t)|psi>`` on the truncated space.

Three routes, all independent of the perturbative machinery:

* ``rk``: adaptive Dormand-Prince 5(4) on the state, drive evaluated at stage times;
* ``floquet``: the same integrator on the one-period propagator of a periodic
  drive, with later times reached through powers of ``U(T)``;
* ``spectral``: ``exp(-i H t)`` from an eigendecomposition for static H.

Norm drift is measured and reported, never renormalized away.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import BasisMismatchError, ConfigError, StiffnessError
from .operators import Operator, State

NORM_DRIFT_LIMIT = 1e-9
DEFAULT_LOCAL_TOL = 1e-10
SPECTRAL_DIM = 256

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass
class IntegratorStats:
    steps: int = 0
    rejected: int = 0
    evaluations: int = 0
    local_tol: float | None = None
    method: str = "rk"

    def to_json(self) -> dict:
        return {
            "steps": self.steps,
            "rejected": self.rejected,
            "evaluations": self.evaluations,
            "local_tol": self.local_tol,
            "method": self.method,
        }


def _dp_step(f, t, y, h, k1):
    ks = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
        ks.append(f(t + _C[i] * h, yi))
    y5 = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return y5, err, ks[-1]


def integrate(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t0: float,
    t_eval: Sequence[float],
    local_tol: float = DEFAULT_LOCAL_TOL,
    fixed_step: float | None = None,
    scale: float = 1.0,
    stats: IntegratorStats | None = None,
    span: float | None = None,
) -> list[np.ndarray]:
    """Dormand-Prince 5(4) integration of ``y' = f(t, y)`` stopping exactly at ``t_eval``.

    ``t_eval`` must be monotone in the direction of integration. The step
    controller is the PI rule; ``fixed_step`` switches adaptivity off (the
    step is shortened only to land on requested times). ``scale`` is a rate
    estimate (e.g. ``||H||``) used for the first step. With ``span`` the
    error allowed per step is ``local_tol * sqrt(h / span)``, which keeps the
    accumulated error over ``span`` near ``local_tol``.
    """
    stats = stats if stats is not None else IntegratorStats()
    stats.local_tol = local_tol
    y = np.array(y0, dtype=complex)
    t = float(t0)
    out = []
    times = np.asarray(t_eval, dtype=float)
    if times.size == 0:
        return out
    direction = 1.0 if times[-1] >= t else -1.0
    if np.any(direction * np.diff(np.concatenate([[t], times])) < 0):
        raise ConfigError("sample times must be monotone in the integration direction")
    k1 = f(t, y)
    stats.evaluations += 1
    if fixed_step is not None:
        h = abs(float(fixed_step))
    else:
        h = 0.5 * local_tol ** 0.2 / max(scale, 1e-12)
    err_prev = 1.0
    for target in times:
        while direction * (target - t) > 0:
            remaining = abs(target - t)
            last = h >= remaining * (1 - 1e-12)
            step = remaining if last else h
            y_new, err_vec, k_last = _dp_step(f, t, y, direction * step, k1)
            stats.evaluations += 6
            if fixed_step is not None:
                err = 0.0
            else:
                tol = local_tol if span is None else local_tol * min(1.0, (step / span) ** 0.5)
                sc = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
                err = float(np.max(np.abs(err_vec) / sc))
            if err <= 1.0:
                t = target if last else t + direction * step
                y, k1 = y_new, k_last
                stats.steps += 1
                if fixed_step is None:
                    fac = 0.9 * max(err, 1e-10) ** -0.17 * err_prev**0.04
                    err_prev = max(err, 1e-4)
                    if not last or step >= h:
                        h = step * min(5.0, max(0.2, fac))
            else:
                stats.rejected += 1
                h = step * max(0.2, 0.9 * err**-0.2)
                if h < 1e-13 * max(1.0, abs(t)):
                    raise StiffnessError(f"step size underflow at t={t:.6g} (h={h:.3e})")
        out.append(y.copy())
    return out


@dataclass(eq=False)
class EvolutionResult:
    """Sampled states from an exact propagation."""

    times: np.ndarray
    states: list
    norm_drift: float
    stats: IntegratorStats
    failed: bool = False
    metadata: dict = field(default_factory=dict)

    def expectation(self, op: Operator) -> np.ndarray:
        return np.array([np.real(op.expectation(s)) for s in self.states])

    def matrix(self) -> np.ndarray:
        return np.stack([s.amplitudes for s in self.states])

    def to_csv(self, path, observables: dict | None = None) -> None:
        observables = observables or {}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", *observables, "norm"])
            values = {k: self.expectation(op) for k, op in observables.items()}
            for i, (t, s) in enumerate(zip(self.times, self.states)):
                row = [t, *(values[k][i] for k in observables), s.norm()]
                w.writerow([f"{x:.17g}" for x in row])

    def to_json(self) -> dict:
        return {
            "times": [float(t) for t in self.times],
            "states": [s.to_json() for s in self.states],
            "norm_drift": self.norm_drift,
            "failed": self.failed,
            "stats": self.stats.to_json(),
            "metadata": self.metadata,
        }


def _state_vector(psi0, model) -> np.ndarray:
    if isinstance(psi0, State):
        if psi0.basis != model.basis:
            raise BasisMismatchError("initial state and model live on different bases")
        v = psi0.amplitudes
    else:
        v = np.asarray(psi0, dtype=complex)
    if v.shape != (model.dim,):
        raise ConfigError(f"initial state has shape {v.shape}, model dimension {model.dim}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise ConfigError("initial state must be normalized")
    return np.array(v, dtype=complex)


def _rate_scale(model) -> float:
    m = np.abs(model.h0.matrix).sum(axis=1).max()
    for op, _ in model.drive:
        m += np.abs(op.matrix).sum(axis=1).max()
    return float(m)


def _hamiltonian_parts(model):
    h0 = np.asarray(model.h0.matrix)
    mats = [np.asarray(op.matrix) for op, _ in model.drive]
    profs = [p for _, p in model.drive]
    return h0, mats, profs


def make_rhs(model, reverse_from: float | None = None):
    """``y' = -i H(t) y``; with ``reverse_from = T`` the schedule ``-H(T - t)``."""
    h0, mats, profs = _hamiltonian_parts(model)
    static = model.is_static
    if static:
        H = h0 + sum(mats)
        if reverse_from is None:
            return lambda t, y: -1j * (H @ y)
        return lambda t, y: 1j * (H @ y)

    def rhs(t, y):
        s = t if reverse_from is None else reverse_from - t
        Ht = h0 + sum(float(p.value(s)) * m for m, p in zip(mats, profs))
        return (-1j if reverse_from is None else 1j) * (Ht @ y)

    return rhs


def spectral_propagator(H, t: float) -> np.ndarray:
    """``exp(-i H t)`` for Hermitian H via its eigendecomposition."""
    m = H.matrix if isinstance(H, Operator) else np.asarray(H)
    w, Y = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (Y * np.exp(-1j * w * t)[None, :]) @ Y.conj().T


def propagate_exact(
    model,
    psi0,
    t_final: float,
    samples: int | Sequence[float] = 101,
    local_tol: float = DEFAULT_LOCAL_TOL,
    method: str = "auto",
    fixed_step: float | None = None,
) -> EvolutionResult:
    """Propagate ``psi0`` under the model Hamiltonian.

    ``samples`` is a count of equally spaced times on ``[0, t_final]`` or an
    explicit ascending grid. ``method`` is ``rk``, ``floquet``, ``spectral``
    or ``auto`` (spectral for large static problems, floquet for periodic
    drives over more than two periods, rk otherwise).
    """
    if not math.isfinite(t_final) or t_final < 0:
        raise ConfigError(f"t_final must be finite and non-negative, got {t_final}")
    if isinstance(samples, (int, np.integer)):
        if samples < 1:
            raise ConfigError("samples must be positive")
        times = np.linspace(0.0, t_final, int(samples))
    else:
        times = np.asarray(samples, dtype=float)
        if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
            raise ConfigError("sample grid must be ascending and non-negative")
    y0 = _state_vector(psi0, model)
    if method == "auto":
        period = model.period
        if model.is_static and model.dim > SPECTRAL_DIM:
            method = "spectral"
        elif period is not None and not model.is_static and t_final > 2 * period and fixed_step is None:
            method = "floquet"
        else:
            method = "rk"
    stats = IntegratorStats(local_tol=local_tol, method=method)
    if method == "spectral":
        if not model.is_static:
            raise ConfigError("spectral propagation needs a time-independent Hamiltonian")
        H = model.hamiltonian(0.0)
        w, Y = np.linalg.eigh(H)
        c0 = Y.conj().T @ y0
        vecs = [Y @ (np.exp(-1j * w * t) * c0) for t in times]
    elif method == "floquet":
        vecs = _floquet(model, y0, times, local_tol, stats)
    elif method == "rk":
        span = max(float(times[-1]), 1e-300) if times.size else None
        vecs = integrate(make_rhs(model), y0, 0.0, times, local_tol, fixed_step, _rate_scale(model), stats, span)
    else:
        raise ConfigError(f"unknown propagation method {method!r}")
    states = [State(v, model.basis) for v in vecs]
    drift = float(max((abs(np.linalg.norm(v) - 1.0) for v in vecs), default=0.0))
    return EvolutionResult(
        times=times,
        states=states,
        norm_drift=drift,
        stats=stats,
        failed=drift > NORM_DRIFT_LIMIT,
        metadata={"model": model.name, "params": dict(model.params)},
    )


def _floquet(model, y0, times, local_tol, stats) -> list[np.ndarray]:
    T = model.period
    dim = model.dim
    h0, mats, profs = _hamiltonian_parts(model)

    def rhs(t, U):
        Ht = h0 + sum(float(p.value(t)) * m for m, p in zip(mats, profs))
        return -1j * (Ht @ U)

    k_idx = np.floor(times / T).astype(int)
    phase = times - k_idx * T
    order = np.argsort(phase, kind="stable")
    grid = np.concatenate([phase[order], [T]])
    # the period map is applied k_max times, so its error budget is split accordingly
    tol = local_tol / (1 + int(k_idx.max(initial=0)))
    Us = integrate(rhs, np.eye(dim, dtype=complex), 0.0, grid, tol, None, _rate_scale(model), stats, T)
    U_phase = [None] * len(times)
    for j, i in enumerate(order):
        U_phase[i] = Us[j]
    UT = Us[-1]
    out = []
    k_cur = 0
    cache_vec = y0
    for i in np.argsort(k_idx, kind="stable"):
        while k_cur < k_idx[i]:
            cache_vec = UT @ cache_vec
            k_cur += 1
        out.append((i, U_phase[i] @ cache_vec))
    out.sort(key=lambda x: x[0])
    return [v for _, v in out]


def fidelity(a, b) -> float:
    """``|<a|b>| / (||a|| ||b||)``; blind to global phase."""
    if isinstance(a, State) and isinstance(b, State):
        if a.basis != b.basis:
            raise BasisMismatchError("states live on different bases")
        va, vb = a.amplitudes, b.amplitudes
    else:
        va = a.amplitudes if isinstance(a, State) else np.asarray(a, dtype=complex)
        vb = b.amplitudes if isinstance(b, State) else np.asarray(b, dtype=complex)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    den = np.linalg.norm(va) * np.linalg.norm(vb)
    if den == 0:
        raise ValueError("fidelity of a zero vector is undefined")
    return float(min(1.0, abs(np.vdot(va, vb)) / den))


def energy_drift(model, result: EvolutionResult) -> float:
    """``max_t |<H>(t) - <H>(0)| / ||H||`` for a static model."""
    if not model.is_static:
        raise ConfigError("energy is conserved only for time-independent Hamiltonians")
    H = model.hamiltonian(0.0)
    norm = float(np.max(np.abs(np.linalg.eigvalsh(H))))
    e = np.array([np.real(np.vdot(s.amplitudes, H @ s.amplitudes)) for s in result.states])
    return float(np.max(np.abs(e - e[0])) / max(norm, 1e-300))


def step_doubling_audit(model, psi0, t_final: float, local_tol: float = DEFAULT_LOCAL_TOL, method: str = "auto") -> dict:
    """Final-state infidelity between runs at ``local_tol`` and ``local_tol / 2``."""
    a = propagate_exact(model, psi0, t_final, 2, local_tol, method)
    b = propagate_exact(model, psi0, t_final, 2, local_tol / 2, method)
    change = 1.0 - fidelity(a.states[-1], b.states[-1])
    diff = float(np.linalg.norm(a.states[-1].amplitudes - b.states[-1].amplitudes))
    return {"infidelity_change": change, "state_difference": diff, "passed": change < 1e-8}


def time_reversal_check(model, psi0, t_final: float, local_tol: float = DEFAULT_LOCAL_TOL) -> float:
    """Fidelity with ``psi0`` after evolving to ``t_final`` and back under the reversed schedule."""
    y0 = _state_vector(psi0, model)
    scale = _rate_scale(model)
    fwd = integrate(make_rhs(model), y0, 0.0, [t_final], local_tol, None, scale, span=t_final)[-1]
    back = integrate(make_rhs(model, reverse_from=t_final), fwd, 0.0, [t_final], local_tol, None, scale, span=t_final)[-1]
    return fidelity(y0, back)


def truncation_audit(factory, ladder: Sequence[int], observable, t_final: float, psi0=None, tol: float = 1e-8) -> dict:
    """Observable at ``t_final`` for each Fock truncation of an ascending ladder.

    ``factory(n_max)`` builds the model, ``observable(model)`` returns the
    operator, ``psi0(model)`` the initial state (default: the model's own).
    """
    ladder = [int(n) for n in ladder]
    if len(ladder) < 1 or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("truncation ladder must be strictly ascending")
    from .models import default_initial_state

    values = []
    for n_max in ladder:
        model = factory(n_max)
        state = psi0(model) if psi0 is not None else default_initial_state(model)
        res = propagate_exact(model, state, t_final, 2)
        values.append(float(np.real(observable(model).expectation(res.states[-1]))))
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    converged_at = None
    for i, d in enumerate(diffs):
        if d < tol:
            converged_at = ladder[i]
            break
    if len(ladder) == 1:
        converged_at = None
    return {"ladder": ladder, "values": values, "differences": diffs, "converged": converged_at is not None, "converged_at": converged_at}


def _cosine(t, a, b, c, w):
    return a + b * np.cos(w * t) + c * np.sin(w * t)


def fit_frequency(times, signal) -> float:
    """Dominant angular frequency of a sampled oscillation.

    A periodogram peak seeds a least-squares fit of ``A + B cos(wt) + C sin(wt)``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(signal, dtype=float)
    if t.size < 8:
        raise ValueError("need at least 8 samples to fit a frequency")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("frequency fit needs an equally spaced grid")
    pad = 8 * t.size
    spec = np.abs(np.fft.rfft(y - y.mean(), n=pad))
    freqs = 2 * np.pi * np.fft.rfftfreq(pad, d=dt)
    w0 = freqs[1 + int(np.argmax(spec[1:]))]
    p0 = [y.mean(), (y.max() - y.min()) / 2, 0.0, w0]
    popt, _ = curve_fit(_cosine, t, y, p0=p0, maxfev=20000)
    return abs(float(popt[3]))


def result_summary(result: EvolutionResult) -> str:
    return json.dumps({"norm_drift": result.norm_drift, "failed": result.failed, **result.stats.to_json()})
