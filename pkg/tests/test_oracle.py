import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from strongcoupling import models, oracle, specfun
from strongcoupling.errors import BasisMismatchError, ConfigError
from strongcoupling.operators import SPIN_BASIS, State, pauli
from strongcoupling.qamp import qamp_initial_state

PLUS = np.array([1, 1]) / math.sqrt(2)


def test_zero_hamiltonian_keeps_state():
    m = models.driven_two_level(0.0, 0.0, 1.0)
    psi = State(np.array([0.6, 0.8j]), SPIN_BASIS)
    res = oracle.propagate_exact(m, psi, 10.0, 11)
    assert np.abs(res.matrix() - psi.amplitudes).max() == 0.0


@pytest.mark.parametrize("g, omega", [(1.0, 1.0), (5.0, 1.0), (2.0, 0.5)])
def test_free_drive_matches_closed_form(g, omega):
    m = models.driven_two_level(0.0, g, omega)
    psi = np.array([1.0, 0.0], dtype=complex)
    times = np.linspace(0, 3 * 2 * math.pi / omega, 31)
    res = oracle.propagate_exact(m, psi, times[-1], times)
    for t, s in zip(times, res.states):
        ref = expm(-1j * pauli("x").matrix * (g / omega) * math.sin(omega * t)) @ psi
        assert np.linalg.norm(s.amplitudes - ref) < 1e-8
    assert not res.failed


def test_rabi_frequency_fit_over_forty_periods():
    delta, g, omega = 0.05, 1.0, 1.0
    m = models.driven_two_level(delta, g, omega)
    t_final = 40 * 2 * math.pi / omega
    res = oracle.propagate_exact(m, PLUS, t_final, 1601)
    p_plus = np.abs(res.matrix() @ PLUS) ** 2
    w = oracle.fit_frequency(res.times, p_plus)
    assert w == pytest.approx(delta * specfun.bessel_j(0, 2.0), rel=0.02)


def test_fidelity_examples():
    a = State(np.array([0.6, 0.8j]), SPIN_BASIS)
    assert oracle.fidelity(a, a) == pytest.approx(1.0)
    assert oracle.fidelity(State([1, 0], SPIN_BASIS), State([0, 1], SPIN_BASIS)) == 0.0
    assert oracle.fidelity(a, State(np.exp(0.7j) * a.amplitudes, SPIN_BASIS)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        oracle.fidelity(np.ones(2), np.ones(3))
    m = models.quantum_rabi(0.1, 1.0, 0.5, 30)
    with pytest.raises(BasisMismatchError):
        oracle.fidelity(a, models.default_initial_state(m))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(0, 2 * math.pi))
def test_fidelity_is_bounded_and_phase_blind(parts, theta):
    v = np.array(parts[:2]) + 1j * np.array(parts[2:])
    if np.linalg.norm(v) < 1e-3:
        return
    w = np.array([parts[1], parts[0]], dtype=complex)
    if np.linalg.norm(w) < 1e-3:
        return
    f = oracle.fidelity(v, w)
    assert 0.0 <= f <= 1.0
    assert oracle.fidelity(v, np.exp(1j * theta) * w) == pytest.approx(f, abs=1e-12)


def test_time_reversal_recovers_initial_state():
    m = models.driven_two_level(0.3, 2.0, 1.3)
    assert oracle.time_reversal_check(m, PLUS, 25.0) >= 1 - 1e-7
    r = models.quantum_rabi(0.1, 1.0, 0.5, 30)
    assert oracle.time_reversal_check(r, models.default_initial_state(r), 5.0) >= 1 - 1e-7


def test_energy_is_conserved_for_static_hamiltonian():
    m = models.quantum_rabi(0.2, 1.0, 0.7, 40)
    res = oracle.propagate_exact(m, models.default_initial_state(m), 10.0, 21, method="rk")
    assert oracle.energy_drift(m, res) <= 1e-8
    assert res.norm_drift <= 1e-9
    with pytest.raises(ConfigError):
        oracle.energy_drift(models.driven_two_level(0.1, 1.0, 1.0), res)


def test_spectral_and_integrator_agree():
    m = models.quantum_rabi(0.2, 1.0, 0.7, 40)
    psi = models.default_initial_state(m)
    a = oracle.propagate_exact(m, psi, 8.0, 9, method="rk")
    b = oracle.propagate_exact(m, psi, 8.0, 9, method="spectral")
    assert np.abs(a.matrix() - b.matrix()).max() < 1e-8
    with pytest.raises(ConfigError):
        oracle.propagate_exact(models.driven_two_level(0.1, 1.0, 1.0), PLUS, 1.0, 2, method="spectral")


def test_floquet_and_direct_integration_agree():
    m = models.driven_two_level(0.05, 1.0, 1.0)
    times = np.linspace(0, 60, 13)
    a = oracle.propagate_exact(m, PLUS, 60.0, times, method="rk")
    b = oracle.propagate_exact(m, PLUS, 60.0, times, method="floquet")
    assert np.abs(a.matrix() - b.matrix()).max() < 1e-8


def test_step_doubling_audit_passes():
    m = models.driven_two_level(0.05, 1.0, 1.0)
    audit = oracle.step_doubling_audit(m, PLUS, 30.0)
    assert audit["passed"]


def test_fixed_step_convergence_order():
    m = models.driven_two_level(0.3, 1.0, 1.0)
    t_final = 2.0
    ref = oracle.propagate_exact(m, PLUS, t_final, 2, local_tol=1e-13, method="rk").states[-1].amplitudes
    errs = []
    for h in (0.1, 0.05):
        y = oracle.propagate_exact(m, PLUS, t_final, 2, method="rk", fixed_step=h).states[-1].amplitudes
        errs.append(np.linalg.norm(y - ref))
    assert errs[0] / errs[1] == pytest.approx(2**5, rel=0.2)


def test_norm_drift_is_reported_not_hidden():
    m = models.driven_two_level(0.3, 1.0, 1.0)
    coarse = oracle.propagate_exact(m, PLUS, 20.0, 2, method="rk", fixed_step=0.5)
    assert coarse.norm_drift > 1e-9 and coarse.failed
    assert coarse.states[-1].norm() != pytest.approx(1.0, abs=1e-9)


def test_truncation_audit_zero_coupling_converges_at_once():
    def factory(n):
        return models.quantum_rabi(0.1, 1.0, 0.0, n)

    rep = oracle.truncation_audit(factory, [12, 16, 20], models.number_operator, 3.0)
    assert rep["converged_at"] == 12


def test_truncation_audit_rabi_ladder_shrinks():
    def factory(n):
        return models.quantum_rabi(0.1, 1.0, 1.0, n)

    rep = oracle.truncation_audit(factory, [24, 30, 36, 42, 48], models.number_operator, 4.0)
    d = rep["differences"]
    # shrinks until it reaches the roundoff floor
    assert all(b < a or b < 1e-12 for a, b in zip(d, d[1:]))
    assert max(d[2:]) < 1e-12
    assert rep["converged"]


def test_truncation_audit_qamp_converges_once_guarded():
    N, g = 8, 0.3

    def factory(n):
        return models.dicke(N, 0.05, 1.0, g, n)

    def psi0(model):
        return qamp_initial_state(N, model.params["n_max"])

    # from the bare vacuum the field swings out to twice the eigenstate displacement
    start = models.minimal_n_max(2 * g * N)
    rep = oracle.truncation_audit(factory, [start, start + 6, start + 12], models.number_operator, 3.0, psi0=psi0)
    assert rep["converged"]
    assert rep["values"][-1] == pytest.approx(rep["values"][0], abs=1e-8)


def test_truncation_audit_rejects_bad_ladder():
    with pytest.raises(ConfigError):
        oracle.truncation_audit(lambda n: models.quantum_rabi(0.1, 1.0, 0.5, n), [40, 30], models.number_operator, 1.0)


def test_bad_inputs_are_refused():
    m = models.driven_two_level(0.1, 1.0, 1.0)
    with pytest.raises(ConfigError):
        oracle.propagate_exact(m, np.array([1.0, 1.0]), 1.0)
    with pytest.raises(ConfigError):
        oracle.propagate_exact(m, PLUS, math.nan)
    with pytest.raises(ConfigError):
        oracle.propagate_exact(m, PLUS, 1.0, [0.0, 0.5, 0.2])


def test_result_exports(tmp_path):
    m = models.driven_two_level(0.1, 1.0, 1.0)
    res = oracle.propagate_exact(m, PLUS, 2.0, 5)
    path = tmp_path / "run.csv"
    res.to_csv(path, {"sz": pauli("z")})
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "sz", "norm"]
    assert len(rows) == 6
    payload = json.loads(json.dumps(res.to_json()))
    assert payload["stats"]["steps"] > 0 and payload["failed"] is False
