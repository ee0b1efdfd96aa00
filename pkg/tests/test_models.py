import math

import numpy as np
import pytest
from scipy.linalg import expm

from strongcoupling import models, specfun
from strongcoupling.errors import ConfigError, TruncationGuardError
from strongcoupling.operators import pauli


def labelled_eigenvalues(model):
    d = model.decompose()
    ev = d.eigenvalues()
    return {lab.tags: ev[j] for j, lab in enumerate(d.labels) if lab.get("index") is None}


def test_two_level_structure():
    m = models.driven_two_level(0.3, 1.2, 0.8)
    assert m.closed_form.z == pytest.approx(3.0)
    for t in np.linspace(0, 10, 7):
        H = m.hamiltonian(t)
        assert np.allclose(H, H.conj().T)
        assert np.allclose(H, 0.15 * pauli("z").matrix + 1.2 * math.cos(0.8 * t) * pauli("x").matrix)
    assert m.period == pytest.approx(2 * math.pi / 0.8)
    assert not m.is_static
    with pytest.raises(ConfigError):
        models.driven_two_level(0.1, 1.0, 0.0)


def test_two_level_closed_form_propagator():
    m = models.driven_two_level(0.0, 1.7, 1.1)
    t = 2.3
    ref = expm(-1j * pauli("x").matrix * (1.7 / 1.1) * math.sin(1.1 * t))
    assert np.abs(m.closed_form.free_propagator(t) - ref).max() < 1e-14
    assert m.closed_form.phase(1, t) == pytest.approx(-m.closed_form.phase(-1, t))
    assert models.driven_two_level(0.05, 1.0, 1.0).closed_form.rabi_frequency == pytest.approx(0.05 * specfun.bessel_j(0, 2.0))


@pytest.mark.parametrize("g, n_max", [(0.5, 40), (1.0, 60), (2.0, 90)])
def test_rabi_perturbation_spectrum(g, n_max):
    m = models.quantum_rabi(0.1, 1.0, g, n_max)
    eig = labelled_eigenvalues(m)
    n_ok = m.closed_form.reliable_levels()
    assert n_ok > 20
    for n in range(n_ok):
        for lam in (1, -1):
            key = (("n", n), ("lam", lam))
            assert eig[key] == pytest.approx(m.closed_form.energy(n), abs=1e-8)


def test_rabi_displaced_states_are_eigenvectors():
    m = models.quantum_rabi(0.1, 1.0, 0.8, 50)
    V = m.drive[0][0].matrix
    for n in (0, 3, 12):
        for lam in (1, -1):
            v = m.closed_form.displaced_state(n, lam)
            assert np.linalg.norm(V @ v - m.closed_form.energy(n) * v) < 1e-9


def test_dressed_states_orthonormal():
    m = models.quantum_rabi(0.1, 1.0, 1.0, 60)
    refs = models.rabi_dressed_references(m)
    R = np.stack([v for v, _ in refs[:40]], axis=1)
    assert np.abs(R.conj().T @ R - np.eye(R.shape[1])).max() < 1e-10


@pytest.mark.parametrize("g", [0.0, 0.5, 1.3])
def test_dressed_energies_are_h0_expectations(g):
    delta = 0.2
    m = models.quantum_rabi(delta, 1.0, g, 60)
    H0 = m.h0.matrix
    cf = m.closed_form
    for n in range(10):
        for s in (1, -1):
            psi = cf.dressed_state(n, s)
            assert np.vdot(psi, H0 @ psi).real == pytest.approx(cf.dressed_energy(n, s), abs=1e-10)
    if g == 0.0:
        assert cf.dressed_energy(7, -1) == pytest.approx(-delta / 2)


def test_rabi_coupling_limits_and_parity():
    assert models.rabi_coupling(3, 3, 1, 1, 0.0, 1.0) == 1.0
    assert models.rabi_coupling(3, 3, 1, -1, 0.0, 1.0) == 0.0
    assert models.rabi_coupling(3, 3, -1, -1, 0.0, 1.0) == -1.0
    assert models.rabi_coupling(2, 5, 1, 1, 0.0, 1.0) == 0.0
    beta = 2 * 0.7
    for n in range(11):
        for k in range(11):
            ref_minus = expm(-beta * _ladder_generator(60))[n, k]
            ref_plus = expm(beta * _ladder_generator(60))[n, k]
            assert ref_minus == pytest.approx((-1) ** (n - k) * ref_plus, abs=1e-12)
            expected = 0.5 * (ref_minus * 1 + ref_plus * -1)
            assert models.rabi_coupling(k, n, 1, -1, 0.7, 1.0) == pytest.approx(expected, abs=1e-10)


def _ladder_generator(size):
    a = np.diag(np.sqrt(np.arange(1, size)), 1)
    return a - a.T


def test_truncation_guard():
    with pytest.raises(TruncationGuardError, match="n_max >="):
        models.quantum_rabi(0.1, 1.0, 3.0, 20)
    alpha = 3.0
    models.quantum_rabi(0.1, 1.0, alpha, models.minimal_n_max(alpha))
    assert models.recommended_n_max(alpha) >= models.minimal_n_max(alpha)
    assert models.truncation_tail(models.minimal_n_max(alpha), alpha) <= models.GUARD_TAIL


def test_dicke_single_atom_reduces_to_rabi():
    g, n_max = 0.6, 40
    d = models.dicke(1, 0.2, 1.0, g, n_max, "block")
    r = models.quantum_rabi(0.2, 1.0, g, n_max)
    # the block basis is the S_x eigenbasis; rotate the Rabi model into it
    hd = np.linalg.eigvalsh(d.hamiltonian(0.0))
    hr = np.linalg.eigvalsh(r.hamiltonian(0.0))
    assert np.abs(hd - hr).max() < 1e-10


def test_dicke_block_spectrum():
    N, g, n_max = 4, 0.3, 60
    m = models.dicke(N, 0.1, 1.0, g, n_max)
    eig = labelled_eigenvalues(m)
    cf = m.closed_form
    checked = 0
    for key, value in eig.items():
        tags = dict(key)
        assert value == pytest.approx(cf.energy(tags["n"], tags["Sx"]), abs=1e-8)
        checked += 1
    assert checked > 30 * (N + 1)
    assert cf.energy(3, 1.0) == cf.energy(3, -1.0)
    assert cf.alpha == pytest.approx(g * N / 1.0)


def test_dicke_dense_and_block_agree_on_maximal_sector():
    N, g, n_max = 2, 0.4, 40
    dense = np.linalg.eigvalsh(models.dicke(N, 0.15, 1.0, g, n_max, "dense").hamiltonian(0.0))
    block = np.linalg.eigvalsh(models.dicke(N, 0.15, 1.0, g, n_max, "block").hamiltonian(0.0))
    for v in block[:60]:
        assert np.min(np.abs(dense - v)) < 1e-9


def test_dicke_representation_bound():
    with pytest.raises(ConfigError):
        models.dicke(9, 0.1, 1.0, 0.1, 40, "dense")
    with pytest.raises(ConfigError):
        models.dicke(0, 0.1, 1.0, 0.1, 40)


def test_seeded_parameter_sweep_dual_sourced():
    rng = np.random.default_rng(20240611)
    for _ in range(4):
        delta, g = rng.uniform(0.01, 0.2), rng.uniform(0.1, 1.2)
        m = models.quantum_rabi(delta, 1.0, g, models.minimal_n_max(g) + 20)
        eig = labelled_eigenvalues(m)
        for n in range(5):
            assert eig[(("n", n), ("lam", 1))] == pytest.approx(m.closed_form.energy(n), abs=1e-8)
        tl = models.driven_two_level(delta, g, 1.0)
        w = np.sort(tl.decompose().weights[:, 0])
        assert np.allclose(w, [-g, g], atol=1e-12)


def test_build_model_from_config():
    m = models.build_model({"model": "rabi", "delta": 0.1, "omega": 1.0, "g": 0.5})
    assert m.params["n_max"] == models.recommended_n_max(0.5)
    with pytest.raises(ConfigError):
        models.build_model({"model": "spin_chain"})


def test_default_initial_states():
    m = models.driven_two_level(0.1, 1.0, 1.0)
    assert np.allclose(models.default_initial_state(m).amplitudes, np.array([1, 1]) / math.sqrt(2))
    r = models.quantum_rabi(0.1, 1.0, 0.5, 40)
    assert models.default_initial_state(r).amplitudes[0] == 1.0
    with pytest.raises(ConfigError):
        models.default_initial_state(m, "max_dicke")
