import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from strongcoupling import models
from strongcoupling.errors import NonCommutingPerturbationError
from strongcoupling.freepicture import (
    Constant,
    Cosine,
    Custom,
    amplitude_rhs,
    check_static_eigenvectors,
    dress,
    dressed_spectrum,
    free_propagator,
    spectral_decompose,
    transformed_hamiltonian,
)
from strongcoupling.operators import Operator, SPIN_BASIS, pauli


def test_profiles_integrate_their_values():
    t = np.linspace(0, 5, 11)
    c = Cosine(1.3)
    assert np.allclose(c.integral(t), np.sin(1.3 * t) / 1.3)
    assert np.allclose(Constant().integral(t), t)
    custom = Custom(lambda s: math.exp(-s))
    assert float(custom.integral(2.0)) == pytest.approx(1 - math.exp(-2.0), abs=1e-10)
    with pytest.raises(Exception):
        Cosine(0.0)


def test_two_level_decomposition_labels_and_order():
    m = models.driven_two_level(0.3, 2.0, 1.0)
    d = m.decompose()
    assert [lab.get("sx") for lab in d.labels] == [-1, 1]
    assert np.allclose(d.weights[:, 0], [-2.0, 2.0])
    # largest component real and positive
    for v in d.vectors.T:
        k = int(np.argmax(np.abs(v)))
        assert v[k].imag == 0 and v[k].real > 0


@pytest.mark.parametrize("g, omega", [(1.0, 1.0), (5.0, 1.0), (2.0, 0.5)])
def test_free_propagator_matches_closed_form(g, omega):
    m = models.driven_two_level(0.4, g, omega)
    d = m.decompose()
    for t in np.linspace(0, 20, 9):
        U = free_propagator(d, t).matrix
        assert np.abs(U - m.closed_form.free_propagator(t)).max() < 1e-13
        assert np.abs(U.conj().T @ U - np.eye(2)).max() < 1e-13


def test_transformed_hamiltonian_two_level():
    delta, g, omega = 0.3, 1.1, 0.9
    m = models.driven_two_level(delta, g, omega)
    d = m.decompose()
    z = 2 * g / omega
    plus = np.array([1, 1]) / math.sqrt(2)
    minus = np.array([1, -1]) / math.sqrt(2)
    for t in (0.0, 0.7, 3.1):
        HF = transformed_hamiltonian(m.h0, d, t).matrix
        phase = np.exp(-1j * z * math.sin(omega * t))
        ref = (delta / 2) * (phase * np.outer(minus, plus) + np.conj(phase) * np.outer(plus, minus))
        assert np.abs(HF - ref).max() < 1e-14


def test_rabi_degeneracy_is_resolved_by_secondary():
    m = models.quantum_rabi(0.1, 1.0, 1.0, 40)
    d = m.decompose()
    # each n level is doubly degenerate in V but the labels split it by lambda
    pairs = [c for c in d.degeneracy_classes if len(c) == 2]
    assert len(pairs) >= 30
    sx = m.secondary[0].matrix
    lam = np.real(np.einsum("in,ij,jn->n", d.vectors.conj(), sx, d.vectors))
    assert np.allclose(np.abs(lam), 1.0, atol=1e-9)


def test_static_eigenvector_residual_vanishes():
    m = models.driven_two_level(0.1, 0.8, 1.0)
    assert check_static_eigenvectors(m.decompose(), np.linspace(0, 7, 13)) < 1e-13


def test_non_commuting_terms_are_refused():
    terms = ((pauli("x"), Cosine(1.0)), (pauli("z"), Constant()))
    with pytest.raises(NonCommutingPerturbationError):
        spectral_decompose(terms)


def test_deterministic_tie_break():
    # fully degenerate perturbation: the secondary observable fixes the basis
    V = Operator(np.eye(2), SPIN_BASIS)
    d1 = spectral_decompose(V, secondary=[pauli("x")])
    d2 = spectral_decompose(V, secondary=[pauli("x")])
    assert np.array_equal(d1.vectors, d2.vectors)
    assert np.allclose(np.abs(d1.vectors), 1 / math.sqrt(2))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.1, 4.0), st.floats(0.3, 3.0), st.floats(0.0, 30.0))
def test_free_picture_solves_perturbation_dynamics(delta, g, omega, t):
    m = models.driven_two_level(delta, g, omega)
    d = m.decompose()
    # U_F solves i dU/dt = V(t) U; check by a centered difference
    h = 1e-5
    dU = (free_propagator(d, t + h).matrix - free_propagator(d, t - h).matrix) / (2 * h)
    V = g * math.cos(omega * t) * pauli("x").matrix
    assert np.abs(1j * dU - V @ free_propagator(d, t).matrix).max() < 1e-6 * max(1.0, g)


def test_amplitude_equation_reproduces_interaction_dynamics():
    m = models.driven_two_level(0.2, 1.0, 1.0)
    d = m.decompose()
    ds = dressed_spectrum(d, m.h0)
    c = np.array([0.6, 0.8j])
    t = 1.3
    HF = d.to_frame(transformed_hamiltonian(m.h0, d, t).matrix)
    # diagonal of H0 in this basis vanishes, so both forms agree
    assert np.allclose(np.diag(ds.coupling), 0)
    assert np.allclose(amplitude_rhs(d, ds, m.h0, t, c), -1j * HF @ c)


def test_dress_absorbs_secular_generator():
    m = models.quantum_rabi(0.1, 1.0, 0.7, 40)
    d = m.decompose()
    M = d.to_frame(m.h0)
    ev = d.eigenvalues()
    G = np.where(np.abs(ev[:, None] - ev[None, :]) < 1e-8, M, 0)
    h0_new, d_new = dress(m.h0, d, G, references=models.rabi_dressed_references(m), secondary=m.secondary)
    assert set(d_new.bands()) <= {1, -1, None}
    cf = m.closed_form
    ev_new = d_new.eigenvalues()
    for j, lab in enumerate(d_new.labels):
        n = lab.get("n")
        if n is not None and n < 15:
            assert ev_new[j] == pytest.approx(cf.energy(n) + cf.dressed_energy(n, lab.get("sigma")), abs=1e-9)
    # the dressed H0 has no matrix elements inside degenerate levels
    M_new = d_new.to_frame(h0_new)
    same = np.abs(d_new.weights[:, 0][:, None] - d_new.weights[:, 0][None, :]) < 1e-8
    assert np.abs(M_new[same]).max() < 1e-10


def test_free_propagator_rejects_nonfinite_time():
    d = models.driven_two_level(0.1, 1.0, 1.0).decompose()
    with pytest.raises(ValueError):
        free_propagator(d, math.inf)


def test_static_free_propagator_is_exponential():
    m = models.quantum_rabi(0.1, 1.0, 0.5, 30)
    d = m.decompose()
    V = m.drive[0][0].matrix
    assert np.abs(free_propagator(d, 1.7).matrix - expm(-1j * 1.7 * V)).max() < 1e-10
