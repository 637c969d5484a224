import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgtwave.model import Group, LatticeSpec, brillouin_zone, hamiltonian_matrix, momentum_projector, translation_operator
from lgtwave.spectra import (
    Excitation,
    classify_k0_excitation,
    diagonalize,
    fidelity,
    ground_state,
    mesonic_eigenpair,
    momentum_eigenpair,
    sector_spectra,
)


def test_benchmark_ground_energy(z2, z2_H):
    e0, v = ground_state(z2, z2_H)
    assert abs(e0 - (-5.3248)) < 5e-4
    assert abs(np.linalg.norm(v) - 1) < 1e-12


@pytest.mark.parametrize("spec", [LatticeSpec(Group.Z2, 6, 1.0, -0.3), LatticeSpec(Group.U1, 6, 1.0, 1.0, 1)])
def test_projectors_resolve_identity(spec):
    T = translation_operator(spec)
    Ps = [momentum_projector(spec, k, T) for k in brillouin_zone(spec.n_sites)]
    assert np.allclose(sum(Ps), np.eye(len(T)), atol=1e-12)
    for i, P in enumerate(Ps):
        assert np.allclose(P @ P, P, atol=1e-12)
        assert np.allclose(P, P.conj().T, atol=1e-12)
        for Q in Ps[i + 1:]:
            assert np.abs(P @ Q).max() < 1e-12


def test_sector_spectra_recombine(z2, z2_H):
    parts = np.sort(np.concatenate(list(sector_spectra(z2, z2_H).values())))
    assert np.allclose(parts, np.linalg.eigvalsh(z2_H), atol=1e-10)


def test_diagonalize_is_deterministic_and_canonical(z2, z2_H):
    a = diagonalize(z2_H)
    b = diagonalize(z2_H.copy())
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)
    V = a.eigenvectors
    assert np.allclose(V.conj().T @ V, np.eye(len(V)), atol=1e-10)
    assert np.allclose(z2_H @ V, V * a.eigenvalues, atol=1e-10)


def test_degenerate_frame_is_basis_independent():
    """A degenerate cluster gets the same frame after an arbitrary unitary mix."""
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    H = Q @ np.diag([0, 1, 1, 1, 2, 3]) @ Q.conj().T
    H = (H + H.conj().T) / 2
    a = diagonalize(H).eigenvectors[:, 1:4]
    # same operator, different numerical path
    P = np.eye(6)[::-1]
    b = P.T @ diagonalize(P @ H @ P.T).eigenvectors[:, 1:4]
    assert np.allclose(a @ a.conj().T, b @ b.conj().T, atol=1e-9)
    assert np.allclose(a, diagonalize(H).eigenvectors[:, 1:4])


def test_rejects_non_hermitian_and_bad_momentum(z2, z2_H):
    with pytest.raises(ValueError):
        diagonalize(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        diagonalize(z2_H, 0.4, spec=z2)
    with pytest.raises(ValueError):
        diagonalize(z2_H, 0.0)


@pytest.mark.parametrize("k", [-np.pi / 3, 0.0, np.pi / 3])
def test_momentum_eigenpair_properties(z2, z2_H, z2_vacuum, k):
    _, omega = z2_vacuum
    e, v = momentum_eigenpair(z2, k, H=z2_H, vacuum=omega)
    assert abs(omega.conj() @ v) < 1e-8
    assert np.allclose(z2_H @ v, e * v, atol=1e-9)
    P = momentum_projector(z2, k)
    assert np.allclose(P @ v, v, atol=1e-10)


def test_parity_pairs_have_equal_spectra(z2, z2_H):
    sp = sector_spectra(z2, z2_H)
    assert np.allclose(sp[-np.pi / 3], sp[np.pi / 3], atol=1e-10)


@given(st.integers(0, 1000), st.integers(1, 1000))
@settings(max_examples=30, deadline=None)
def test_fidelity_properties(seed, seed2):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=8) + 1j * rng.normal(size=8)
    a /= np.linalg.norm(a)
    b = np.random.default_rng(seed + seed2).normal(size=8) + 0j
    b /= np.linalg.norm(b)
    f = fidelity(a, b)
    assert 0 <= f <= 1
    assert abs(f - fidelity(b, a)) < 1e-14
    assert abs(fidelity(a, np.exp(0.3j) * a) - 1) < 1e-12


def test_fidelity_requires_normalized():
    with pytest.raises(ValueError):
        fidelity(np.array([1.0, 1.0]), np.array([1.0, 0.0]))


def test_classification_examples():
    assert classify_k0_excitation(LatticeSpec(Group.Z2, 6, 1.0, -0.3)).label is Excitation.MESONIC
    weak = classify_k0_excitation(LatticeSpec(Group.Z2, 6, 0.05, -0.01))
    assert weak.label is Excitation.NON_MESONIC
    assert weak.winding_overlap > 0.9


def test_mesonic_reference_skips_winding_state():
    spec = LatticeSpec(Group.Z2, 6, 2.0, -0.1)
    assert classify_k0_excitation(spec).label is Excitation.NON_MESONIC
    H = hamiltonian_matrix(spec)
    e_first, _ = momentum_eigenpair(spec, 0.0, H=H)
    e_mes, _ = mesonic_eigenpair(spec, 0.0, H=H)
    assert e_mes > e_first
