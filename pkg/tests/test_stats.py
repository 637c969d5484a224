import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from lgtwave.ansatz import WavePacketSpec, meson_matrix, wavepacket_exact
from lgtwave.model import Group, LatticeSpec, enumerate_physical_basis, vacuum_state
from lgtwave.simulate import ShotRecord, mitigate, sample
from lgtwave.stats import (
    DensityProfile,
    bootstrap,
    bootstrap_labels,
    fit_inverse_sqrt,
    normalized,
    occupation_matrix,
    rms_error,
    staggered_density,
    trunc_metrics,
)

SPECS = [LatticeSpec(Group.Z2, 6, 1.0, -0.3), LatticeSpec(Group.U1, 6, 1.0, 1.0, 1),
         LatticeSpec(Group.U1, 4, 1.0, 1.0, 2)]


@pytest.mark.parametrize("spec", SPECS)
def test_strong_coupling_vacuum_is_empty(spec):
    basis = enumerate_physical_basis(spec)
    v = np.zeros(len(basis), dtype=complex)
    v[basis.index(vacuum_state(spec))] = 1
    assert np.array_equal(staggered_density(spec, v).chi, np.zeros(spec.n_sites))


@given(st.sampled_from(SPECS), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_density_bounds_and_balance(spec, seed):
    v = random_state(len(enumerate_physical_basis(spec)), seed)
    chi = staggered_density(spec, v).chi
    assert np.all((chi >= 0) & (chi <= 1))
    # particles on even sites balance holes on odd sites at Q = N/2
    assert abs(chi[0::2].sum() - chi[1::2].sum()) < 1e-12


def test_z2_density_parity():
    """Each basis state's even-site particles match its odd-site holes exactly."""
    spec = SPECS[0]
    A = occupation_matrix(spec)
    for j in range(A.shape[1]):
        chi = A[:, j] + np.array([0, 1] * 3)
        assert chi[0::2].sum() == chi[1::2].sum()


def test_density_validation(z2):
    with pytest.raises(ValueError):
        DensityProfile(np.array([0.2, 1.3]))
    with pytest.raises(ValueError):
        staggered_density(z2, np.full(40, 0.5))
    with pytest.raises(ValueError):
        staggered_density(z2, np.full(10, 0.1))


def test_error_propagation_is_linear(z2):
    p = normalized(np.arange(1, 41, dtype=float))
    err = np.full(40, 0.01)
    prof = staggered_density(z2, p, err)
    A = occupation_matrix(z2)
    assert np.allclose(prof.stderr, 0.01 * np.sqrt((A != 0).sum(axis=1)))
    assert prof.to_csv().splitlines()[0] == "site,chi,stderr"


@pytest.fixture(scope="module")
def profiles(z2, z2_vacuum, z2_params):
    omega = z2_vacuum[1]
    out = {}
    for key, sigma, mu in (("pi6", math.pi / 6, 3.0), ("pi10", math.pi / 10, 3.0), ("pi6_mu5", math.pi / 6, 5.0)):
        out[key] = staggered_density(z2, wavepacket_exact(z2, WavePacketSpec(sigma, mu, 0.0), z2_params, omega=omega))
    return out


def test_wider_sigma_gives_narrower_packet(profiles):
    a, b = profiles["pi6"], profiles["pi10"]
    assert abs(a.center() - 3) < 0.5
    assert a.second_moment(3.0) < b.second_moment(3.0)


def test_mu_shift_translates_profile(profiles):
    assert np.abs(profiles["pi6_mu5"].chi - np.roll(profiles["pi6"].chi, 2)).max() < 1e-2


def test_trunc_metrics_basics(z2_H):
    v = random_state(40, 0)
    F, dE = trunc_metrics(v, v, z2_H)
    assert F == pytest.approx(1.0) and dE == 0.0
    with pytest.raises(ValueError):
        trunc_metrics(2 * v, v, z2_H)
    with pytest.raises(ZeroDivisionError):
        trunc_metrics(v, v, np.zeros((40, 40)))


@pytest.mark.parametrize("table", ["table_pi6", "table_pi10"])
def test_truncation_fidelity_falls_with_threshold(request, z2, z2_vacuum, z2_params, table):
    """Dense e^{-i pi/2 Theta} at every threshold; dropping a term never beats the best smaller-threshold F."""
    t = request.getfixturevalue(table)
    sigma = math.pi / 6 if table == "table_pi6" else math.pi / 10
    omega = z2_vacuum[1]
    exact = wavepacket_exact(z2, WavePacketSpec(sigma, 3.0, 0.0), z2_params, omega=omega)
    fids = []
    for th in sorted({abs(c) for c in t.C.ravel()}):
        B = np.zeros((40, 40), dtype=complex)
        for m in range(6):
            for n in range(6):
                if abs(t.C[m, n]) >= th:
                    B += t.C[m, n] * meson_matrix(z2, m, n)
        Z = np.zeros_like(B)
        out = sla.expm(-0.5j * math.pi * np.block([[Z, B.conj().T], [B, Z]])) @ np.concatenate([omega, 0 * omega])
        r = out[40:]
        fids.append(trunc_metrics(r / np.linalg.norm(r), exact, np.eye(40))[0])
    assert all(f <= max(fids[:i + 1]) + 2e-4 for i, f in enumerate(fids[1:]))
    assert fids[0] > 0.999 and fids[-1] < 0.5


@given(st.integers(0, 1000), st.integers(1, 1000))
@settings(max_examples=30, deadline=None)
def test_rms_properties(s1, s2):
    a = normalized(np.random.default_rng(s1).random(40))
    b = normalized(np.random.default_rng(s1 + s2).random(40))
    assert rms_error(a, a) == 0
    assert rms_error(a, b) == rms_error(b, a) > 0


def test_rms_length_mismatch():
    with pytest.raises(ValueError):
        rms_error(np.ones(3) / 3, np.ones(4) / 4)


def test_inverse_sqrt_fit_recovers_exact_law():
    c, dev = fit_inverse_sqrt([100, 500, 2500], [0.3 / math.sqrt(n) for n in (100, 500, 2500)])
    assert c == pytest.approx(0.3) and dev < 1e-12


def test_bootstrap_identical_events_have_no_spread(z2):
    rec = ShotRecord(("0010110000101",) * 50, 1, 13)
    rep = bootstrap(rec, z2, n_resamples=500, seed=0)
    assert np.all(rep.prob_std == 0)
    assert rep.plug_in.max() == 1.0


def test_bootstrap_bernoulli_oracle():
    n, p = 1000, 0.3
    labels = (np.random.default_rng(4).random(n) < p).astype(int)
    p_hat = labels.mean()
    _, std, _ = bootstrap_labels(labels, 2, n_resamples=10_000, seed=1)
    assert abs(std[1] / math.sqrt(p_hat * (1 - p_hat) / n) - 1) < 0.1


def test_bootstrap_converges(z2, trunc_state):
    rec = sample(trunc_state, 500, 7)
    a = bootstrap(rec, z2, n_resamples=10_000, seed=1)
    b = bootstrap(rec, z2, n_resamples=100_000, seed=2)
    assert np.abs(b.prob_mean - b.plug_in).max() < 1e-3
    assert np.abs(a.prob_mean - b.prob_mean).max() < 2e-3
    big = b.prob_std > 0.02
    assert np.abs(a.prob_std[big] / b.prob_std[big] - 1).max() < 0.03
    assert np.allclose(a.plug_in, mitigate(rec, z2).probabilities)
    assert abs(a.prob_mean.sum() - 1) < 1e-12
    assert a.chi.stderr is not None and a.n_events == 500
    assert a.to_csv().count("\n") == 41


def test_bootstrap_rejects_empty(z2):
    with pytest.raises(ValueError):
        bootstrap_labels(np.array([], dtype=int), 3)
    with pytest.raises(ValueError):
        bootstrap(ShotRecord(("1" * 13,), None, 13), z2)
    with pytest.raises(ValueError):
        normalized(np.zeros(3))
