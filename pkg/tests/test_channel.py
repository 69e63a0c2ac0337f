import numpy as np
import pytest

from masm_rls.channel import (
    ChannelEnsemble,
    complex_gaussian,
    haar_unitary,
    sample_channel,
    sigma2_from_snr_db,
    transmit,
)
from masm_rls.spectral import ks_distance_mp


def test_iid_gaussian_entry_power(rng):
    h = sample_channel(ChannelEnsemble("iid-gaussian", 80, 160), rng)
    assert h.shape == (80, 160)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1 / 160, rel=0.05)
    assert np.var(h.real) == pytest.approx(1 / 320, rel=0.05)


def test_pm1_entries_exact(rng):
    h = sample_channel(ChannelEnsemble("iid-pm1", 10, 16), rng)
    assert np.all(np.isin(h, [1 / 4, -1 / 4]))


def test_cpm1_entries_exact(rng):
    h = sample_channel(ChannelEnsemble("iid-cpm1", 10, 16), rng)
    assert np.allclose(np.abs(h.real), 1 / np.sqrt(32), rtol=1e-15)
    assert np.allclose(np.abs(h.imag), 1 / np.sqrt(32), rtol=1e-15)
    assert 0 < np.mean(h.real > 0) < 1 and 0 < np.mean(h.imag > 0) < 1


def test_custom_entries(rng):
    ens = ChannelEnsemble("iid-custom", 40, 50, entry_sampler=lambda r, s: r.uniform(-np.sqrt(3), np.sqrt(3), s))
    h = sample_channel(ens, rng)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1 / 50, rel=0.1)


def test_bi_unitary_identity_singular_values(rng):
    h = sample_channel(ChannelEnsemble("bi-unitary", 4, 4, singular_values=[1, 1, 1, 1]), rng)
    assert np.allclose(h.conj().T @ h, np.eye(4), atol=1e-10)


def test_bi_unitary_singular_values(rng):
    sv = [3.0, 2.0, 0.5]
    h = sample_channel(ChannelEnsemble("bi-unitary", 3, 5, singular_values=sv), rng)
    assert np.allclose(np.linalg.svd(h, compute_uv=False), sv)


def test_haar_unitary_is_unitary_and_phase_uniform(rng):
    u = haar_unitary(6, rng)
    assert np.allclose(u.conj().T @ u, np.eye(6), atol=1e-12)
    # first-entry phases of Haar matrices are uniform: mean of e^{i phi} ~ 0
    ph = np.array([haar_unitary(3, rng)[0, 0] for _ in range(4000)])
    assert abs(np.mean(ph / np.abs(ph))) < 0.05


def test_ensemble_validation():
    with pytest.raises(ValueError):
        ChannelEnsemble("rician", 2, 2)
    with pytest.raises(ValueError):
        ChannelEnsemble("bi-unitary", 2, 3, singular_values=[1.0])


def test_transmit_noiseless_identity():
    obs = transmit(np.eye(2), np.array([1.0, 0.0]), 0.0, None)
    assert np.array_equal(obs.y, [1.0, 0.0])


def test_transmit_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        transmit(np.eye(2), np.ones(3), 0.1, rng)
    with pytest.raises(ValueError):
        transmit(np.eye(2), np.ones(2), -1.0, rng)


def test_noise_component_variance(rng):
    n = complex_gaussian(rng, 100_000, 1.0)
    assert np.var(n.real) == pytest.approx(0.5, rel=0.02)
    assert np.var(n.imag) == pytest.approx(0.5, rel=0.02)
    obs = transmit(np.zeros((100_000, 1)), np.zeros(1), 1.0, rng)
    assert np.var(obs.y.real) == pytest.approx(0.5, rel=0.02)


def test_snr_bookkeeping():
    assert sigma2_from_snr_db(14.0, 1.0) == pytest.approx(0.0398, abs=1e-4)


def test_mp_law_ks_over_20_draws(rng):
    ens = ChannelEnsemble("iid-gaussian", 80, 160)
    ks = [ks_distance_mp(np.linalg.eigvalsh(h.conj().T @ h), 0.5)
          for h in (sample_channel(ens, rng) for _ in range(20))]
    assert np.mean(ks) < 0.05
