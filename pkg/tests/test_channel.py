"""Channel sampling, ordered SVD invariants, and the eigen-domain
observation model (including its agreement with the full physical path)."""

import numpy as np
import pytest

from slmimo import channel
from slmimo.channel import (ChannelRealization, MimoConfig, observe,
                            sample_channel, sample_channel_batch,
                            svd_ordered, svd_ordered_batch)


class TestSampling:
    def test_shapes_and_unit_variance(self):
        cfg = MimoConfig(n_t=4, n_r=6)
        rng = np.random.default_rng(1)
        hs = sample_channel_batch(cfg, rng, 20000)
        assert hs.shape == (20000, 6, 4)
        # CN(0,1): unit variance per entry, zero mean, independent parts
        assert np.mean(np.abs(hs) ** 2) == pytest.approx(1.0, abs=0.01)
        assert abs(np.mean(hs)) < 0.01
        assert np.mean(hs.real * hs.imag) == pytest.approx(0.0, abs=0.01)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MimoConfig(n_t=0, n_r=2)
        with pytest.raises(ValueError):
            MimoConfig(n_t=2, n_r=2, n0=0.0)
        assert MimoConfig(n_t=4, n_r=2).n == 2


class TestOrderedSvd:
    @pytest.mark.parametrize("n_t,n_r", [(2, 2), (4, 4), (4, 6), (6, 4)])
    def test_invariants(self, n_t, n_r):
        cfg = MimoConfig(n_t=n_t, n_r=n_r)
        rng = np.random.default_rng(7)
        for _ in range(50):
            chan = sample_channel(cfg, rng)
            spec = svd_ordered(chan)
            lam = spec.lambdas
            assert np.all(np.diff(lam) <= 0) and lam[-1] >= 0
            for u in (spec.u_bar, spec.v_bar):
                gram = u.conj().T @ u
                assert np.max(np.abs(gram - np.eye(spec.n))) < 1e-10
            fro2 = np.sum(np.abs(chan.h) ** 2)
            assert lam.sum() == pytest.approx(fro2, rel=1e-9)
            # H = u diag(sqrt(lambda)) v^H
            recon = spec.u_bar @ np.diag(np.sqrt(lam)) @ spec.v_bar.conj().T
            assert np.max(np.abs(recon - chan.h)) < 1e-10

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(3)
        hs = sample_channel_batch(MimoConfig(4, 4), rng, 5)
        lam_b, _, _ = svd_ordered_batch(hs)
        for i in range(5):
            spec = svd_ordered(ChannelRealization(h=hs[i]))
            np.testing.assert_allclose(lam_b[i], spec.lambdas, rtol=1e-12)

    def test_rejects_non_finite(self):
        h = np.full((2, 2), np.nan, dtype=complex)
        with pytest.raises(ValueError):
            ChannelRealization(h=h)


class TestObservation:
    def test_eigen_vs_full_path(self):
        cfg = MimoConfig(4, 4)
        rng = np.random.default_rng(11)
        for _ in range(20):
            chan = sample_channel(cfg, rng)
            spec = svd_ordered(chan)
            s = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            seed = int(rng.integers(2 ** 31))
            z1 = observe(spec, s, 0.5, np.random.default_rng(seed))
            z2 = observe(spec, s, 0.5, np.random.default_rng(seed),
                         full_path=True, h=chan.h)
            np.testing.assert_allclose(z1, z2, atol=1e-10)

    def test_noise_statistics(self):
        spec = svd_ordered(sample_channel(MimoConfig(4, 4),
                                          np.random.default_rng(0)))
        rng = np.random.default_rng(42)
        n0 = 0.8
        zs = np.array([observe(spec, np.zeros(4, dtype=complex), n0, rng)
                       for _ in range(20000)])
        assert np.mean(np.abs(zs) ** 2) == pytest.approx(n0, rel=0.03)

    def test_noiseless(self):
        spec = svd_ordered(sample_channel(MimoConfig(3, 3),
                                          np.random.default_rng(5)))
        s = np.ones(3, dtype=complex)
        z = observe(spec, s, 0.0, np.random.default_rng(0))
        np.testing.assert_allclose(z, np.sqrt(spec.lambdas) * s, atol=1e-12)

    def test_input_validation(self):
        spec = svd_ordered(sample_channel(MimoConfig(2, 2),
                                          np.random.default_rng(9)))
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            observe(spec, np.zeros(3, dtype=complex), 1.0, rng)
        with pytest.raises(ValueError):
            observe(spec, np.zeros(2, dtype=complex), -1.0, rng)
        with pytest.raises(ValueError):
            observe(spec, np.zeros(2, dtype=complex), 1.0, rng,
                    full_path=True)


class TestSpectrumSamples:
    def test_mean_matches_analytic(self, exp44):
        from slmimo.eigenstats import mean_ordered_eigenvalues

        rng = np.random.default_rng(2)
        lam = channel.eigen_spectrum_pdf_samples(MimoConfig(4, 4), rng,
                                                 200000)
        mc = lam.mean(axis=0)
        se = lam.std(axis=0) / np.sqrt(lam.shape[0])
        analytic = mean_ordered_eigenvalues(exp44)
        assert np.all(np.abs(mc - analytic) < 3.5 * se)
