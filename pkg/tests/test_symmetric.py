"""Anti-diagonal decoupling and the modified MUSIC pipeline."""

import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import nfls
from nfls.errors import NoPeakError
from nfls.subspace import CovarianceEstimate, eig_decompose, sample_covariance
from nfls.symmetric import (anti_diagonal_vector, direction_music,
                            distance_music_per_direction, gamma_to_theta,
                            modified_music, subvector_covariance, theta_to_gamma)

from conftest import WAVELENGTH

LAM = WAVELENGTH
D4 = LAM / 4


def fresnel_model_covariance(half_size, spacing, thetas, rs, powers=None):
    """Noiseless covariance under the quadratic phase model (oracle)."""
    m = half_size
    delta = np.arange(-m, m + 1)
    n = 2 * m + 1
    r_mat = np.zeros((n, n), dtype=complex)
    powers = powers if powers is not None else [1.0] * len(thetas)
    for th, r, eps in zip(thetas, rs, powers):
        gamma = theta_to_gamma(th, spacing, LAM)
        psi = np.pi * spacing**2 * np.sin(th) ** 2 / (LAM * r)
        a = np.exp(-1j * (delta * gamma + delta**2 * psi))
        r_mat += eps * np.outer(a, a.conj())
    return (r_mat + r_mat.conj().T) / 2


class TestElectricAngles:
    def test_broadside_zero(self):
        assert theta_to_gamma(np.pi / 2, D4, LAM) == pytest.approx(0.0, abs=1e-15)

    @given(st.floats(1e-3, np.pi - 1e-3))
    @settings(max_examples=1000)
    def test_round_trip(self, theta):
        g = theta_to_gamma(theta, D4, LAM)
        assert gamma_to_theta(g, D4, LAM) == pytest.approx(theta, abs=1e-12)

    def test_round_trip_near_endpoints(self):
        # arccos conditioning degrades as sin(theta) -> 0
        for theta in (1e-5, np.pi - 1e-5):
            g = theta_to_gamma(theta, D4, LAM)
            assert gamma_to_theta(g, D4, LAM) == pytest.approx(theta, abs=1e-9)

    def test_quarter_wavelength_span_unambiguous(self):
        # d = lambda/4: gamma spans exactly (-pi/2, pi/2), doubled (-pi, pi)
        bound = 2 * np.pi * D4 / LAM
        assert bound == pytest.approx(np.pi / 2, rel=1e-12)
        assert 2 * theta_to_gamma(np.pi - 1e-6, D4, LAM) < np.pi
        assert 2 * theta_to_gamma(1e-6, D4, LAM) > -np.pi

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            gamma_to_theta(2.0, D4, LAM)


class TestAntiDiagonal:
    def test_identity_center_impulse(self):
        cov = CovarianceEstimate(r=np.eye(7, dtype=complex), n_samples=1)
        ybar = anti_diagonal_vector(cov, denoise_center=False)
        expected = np.zeros(7, complex)
        expected[3] = 1.0
        np.testing.assert_allclose(ybar, expected, atol=1e-15)

    def test_even_count_rejected(self):
        with pytest.raises(ValueError):
            anti_diagonal_vector(CovarianceEstimate(r=np.eye(4, dtype=complex),
                                                    n_samples=1))

    def test_broadside_single_target_all_ones(self):
        # gamma = 0 at broadside: every anti-diagonal entry equals the power
        r = fresnel_model_covariance(16, D4, [np.pi / 2], [4.0])
        ybar = anti_diagonal_vector(CovarianceEstimate(r=r, n_samples=1),
                                    denoise_center=True)
        np.testing.assert_allclose(ybar, 1.0, atol=1e-10)

    def test_distance_free_exact_under_quadratic_model(self):
        # the quadratic-model anti-diagonal is exactly invariant to distances
        thetas = [0.9, 1.7, 2.3]
        for m in (8, 24):
            y1 = anti_diagonal_vector(CovarianceEstimate(
                r=fresnel_model_covariance(m, D4, thetas, [3.0, 5.0, 7.0]),
                n_samples=1), denoise_center=False)
            y2 = anti_diagonal_vector(CovarianceEstimate(
                r=fresnel_model_covariance(m, D4, thetas, [30.0, 0.5, 700.0]),
                n_samples=1), denoise_center=False)
            np.testing.assert_allclose(y1, y2, atol=1e-12)

    def test_doubled_exponent_structure(self):
        # entries follow exp(-2j*delta*gamma) for one unit-power target
        m, th = 12, 1.3
        r = fresnel_model_covariance(m, D4, [th], [5.0])
        ybar = anti_diagonal_vector(CovarianceEstimate(r=r, n_samples=1),
                                    denoise_center=False)
        g = theta_to_gamma(th, D4, LAM)
        delta = np.arange(-m, m + 1)
        np.testing.assert_allclose(ybar, np.exp(-2j * delta * g), atol=1e-12)

    def test_exact_model_deviation_bound_at_10x_validity_radius(self, sym257):
        # oracle: exact-steering covariance vs the ideal exponential; golden
        r = 10 * nfls.fresnel_validity_radius(sym257.aperture, LAM)
        worst = 0.0
        for th in (0.7, 1.2, np.pi / 2, 2.1):
            a = nfls.near_field_steering(sym257, LAM, th, r)
            cov = CovarianceEstimate(r=np.outer(a, a.conj()), n_samples=1)
            ybar = anti_diagonal_vector(cov, denoise_center=False)
            g = theta_to_gamma(th, D4, LAM)
            delta = np.arange(-sym257.half_size, sym257.half_size + 1)
            worst = max(worst, np.abs(ybar - np.exp(-2j * delta * g)).max())
        assert worst < 0.013  # recorded from the exact-covariance oracle

    def test_center_denoise_uses_noise_floor(self):
        r = fresnel_model_covariance(8, D4, [1.2], [5.0]) + 0.25 * np.eye(17)
        ybar = anti_diagonal_vector(CovarianceEstimate(r=r, n_samples=1),
                                    denoise_center=True)
        g = theta_to_gamma(1.2, D4, LAM)
        assert ybar[8] == pytest.approx(np.exp(-2j * 0 * g), abs=1e-9)


class TestSubvectorCovariance:
    def test_single_window_rank_one(self):
        ybar = np.exp(1j * np.linspace(0, 3, 9))
        rt = subvector_covariance(ybar, 1)
        np.testing.assert_allclose(rt, np.outer(ybar, ybar.conj()), atol=1e-14)

    def test_single_target_rank_one(self):
        r = fresnel_model_covariance(16, D4, [1.1], [5.0])
        ybar = anti_diagonal_vector(CovarianceEstimate(r=r, n_samples=1),
                                    denoise_center=False)
        rt = subvector_covariance(ybar, 8)
        w = np.linalg.eigvalsh(rt)[::-1]
        assert w[1] / w[0] < 1e-10

    def test_window_consistency(self):
        rng = np.random.default_rng(0)
        ybar = rng.standard_normal(21) + 1j * rng.standard_normal(21)
        j = 6
        ns = 21 + 1 - j
        windows = [ybar[i:i + ns] for i in range(j)]
        # stacking the windows reproduces ybar; each entry appears in the
        # expected number of windows
        counts = np.zeros(21, int)
        for i, w in enumerate(windows):
            np.testing.assert_array_equal(w, ybar[i:i + ns])
            counts[i:i + ns] += 1
        expected = np.minimum(np.minimum(np.arange(21) + 1, 21 - np.arange(21)),
                              np.minimum(j, ns))
        np.testing.assert_array_equal(counts, expected)

    def test_rank_five_in_reference_scene(self, sym257):
        # R_tilde is structurally rank <= J, so rank is read against the
        # leading eigenvalue; the five signal eigenvalues sit well above the
        # window-noise bulk (recorded gap > 5x at this seed)
        targets = [nfls.TargetState(theta=t, r=r) for t, r in
                   [(0.9, 4.0), (1.2, 5.5), (1.5, 3.5), (1.9, 6.5), (2.2, 4.8)]]
        snap = nfls.synthesize_fixed(sym257, LAM, targets, 200,
                                     nfls.NoiseModel.from_snr_db(0.0), seed=3)
        ybar = anti_diagonal_vector(sample_covariance(snap))
        rt = subvector_covariance(ybar, 50)
        w = np.linalg.eigvalsh(rt)[::-1]
        assert int(np.sum(w > 0.1 * w[0])) == 5
        assert w[4] / w[5] > 5.0

    def test_j_out_of_range(self):
        with pytest.raises(ValueError):
            subvector_covariance(np.ones(9, complex), 0)
        with pytest.raises(ValueError):
            subvector_covariance(np.ones(9, complex), 10)


class TestDirectionMusic:
    def test_single_target_noiseless_within_cell(self):
        m, th = 32, 1.15
        r = fresnel_model_covariance(m, D4, [th], [5.0])
        ybar = anti_diagonal_vector(CovarianceEstimate(r=r, n_samples=1),
                                    denoise_center=False)
        rt = subvector_covariance(ybar, 12)
        gammas = np.linspace(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3, 1024)
        thetas, _spec = direction_music(rt, 1, gammas, m, D4, LAM)
        cell = np.pi / 1024
        assert abs(theta_to_gamma(thetas[0], D4, LAM)
                   - theta_to_gamma(th, D4, LAM)) < cell

    def test_cost_monotone_in_grid_size(self):
        m = 64
        r = fresnel_model_covariance(m, D4, [1.2, 1.8], [5.0, 6.0])
        ybar = anti_diagonal_vector(CovarianceEstimate(r=r, n_samples=1),
                                    denoise_center=False)
        rt = subvector_covariance(ybar, 26)
        times = []
        for g in (1024, 2048, 4096):
            gammas = np.linspace(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3, g)
            best = np.inf
            for _ in range(3):
                t0 = time.perf_counter()
                direction_music(rt, 2, gammas, m, D4, LAM)
                best = min(best, time.perf_counter() - t0)
            times.append(best)
        assert times[0] < times[1] < times[2]

    def test_two_targets_separated_by_mainlobe_resolved(self):
        # doubled-frequency identifiability at d = lambda/4
        m = 128
        n = 2 * m + 1
        hw = 1.4 * LAM / (np.pi * n * D4)  # direction mainlobe in cos-theta
        th1 = 1.3
        th2 = float(np.arccos(np.cos(th1) - 3 * hw))
        r = fresnel_model_covariance(m, D4, [th1, th2], [5.0, 6.0])
        ybar = anti_diagonal_vector(CovarianceEstimate(r=r, n_samples=1),
                                    denoise_center=False)
        rt = subvector_covariance(ybar, 50)
        gammas = np.linspace(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3, 4096)
        thetas, _ = direction_music(rt, 2, gammas, m, D4, LAM)
        assert abs(thetas[0] - th1) < 2e-3
        assert abs(thetas[1] - th2) < 2e-3


class TestDistanceSearch:
    def _noise_basis(self, sym, th, r):
        a = nfls.near_field_steering(sym, LAM, th, r)
        cov = CovarianceEstimate(r=np.outer(a, a.conj()) + 1e-12 * np.eye(sym.n),
                                 n_samples=1)
        return eig_decompose(cov, 1).noise

    def test_noiseless_peak_at_truth(self, sym257):
        th, r_true = 1.2, 5.5
        un = self._noise_basis(sym257, th, r_true)
        rs = np.sort(1 / np.linspace(1 / 12.0, 1 / 2.8, 512))
        r_hat, spec = distance_music_per_direction(un, th, rs, sym257, LAM)
        j = np.argmin(np.abs(1 / rs - 1 / r_true))
        assert abs(np.argmin(np.abs(rs - r_hat)) - j) <= 1
        assert spec.meta["kind"] == "distance"

    def test_direction_offset_bias_golden_curve(self, sym257):
        # recorded sensitivity: one 1024-cell gamma-grid step of direction
        # error biases the distance estimate by about 0.05 m at r = 5.5
        th, r_true = 1.2, 5.5
        un = self._noise_basis(sym257, th, r_true)
        rs = np.sort(1 / np.linspace(1 / 12.0, 1 / 2.8, 1024))
        dv = 2.0 / 1023
        biases = []
        for off in (-1, 0, 1):
            th_off = float(np.arccos(np.clip(np.cos(th) + off * dv, -1, 1)))
            r_hat, _ = distance_music_per_direction(un, th_off, rs, sym257, LAM)
            biases.append(r_hat - r_true)
        assert abs(biases[1]) < 0.01
        assert biases[0] == pytest.approx(+0.048, abs=0.02)
        assert biases[2] == pytest.approx(-0.048, abs=0.02)

    def test_flat_spectrum_no_peak(self, sym257):
        un = np.eye(sym257.n, dtype=complex)  # denominator ||a||^2: flat
        rs = np.linspace(3.0, 10.0, 64)
        with pytest.raises(NoPeakError):
            distance_music_per_direction(un, 1.2, rs, sym257, LAM)

    def test_invalid_direction(self, sym257):
        with pytest.raises(ValueError):
            distance_music_per_direction(np.eye(sym257.n, 4, dtype=complex),
                                         3.5, np.linspace(3, 8, 16), sym257, LAM)


class TestModifiedMusic:
    RS = np.sort(1 / np.linspace(1 / 12.0, 1 / 2.8, 256))

    def test_half_wavelength_spacing_rejected(self):
        geo = nfls.symmetric_ula(16, LAM / 2)
        y = np.zeros((33, 8), complex)
        with pytest.raises(ValueError, match="spacing"):
            modified_music(y, 1, geo, LAM, rs=self.RS)

    def test_asymmetric_rejected(self):
        geo = nfls.ula(32, D4)  # even count
        with pytest.raises(ValueError, match="symmetry"):
            modified_music(np.zeros((32, 8), complex), 1, geo, LAM, rs=self.RS)

    def test_grid_below_validity_radius_rejected(self, sym257):
        rs = np.linspace(0.5, 10.0, 64)
        with pytest.raises(ValueError, match="Fresnel radius"):
            modified_music(np.zeros((257, 8), complex), 1, sym257, LAM, rs=rs)

    def test_single_target_high_snr_within_cell(self, sym257):
        tgt = nfls.TargetState(theta=1.3, r=5.0)
        noise = nfls.NoiseModel.from_snr_db(20.0)
        hits = 0
        trials = 20
        for seed in range(trials):
            snap = nfls.synthesize_fixed(sym257, LAM, [tgt], 200, noise, seed=seed)
            res = modified_music(snap.y, 1, sym257, LAM, rs=self.RS, n_subvectors=50)
            th_hat, r_hat = res.pairs[0]
            dv_cell = 2.0 / 2047
            ok_t = abs(np.cos(th_hat) - np.cos(tgt.theta)) <= dv_cell
            j0 = np.argmin(np.abs(1 / self.RS - 1 / tgt.r))
            j1 = np.argmin(np.abs(self.RS - r_hat))
            hits += ok_t and abs(j1 - j0) <= 1
        assert hits >= 0.95 * trials

    def test_agreement_with_full_music_single_target(self, sym257):
        # decoupled and full 2-D searches agree within a cell on most seeds
        tgt = nfls.TargetState(theta=1.25, r=5.2)
        noise = nfls.NoiseModel.from_snr_db(10.0)
        grid = nfls.LocationGrid(thetas=np.arccos(np.linspace(0.9, -0.9, 1024))[::-1].copy(),
                                 rs=self.RS)
        agree = 0
        trials = 10
        for seed in range(trials):
            snap = nfls.synthesize_fixed(sym257, LAM, [tgt], 200, noise, seed=seed)
            res = modified_music(snap.y, 1, sym257, LAM, rs=self.RS, n_subvectors=50)
            dec = eig_decompose(sample_covariance(snap), 1)
            sg = nfls.spectrum_single(dec.signal, sym257, LAM, grid)
            i, j = sg.argmax_cell()
            th2, r2 = grid.thetas[i], grid.rs[j]
            th1, r1 = res.pairs[0]
            dv_cell = 1.8 / 1023
            j1 = np.argmin(np.abs(self.RS - r1))
            agree += (abs(np.cos(th1) - np.cos(th2)) <= dv_cell and abs(j1 - j) <= 1)
        assert agree >= 0.9 * trials

    def test_reference_scene_recovery(self, sym257):
        targets = [nfls.TargetState(theta=t, r=r) for t, r in
                   [(0.9, 4.0), (1.2, 5.5), (1.5, 3.5), (1.9, 6.5), (2.2, 4.8)]]
        snap = nfls.synthesize_fixed(sym257, LAM, targets, 200,
                                     nfls.NoiseModel.from_snr_db(0.0), seed=3)
        res = modified_music(snap.y, 5, sym257, LAM, rs=self.RS, n_subvectors=50)
        truth = np.array(sorted((t.theta, t.r) for t in targets))
        np.testing.assert_allclose(res.pairs[:, 0], truth[:, 0], atol=5e-3)
        np.testing.assert_allclose(res.pairs[:, 1], truth[:, 1], rtol=0.02)
        assert res.direction_spectrum.meta["kind"] == "direction"
        assert len(res.distance_spectra) == 5


class TestRandomizedInvariants:
    @given(st.integers(0, 2**31 - 1), st.integers(1, 3), st.integers(4, 12))
    @settings(max_examples=1000)
    def test_distance_cancellation_random_scenes(self, seed, k, m):
        # the quadratic-model anti-diagonal never depends on the distances
        rng = np.random.default_rng(seed)
        thetas = rng.uniform(0.4, np.pi - 0.4, k)
        y1 = anti_diagonal_vector(CovarianceEstimate(
            r=fresnel_model_covariance(m, D4, thetas, rng.uniform(1, 10, k)),
            n_samples=1), denoise_center=False)
        y2 = anti_diagonal_vector(CovarianceEstimate(
            r=fresnel_model_covariance(m, D4, thetas, rng.uniform(0.2, 100, k)),
            n_samples=1), denoise_center=False)
        np.testing.assert_allclose(y1, y2, atol=1e-10)

    @given(st.integers(0, 2**31 - 1), st.integers(1, 15))
    @settings(max_examples=1000)
    def test_window_consistency_random(self, seed, j):
        rng = np.random.default_rng(seed)
        n = 15
        ybar = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ns = n + 1 - j
        if ns < 2:
            return
        rt = subvector_covariance(ybar, j)
        manual = sum(np.outer(ybar[i:i + ns], ybar[i:i + ns].conj())
                     for i in range(j)) / j
        np.testing.assert_allclose(rt, manual, atol=1e-12)
