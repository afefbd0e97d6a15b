import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from nomakit import anoma, rates
from nomakit.anoma import DelayProfile, PulseShape, RateConvention


def rrc(t, beta, T=1.0):
    """Unit-energy root-raised-cosine pulse, evaluated pointwise."""
    t = np.asarray(t, dtype=float) / T
    out = np.empty_like(t)
    zero = np.isclose(t, 0.0)
    edge = np.isclose(np.abs(t), 1.0 / (4 * beta))
    rest = ~(zero | edge)
    out[zero] = 1 - beta + 4 * beta / math.pi
    out[edge] = beta / math.sqrt(2) * ((1 + 2 / math.pi) * math.sin(math.pi / (4 * beta))
                                       + (1 - 2 / math.pi) * math.cos(math.pi / (4 * beta)))
    x = t[rest]
    out[rest] = (np.sin(math.pi * x * (1 - beta)) + 4 * beta * x * np.cos(math.pi * x * (1 + beta))) / (
        math.pi * x * (1 - (4 * beta * x) ** 2))
    return out / math.sqrt(T)


class TestPulse:
    @pytest.mark.parametrize("tau", [0.0, 0.25, 0.5, 1.0, 1.5, 2.3])
    def test_autocorrelation_matches_numerical_convolution(self, tau):
        beta = 0.5
        t = np.linspace(-40, 40, 160_001)
        num = trapezoid(rrc(t, beta) * rrc(t - tau, beta), t)
        assert anoma.rc_autocorrelation(PulseShape(beta), tau) == pytest.approx(num, abs=2e-4)

    def test_nyquist_zeros(self):
        g = anoma.rc_autocorrelation(PulseShape(0.5), np.arange(-5, 6))
        np.testing.assert_allclose(g, (np.arange(-5, 6) == 0).astype(float), atol=1e-15)

    def test_singular_point_is_continuous(self):
        p = PulseShape(0.5)
        at = anoma.rc_autocorrelation(p, 1.0 / (2 * 0.5))
        near = anoma.rc_autocorrelation(p, 1.0 / (2 * 0.5) + 1e-7)
        assert at == pytest.approx(near, abs=1e-6)

    def test_half_offset_energy(self):
        # sum over lags of g(0.5 + n)^2 for beta = 0.5
        g = anoma.rc_autocorrelation(PulseShape(0.5), 0.5 + np.arange(-400, 400))
        assert float(np.sum(g ** 2)) == pytest.approx(0.75, abs=1e-6)

    @pytest.mark.parametrize("bad", [-0.1, 1.2])
    def test_rolloff_bounds(self, bad):
        with pytest.raises(ValueError):
            PulseShape(bad)

    def test_delay_bounds(self):
        with pytest.raises(ValueError):
            DelayProfile((0.0, 1.0))


class TestCorrelationBlock:
    def test_synchronous_block_is_identity(self):
        blk = anoma.build_correlation_block(PulseShape(0.5), 0.0, 8)
        np.testing.assert_allclose(blk.entries, np.eye(8), atol=1e-15)

    def test_toeplitz_entries(self):
        p = PulseShape(0.35)
        blk = anoma.build_correlation_block(p, 0.3, 5).entries
        for n in range(5):
            for m in range(5):
                assert blk[n, m] == pytest.approx(anoma.rc_autocorrelation(p, 0.3 + m - n))

    def test_full_correlation_is_symmetric_psd(self):
        model = anoma.build_virtual_mimo([1, 1], [1, 1], DelayProfile((0.0, 0.3)), PulseShape(0.5), 32)
        R = model.correlation
        np.testing.assert_allclose(R, R.T, atol=1e-14)
        assert np.linalg.eigvalsh(R).min() > -1e-10


class TestSynchronousOracles:
    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.1, 20), st.floats(0.1, 20), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.05, 5))
    def test_equal_delay_matches_mac(self, P1, P2, g1, g2, s2):
        model = anoma.build_virtual_mimo([math.sqrt(g1), math.sqrt(g2)], [P1, P2],
                                         DelayProfile((0.2, 0.2)), PulseShape(0.5), 4)
        A, B = rates.mac_region_vertices(P1, P2, g1, g2, s2)
        for receiver in ("sic", "branch", "joint"):
            ra = anoma.gaussian_rates(model, (1, 0), s2, receiver=receiver)
            rb = anoma.gaussian_rates(model, (0, 1), s2, receiver=receiver)
            np.testing.assert_allclose(ra, A.per_user, atol=1e-9)
            np.testing.assert_allclose(rb, B.per_user, atol=1e-9)

    def test_equal_delay_matches_downlink(self):
        P, g, s2 = [1.0, 2.0, 4.0], [3.0, 1.5, 0.5], 0.7
        want = rates.noma_downlink_rates(P, g, s2).per_user
        for k in range(3):
            model = anoma.build_virtual_mimo([math.sqrt(g[k])] * 3, P, DelayProfile((0.0,) * 3),
                                             PulseShape(0.5), 3)
            got = anoma.gaussian_rates(model, (2, 1, 0), s2)
            assert got[k] == pytest.approx(want[k], abs=1e-12)

    def test_synchronous_real_bandwidth_sum(self):
        model = anoma.build_virtual_mimo([1, 1], [10, 2], DelayProfile((0.0, 0.0)), PulseShape(0.5), 16)
        r = anoma.gaussian_rates(model, (0, 1), 1.0, RateConvention.REAL_BANDWIDTH_NORMALIZED)
        assert sum(r) == pytest.approx(0.5 * math.log2(13) / 1.5, abs=1e-12)


class TestAsynchronousRates:
    @pytest.fixture
    def half_offset(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return anoma.build_virtual_mimo([1, 1], [10, 2], DelayProfile((0.0, 0.5)), PulseShape(0.5), 64)

    def test_sic_closed_form(self, half_offset):
        # first user sees the other's in-frame symbol energy as white noise
        N = 64
        conv = RateConvention.REAL_BANDWIDTH_NORMALIZED
        r = anoma.gaussian_rates(half_offset, (0, 1), 1.0, conv)
        g = lambda t: anoma.rc_autocorrelation(PulseShape(0.5), t)
        bits = sum(math.log2(1 + 10 / (2 * sum(g(0.5 + m - n) ** 2 for m in range(N)) + 1)) for n in range(N))
        scale = 1 / (2 * N * 1.5)
        assert r[0] == pytest.approx(scale * bits, rel=1e-9)
        assert r[1] == pytest.approx(scale * N * math.log2(1 + 2), rel=1e-9)

    def test_sic_large_frame_limit(self):
        model = anoma.build_virtual_mimo([1, 1], [10, 2], DelayProfile((0.0, 0.5)), PulseShape(0.5), 512)
        r = anoma.gaussian_rates(model, (0, 1), 1.0, RateConvention.REAL_BANDWIDTH_NORMALIZED)
        assert r[0] == pytest.approx(math.log2(1 + 10 / 2.5) / 3, rel=2e-3)

    @pytest.mark.filterwarnings("ignore:noise covariance is singular")
    def test_joint_sum_is_order_free(self):
        model = anoma.build_virtual_mimo([1, 0.6], [3, 2], DelayProfile((0.0, 0.3)), PulseShape(0.5), 32)
        a = anoma.gaussian_rates(model, (0, 1), 0.5, receiver="joint")
        b = anoma.gaussian_rates(model, (1, 0), 0.5, receiver="joint")
        assert sum(a) == pytest.approx(sum(b), rel=1e-9)

    def test_joint_sum_order_free_with_ridge(self, half_offset):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            a = anoma.gaussian_rates(half_offset, (0, 1), 1.0, receiver="joint")
            b = anoma.gaussian_rates(half_offset, (1, 0), 1.0, receiver="joint")
        assert sum(a) == pytest.approx(sum(b), rel=1e-6)

    def test_singular_covariance_warns(self, half_offset):
        with pytest.warns(RuntimeWarning, match="singular"):
            anoma.gaussian_rates(half_offset, (0, 1), 1.0, receiver="joint")

    def test_async_beats_sync(self, half_offset):
        sync = anoma.build_virtual_mimo([1, 1], [10, 2], DelayProfile((0.0, 0.0)), PulseShape(0.5), 64)
        for order in ((0, 1), (1, 0)):
            assert sum(anoma.gaussian_rates(half_offset, order, 1.0)) > sum(anoma.gaussian_rates(sync, order, 1.0))

    def test_bad_order(self, half_offset):
        with pytest.raises(ValueError):
            anoma.gaussian_rates(half_offset, (0, 0), 1.0)
        with pytest.raises(ValueError):
            anoma.gaussian_rates(half_offset, (0, 1), 1.0, receiver="oracle")

    @pytest.mark.parametrize("receiver", ["sic", "branch"])
    def test_rates_non_increasing_in_noise(self, receiver):
        model = anoma.build_virtual_mimo([1, 1], [10, 2], DelayProfile((0.0, 0.3)), PulseShape(0.5), 16)
        prev = None
        for s2 in (0.25, 0.5, 1.0, 2.0, 4.0):
            r = np.array(anoma.gaussian_rates(model, (0, 1), s2, receiver=receiver))
            if prev is not None:
                assert np.all(r <= prev + 1e-12)
            prev = r

    def test_branch_rates_nonnegative(self, half_offset):
        r = anoma.gaussian_rates(half_offset, (1, 0), 1.0, receiver="branch")
        assert all(v >= 0 for v in r)


class TestModels:
    def test_covariance_layout(self):
        pulse = PulseShape(0.5)
        model = anoma.build_virtual_mimo([1, 1], [1, 1], DelayProfile((0.0, 0.5)), pulse, 4)
        R = model.correlation
        assert R.shape == (8, 8)
        np.testing.assert_allclose(R[:4, :4], np.eye(4), atol=1e-15)
        np.testing.assert_allclose(R[4:, 4:], np.eye(4), atol=1e-15)
        np.testing.assert_allclose(R[:4, 4:], anoma.build_correlation_block(pulse, 0.5, 4).entries)
        np.testing.assert_allclose(R[4:, :4], anoma.build_correlation_block(pulse, -0.5, 4).entries)

    def test_single_user_is_white(self):
        model = anoma.build_virtual_mimo([0.5j], [4.0], DelayProfile((0.3,)), PulseShape(), 5)
        np.testing.assert_allclose(model.noise_covariance(2.0), 2.0 * np.eye(5), atol=1e-15)
        np.testing.assert_allclose(model.observation, 1j * np.eye(5), atol=1e-15)

    def test_apply_is_linear_model(self, rng):
        model = anoma.build_virtual_mimo([1, 0.5j], [2, 1], DelayProfile((0.0, 0.3)), PulseShape(0.5), 10)
        s = rng.standard_normal((2, 10)) + 1j * rng.standard_normal((2, 10))
        y = model.apply(s)
        R01 = anoma.build_correlation_block(PulseShape(0.5), 0.3, 10).entries
        np.testing.assert_allclose(y[:10], math.sqrt(2) * s[0] + 0.5j * R01 @ s[1], atol=1e-12)

    def test_single_antenna_beamformed_equals_uplink(self):
        delays, pulse = DelayProfile((0.0, 0.4)), PulseShape(0.5)
        h, P = 0.8 + 0.3j, (2.0, 0.5)
        bf = anoma.build_beamformed_model([[h], [h]], [[math.sqrt(P[0]), math.sqrt(P[1])]], delays, pulse, 6)
        up = anoma.build_virtual_mimo([h, h], P, delays, pulse, 6)
        np.testing.assert_allclose(bf.observation, up.observation, atol=1e-14)

    def test_beamformed_shape_check(self):
        with pytest.raises(ValueError):
            anoma.build_beamformed_model(np.ones((2, 2)), np.ones((3, 2)), DelayProfile((0, 0.1)), PulseShape(), 4)

    def test_shared_delay_shares_branch(self):
        model = anoma.build_virtual_mimo([1, 1, 1], [1, 1, 1], DelayProfile((0.0, 0.3, 0.0)), PulseShape(), 4)
        assert model.branches == 2
        assert model.branch_of_user == (0, 1, 0)


class TestDetection:
    @pytest.mark.parametrize("method", ["ZF", "MMSE"])
    def test_noiseless_recovery(self, rng, method):
        model = anoma.build_virtual_mimo([1, 0.7], [1, 1], DelayProfile((0.0, 0.3)), PulseShape(0.5), 12)
        s = (rng.choice([-1, 1], (2, 12)) + 1j * rng.choice([-1, 1], (2, 12))) / math.sqrt(2)
        # the pulse overlap makes the model badly conditioned, so MMSE needs a tiny σ²
        est = anoma.linear_detect(model, model.apply(s), method, sigma2=1e-15)
        np.testing.assert_allclose(est, s, atol=1e-4)

    def test_mmse_tends_to_zf(self, rng):
        model = anoma.build_virtual_mimo([1, 0.7], [1, 1], DelayProfile((0.0, 0.3)), PulseShape(0.5), 4)
        s = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        y = model.apply(s) + 0.1 * rng.standard_normal(8)
        zf = anoma.linear_detect(model, y, "ZF")
        mmse = anoma.linear_detect(model, y, "MMSE", sigma2=1e-8)
        assert np.linalg.norm(mmse - zf) / np.linalg.norm(zf) < 1e-4

    def test_mmse_error_below_zf(self, rng):
        pulse, N = PulseShape(0.5), 4
        model = anoma.build_virtual_mimo([1, 0.7], [1, 1], DelayProfile((0.0, 0.3)), pulse, N)
        L = np.linalg.cholesky(model.noise_covariance(1.0))
        err = {"ZF": 0.0, "MMSE": 0.0}
        for _ in range(1000):
            s = (rng.standard_normal((2, N)) + 1j * rng.standard_normal((2, N))) / math.sqrt(2)
            n = L @ (rng.standard_normal(2 * N) + 1j * rng.standard_normal(2 * N)) / math.sqrt(2)
            y = model.apply(s) + n
            for method in err:
                err[method] += np.sum(np.abs(anoma.linear_detect(model, y, method, 1.0) - s) ** 2)
        assert err["MMSE"] <= err["ZF"]

    def test_mmse_scalar_reduction(self):
        # one user, white noise: x_hat = P/(P+σ²) · y/√P
        model = anoma.build_virtual_mimo([1.0], [4.0], DelayProfile((0.0,)), PulseShape(), 3)
        y = np.array([2.0, -2.0, 1.0 + 1j])
        est = anoma.linear_detect(model, y, "MMSE", sigma2=1.0)
        np.testing.assert_allclose(est[0], 2.0 / (4.0 + 1.0) * y, atol=1e-12)

    def test_zf_rank_deficient_raises(self):
        model = anoma.build_virtual_mimo([1, 1], [1, 1], DelayProfile((0.0, 0.0)), PulseShape(), 4)
        with pytest.raises(np.linalg.LinAlgError):
            anoma.linear_detect(model, np.zeros(4), "ZF")

    def test_unknown_method(self):
        model = anoma.build_virtual_mimo([1.0], [1.0], DelayProfile((0.0,)), PulseShape(), 2)
        with pytest.raises(ValueError):
            anoma.linear_detect(model, np.zeros(2), "LS")


class TestPrecoder:
    def test_eigen_decomposition(self):
        model = anoma.build_virtual_mimo([1, 1], [1, 1], DelayProfile((0.0, 0.3)), PulseShape(0.5), 8)
        U, w = anoma.tnoma_precoder(model.correlation)
        assert np.all(np.diff(w) <= 1e-12)
        np.testing.assert_allclose(model.correlation @ U, U * w, atol=1e-10)
        np.testing.assert_allclose(U.T @ U, np.eye(16), atol=1e-10)

    def test_two_by_two(self):
        rho = 0.3
        U, w = anoma.tnoma_precoder(np.array([[1, rho], [rho, 1]]))
        np.testing.assert_allclose(w, [1 + rho, 1 - rho])
        np.testing.assert_allclose(np.abs(U), np.full((2, 2), 1 / math.sqrt(2)))

    def test_random_correlation_diagonalised(self, rng):
        X = rng.standard_normal((64, 80))
        R = X @ X.T / 80
        U, w = anoma.tnoma_precoder(R)
        D = U.T @ R @ U
        assert np.max(np.abs(D - np.diag(w))) < 1e-9

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            anoma.tnoma_precoder(np.array([[1.0, 2.0], [0.0, 1.0]]))
