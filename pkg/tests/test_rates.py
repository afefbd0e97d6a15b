import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nomakit import rates
from nomakit.rates import RatePoint, RsmaDownConfig, RsmaUpConfig

pos = st.floats(0.05, 20.0)


class TestRatePoint:
    def test_sum(self):
        assert RatePoint((0.1, 0.2, 0.3)).sum == pytest.approx(0.6, abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            RatePoint((1.0, -0.1))


class TestNomaDownlink:
    def test_two_user_example(self):
        r = rates.noma_downlink_rates([1, 1], [2, 1], 1.0)
        assert r.per_user == pytest.approx((math.log2(3), math.log2(1.5)), abs=1e-12)

    def test_single_user(self):
        assert rates.noma_downlink_rates([3.0], [0.5], 0.5).per_user[0] == pytest.approx(math.log2(4))

    def test_zero_power(self):
        assert rates.noma_downlink_rates([0, 0], [2, 1], 1.0).per_user == (0.0, 0.0)

    def test_unsorted_gains(self):
        with pytest.raises(ValueError, match="sorted"):
            rates.noma_downlink_rates([1, 1], [1, 2], 1.0)


class TestMac:
    def test_sum_log21(self):
        a, b = rates.mac_region_vertices(10, 10, 1, 1, 1)
        assert a.sum == pytest.approx(math.log2(21), abs=1e-12)
        assert b.sum == pytest.approx(math.log2(21), abs=1e-12)

    def test_p2_zero_collapse(self):
        a, b = rates.mac_region_vertices(4.0, 0.0, 1.0, 1.0, 1.0)
        assert a.per_user == b.per_user == pytest.approx((math.log2(5), 0.0))

    @settings(max_examples=60, deadline=None)
    @given(pos, pos, pos, pos, pos)
    def test_equal_sums(self, P1, P2, g1, g2, s2):
        a, b = rates.mac_region_vertices(P1, P2, g1, g2, s2)
        total = math.log2(1 + (P1 * g1 + P2 * g2) / s2)
        assert a.sum == pytest.approx(total, rel=1e-12)
        assert b.sum == pytest.approx(total, rel=1e-12)
        assert a.per_user[0] >= b.per_user[0]


def random_down(rng, K=3, M=4):
    H = rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))
    Pp = rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))
    return H, Pp


class TestRsmaDownlink:
    def test_no_common_is_tin(self, rng):
        for _ in range(20):
            H, Pp = random_down(rng)
            cfg = RsmaDownConfig(H, np.zeros(4), Pp, 0.3)
            Rc, private, totals = rates.rsma_downlink_rates(cfg)
            assert Rc == 0.0
            np.testing.assert_allclose(totals, rates.tin_rates(H, Pp, 0.3), atol=1e-12)

    def test_single_user_single_antenna(self):
        cfg = RsmaDownConfig([[0.5 + 0.5j]], [0.0], [[math.sqrt(4.0)]], 0.5)
        _, _, totals = rates.rsma_downlink_rates(cfg)
        assert totals[0] == pytest.approx(math.log2(1 + 4.0 * 0.5 / 0.5))

    def test_orthogonal_channels(self):
        h1, h2 = np.array([1.0, 0.0]), np.array([0.0, 2.0j])
        P = (3.0, 1.5)
        private = np.array([math.sqrt(P[0]) * h1 / np.linalg.norm(h1), math.sqrt(P[1]) * h2 / np.linalg.norm(h2)])
        _, _, totals = rates.rsma_downlink_rates(RsmaDownConfig([h1, h2], np.zeros(2), private, 1.0))
        assert totals == pytest.approx([math.log2(1 + 3.0), math.log2(1 + 1.5 * 4)])

    def test_common_rate_is_min_and_shared(self, rng):
        H, Pp = random_down(rng, K=2, M=2)
        pc = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        cfg = RsmaDownConfig(H, pc, Pp, 1.0, common_shares=(0.25, 0.75))
        Rc, private, totals = rates.rsma_downlink_rates(cfg)
        per_user = []
        for k in range(2):
            interf = sum(abs(np.vdot(H[k], Pp[l])) ** 2 for l in range(2))
            per_user.append(math.log2(1 + abs(np.vdot(H[k], pc)) ** 2 / (interf + 1.0)))
        assert Rc == pytest.approx(min(per_user), rel=1e-12)
        assert totals == pytest.approx([private[0] + 0.25 * Rc, private[1] + 0.75 * Rc])

    def test_shares_must_sum_to_one(self):
        with pytest.raises(ValueError):
            RsmaDownConfig(np.eye(2), np.zeros(2), np.eye(2), 1.0, common_shares=(0.5, 0.6))

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            RsmaDownConfig(np.eye(2), np.zeros(3), np.eye(2), 1.0)


class TestRsmaUplink:
    def test_unsplit_matches_mac(self):
        a, b = rates.mac_region_vertices(2.0, 3.0, 1.5, 0.5, 0.8)
        H = [[math.sqrt(1.5)], [math.sqrt(0.5)]]
        # user 1 carries everything in stream (0, 0)
        first2 = RsmaUpConfig(H, ((2.0, 0.0), (3.0,)), ((1, 0), (0, 0), (0, 1)), 0.8)
        first1 = RsmaUpConfig(H, ((2.0, 0.0), (3.0,)), ((0, 0), (0, 1), (1, 0)), 0.8)
        assert rates.rsma_uplink_rates(first2).per_user == pytest.approx(a.per_user, abs=1e-12)
        assert rates.rsma_uplink_rates(first1).per_user == pytest.approx(b.per_user, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(pos, pos, pos, pos, pos, st.floats(0, 1))
    def test_sum_independent_of_split(self, P1, P2, g1, g2, s2, frac):
        H = [[math.sqrt(g1)], [math.sqrt(g2)]]
        cfg = RsmaUpConfig(H, ((frac * P1, (1 - frac) * P1), (P2,)), ((0, 0), (1, 0), (0, 1)), s2)
        total = math.log2(1 + (P1 * g1 + P2 * g2) / s2)
        assert rates.rsma_uplink_rates(cfg).sum == pytest.approx(total, rel=1e-10)

    def test_order_must_cover_streams(self):
        with pytest.raises(ValueError, match="every stream"):
            RsmaUpConfig([[1.0], [1.0]], ((1.0, 1.0), (1.0,)), ((0, 0), (1, 0)), 1.0)

    def test_filter_noise_scaling(self):
        # an unnormalised filter must not change the rate
        H = np.array([[1.0, 0.5], [0.2, 1.0]])
        base = RsmaUpConfig(H, ((1.0, 1.0), (2.0,)), ((0, 0), (1, 0), (0, 1)), 0.5)
        scaled = RsmaUpConfig(H, ((1.0, 1.0), (2.0,)), ((0, 0), (1, 0), (0, 1)), 0.5,
                              filters={s: 3.0 * base.filter(s) for s in base.streams})
        assert rates.rsma_uplink_rates(base).per_user == pytest.approx(rates.rsma_uplink_rates(scaled).per_user)

    def test_sweep_traces_segment(self):
        pts = rates.rsma_uplink_split_sweep(10, 10, 1, 0.2, 1, grid_size=11)
        a, b = rates.mac_region_vertices(10, 10, 1, 0.2, 1)
        assert len(pts) == 11
        assert pts[0].per_user == pytest.approx(a.per_user, abs=1e-12)
        assert pts[-1].per_user == pytest.approx(b.per_user, abs=1e-12)
        r1 = [p.per_user[0] for p in pts]
        assert all(x >= y for x, y in zip(r1, r1[1:]))

    def test_sweep_grid_size(self):
        with pytest.raises(ValueError):
            rates.rsma_uplink_split_sweep(1, 1, 1, 1, 1, grid_size=1)


class TestMcs:
    @pytest.mark.parametrize("M,r,want", [(1024, 948 / 1024, 9.2578), (4, 30 / 1024, 0.0586), (16, 0.5, 2.0)])
    def test_values(self, M, r, want):
        assert rates.mcs_spectral_efficiency(M, r) == pytest.approx(want, abs=5e-5)

    @pytest.mark.parametrize("M,r", [(6, 0.5), (4, 0.0), (4, 1.5)])
    def test_invalid(self, M, r):
        with pytest.raises(ValueError):
            rates.mcs_spectral_efficiency(M, r)
