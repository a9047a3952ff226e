import json
import math

import numpy as np
import pytest

from subnyq.channel import (
    ChannelState,
    CompoundChannel,
    enumerate_states,
    load_channel,
    snr_summary,
)


class TestChannelState:
    def test_valid(self):
        s = ChannelState((1, 4, 7))
        assert s.k == 3
        assert list(s.zero_based()) == [0, 3, 6]

    def test_sorted_required(self):
        with pytest.raises(ValueError):
            ChannelState((3, 1))
        with pytest.raises(ValueError):
            ChannelState((2, 2))

    def test_one_based(self):
        with pytest.raises(ValueError):
            ChannelState((0, 1))

    def test_colex_key_orders_by_largest(self):
        assert ChannelState((1, 4)).colex_key() < ChannelState((2, 4)).colex_key()
        assert ChannelState((2, 3)).colex_key() < ChannelState((1, 4)).colex_key()


class TestEnumerateStates:
    def test_three_choose_two(self):
        out = enumerate_states(3, 2, 10)
        assert not out.sampled
        assert [s.indices for s in out] == [(1, 2), (1, 3), (2, 3)]

    def test_two_choose_one(self):
        out = enumerate_states(2, 1, 10)
        assert [s.indices for s in out] == [(1,), (2,)]

    def test_colex_order_four_choose_two(self):
        out = enumerate_states(4, 2, 100)
        assert [s.indices for s in out] == [
            (1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4),
        ]

    def test_sixteen_choose_four_exhaustive(self):
        out = enumerate_states(16, 4, 5000)
        assert not out.sampled
        # independent count: product formula
        assert len(out) == 16 * 15 * 14 * 13 // 24 == 1820
        assert len({s.indices for s in out}) == 1820

    def test_deterministic(self):
        a = enumerate_states(10, 3, 50)
        b = enumerate_states(10, 3, 50)
        assert [s.indices for s in a] == [s.indices for s in b]

    def test_sampled_branch(self):
        out = enumerate_states(30, 10, 100)
        assert out.sampled
        assert len(out) == 100
        assert len({s.indices for s in out}) == 100
        for s in out:
            assert s.k == 10
            assert s.indices[-1] <= 30
        again = enumerate_states(30, 10, 100)
        assert [s.indices for s in out] == [s.indices for s in again]

    def test_count_matches_binomial(self):
        for n, k in [(6, 2), (7, 3), (9, 4)]:
            assert len(enumerate_states(n, k, 10**6)) == math.comb(n, k)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            enumerate_states(4, 4, 10)
        with pytest.raises(ValueError):
            enumerate_states(4, 0, 10)
        with pytest.raises(ValueError):
            enumerate_states(4, 2, 0)


class TestCompoundChannel:
    def test_basic_properties(self):
        ch = CompoundChannel(
            bandwidth=8.0, n_subbands=4, k_active=2, power=3.0,
            gain_grid=np.ones((4, 2)),
        )
        assert ch.beta == 0.5
        assert ch.q == 2
        assert ch.grid_df == pytest.approx(1.0)

    def test_validation(self):
        good = dict(bandwidth=1.0, n_subbands=4, k_active=2, power=1.0,
                    gain_grid=np.ones((4, 1)))
        with pytest.raises(ValueError):
            CompoundChannel(**{**good, "bandwidth": 0.0})
        with pytest.raises(ValueError):
            CompoundChannel(**{**good, "k_active": 4})
        with pytest.raises(ValueError):
            CompoundChannel(**{**good, "power": -1.0})
        with pytest.raises(ValueError):
            CompoundChannel(**{**good, "gain_grid": np.zeros((4, 1))})
        with pytest.raises(ValueError):
            CompoundChannel(**{**good, "gain_grid": np.ones((3, 1))})

    def test_gain_grid_immutable(self):
        ch = CompoundChannel(
            bandwidth=1.0, n_subbands=4, k_active=1, power=1.0,
            gain_grid=np.ones((4, 1)),
        )
        with pytest.raises(ValueError):
            ch.gain_grid[0, 0] = 2.0

    def test_json_round_trip(self, tmp_path):
        ch = CompoundChannel(
            bandwidth=4.0, n_subbands=4, k_active=2, power=2.5,
            gain_grid=np.array([[1.0], [1.5], [0.7], [2.0]]),
        )
        path = tmp_path / "channel.json"
        path.write_text(json.dumps(ch.to_dict()))
        loaded = load_channel(path)
        assert loaded.bandwidth == ch.bandwidth
        assert loaded.n_subbands == ch.n_subbands
        assert loaded.k_active == ch.k_active
        assert loaded.power == ch.power
        np.testing.assert_allclose(loaded.gain_grid, ch.gain_grid)

    def test_json_q_mismatch_rejected(self, tmp_path):
        doc = {"W": 1.0, "n": 4, "k": 1, "P": 1.0, "q": 3, "gains": [[1.0]] * 4}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError):
            load_channel(path)

    def test_per_state_gains(self):
        override = np.full((4, 1), 2.0)
        ch = CompoundChannel(
            bandwidth=4.0, n_subbands=4, k_active=2, power=1.0,
            gain_grid=np.ones((4, 1)),
            state_gains={(1, 2): override},
        )
        np.testing.assert_allclose(ch.gains_for(ChannelState((1, 2))), override)
        np.testing.assert_allclose(ch.gains_for(ChannelState((1, 3))), np.ones((4, 1)))


class TestSnrSummary:
    def test_flat_unit_gain(self):
        # P = beta * W makes the per-Hz SNR exactly 1
        ch = CompoundChannel(
            bandwidth=4.0, n_subbands=4, k_active=2, power=2.0,
            gain_grid=np.ones((4, 3)),
        )
        s = snr_summary(ch)
        assert s.snr_min == pytest.approx(1.0)
        assert s.snr_max == pytest.approx(1.0)
        assert s.snr_avg_max == pytest.approx(1.0)

    def test_flat_abar_both_forms(self):
        # flat gain: integral form = 1/beta, ratio form = 1 -> min is 1
        ch = CompoundChannel(
            bandwidth=6.0, n_subbands=6, k_active=2, power=5.0,
            gain_grid=np.full((6, 2), 1.7),
        )
        s = snr_summary(ch)
        assert s.snr_avg_max == pytest.approx(1.0)

    def test_two_gains(self):
        ch = CompoundChannel(
            bandwidth=2.0, n_subbands=2, k_active=1, power=1.0,
            gain_grid=np.array([[1.0], [2.0]]),
        )
        s = snr_summary(ch)
        assert s.snr_min == pytest.approx(1.0)
        assert s.snr_max == pytest.approx(4.0)

    def test_min_le_max_equality_iff_flat(self, gen):
        from conftest import random_channel

        for _ in range(20):
            ch = random_channel(gen)
            s = snr_summary(ch)
            assert s.snr_min <= s.snr_max
            if np.ptp(ch.gain_grid) > 0:
                assert s.snr_min < s.snr_max

    def test_high_snr_flag(self):
        ch = CompoundChannel(
            bandwidth=4.0, n_subbands=4, k_active=2, power=1e-6,
            gain_grid=np.ones((4, 1)),
        )
        assert not snr_summary(ch).high_snr_ok
