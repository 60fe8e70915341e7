import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_thresholds
from uavabr.sensors import QuantizerConfig, accel_magnitude, derive_thresholds, quantize
from uavabr.traces import TraceSample


def sample(distance=0.0, velocity=0.0, accel=(0.0, 0.0, 0.0)):
    return TraceSample(0.0, 1.0, distance, velocity, accel)


@pytest.mark.parametrize(
    "vec, expected",
    [((0, 0, 0), 0.0), ((3, 4, 0), 5.0), ((10, 10, 10), 17.3205)],
)
def test_accel_magnitude(vec, expected):
    assert accel_magnitude(vec) == pytest.approx(expected, abs=1e-4)


def test_gravity_removed_mode():
    assert accel_magnitude((0, 0, 9.80665), mode="gravity_removed") == pytest.approx(0.0)


class TestQuantize:
    def test_far_distance(self):
        assert quantize(sample(distance=60)).d_q == 1

    def test_mid_velocity(self):
        assert quantize(sample(velocity=10)).v_q == 1

    def test_strong_accel(self):
        assert quantize(sample(accel=(20, 0, 0))).a_q == 1

    @pytest.mark.parametrize("v, level", [(7.999, 0), (8.0, 1), (12.0, 1), (12.001, 2)])
    def test_velocity_band_edges(self, v, level):
        assert quantize(sample(velocity=v)).v_q == level

    def test_distance_edge_is_near(self):
        assert quantize(sample(distance=50.0)).d_q == 0

    @given(st.floats(0, 200), st.floats(0, 200), st.floats(0, 30), st.floats(0, 30), st.floats(0, 60), st.floats(0, 60))
    def test_monotone(self, d1, d2, v1, v2, a1, a2):
        lo = quantize(sample(min(d1, d2), min(v1, v2), (min(a1, a2), 0, 0)))
        hi = quantize(sample(max(d1, d2), max(v1, v2), (max(a1, a2), 0, 0)))
        assert lo.d_q <= hi.d_q and lo.v_q <= hi.v_q and lo.a_q <= hi.a_q


class TestDeriveThresholds:
    def test_flat_throughput(self):
        pairs = [(v, 5.0) for v in range(1, 101)]
        assert derive_thresholds(pairs, QuantizerConfig(window=10)) == []

    def test_linear_decline_matches_oracle(self):
        pairs = [(v, 10 - 0.05 * v) for v in range(1, 101)]
        got = derive_thresholds(pairs, QuantizerConfig(window=10))
        assert got == brute_force_thresholds(pairs, 10, 0.95)
        # Frozen from the oracle: one threshold per 19-sample (0.95 Mbps) drop.
        assert got == [24.5, 43.5, 62.5, 81.5]
        for g, approx in zip(got, (24, 43, 62, 81)):
            assert abs(g - approx) <= 10

    def test_order_independent(self):
        pairs = [(v, 10 - 0.05 * v) for v in range(1, 101)]
        cfg = QuantizerConfig(window=10)
        assert derive_thresholds(pairs[::-1], cfg) == derive_thresholds(pairs, cfg)

    @given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 20)), min_size=40, max_size=200), st.randoms())
    def test_permutation_and_monotonicity(self, pairs, rnd):
        cfg = QuantizerConfig(window=10)
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        a = derive_thresholds(pairs, cfg)
        assert a == derive_thresholds(shuffled, cfg)
        assert all(y > x for x, y in zip(a, a[1:]))
        assert a == brute_force_thresholds(pairs, 10, 0.95) or np.allclose(a, brute_force_thresholds(pairs, 10, 0.95))

    def test_too_few_pairs(self):
        with pytest.raises(ValueError, match="at least"):
            derive_thresholds([(1.0, 1.0)] * 19, QuantizerConfig(window=10))

    def test_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            derive_thresholds([(math.nan, 1.0)] * 40, QuantizerConfig(window=10))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            QuantizerConfig(velocity_thresholds=(12.0, 8.0))
