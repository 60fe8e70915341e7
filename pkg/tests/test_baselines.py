import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_mpc1
from uavabr.baselines import (
    BaselineConfig,
    buffer_based,
    fixed_policy,
    harmonic_mean,
    make_baseline,
    mpc,
    rate_based,
)
from uavabr.playback import PlaybackState, VideoSpec, run_episode
from uavabr.traces import Trace

SPEC = VideoSpec()
LADDER = SPEC.ladder
CFG = BaselineConfig()


class TestFixed:
    @pytest.mark.parametrize("level", [0, 3])
    def test_constant(self, level):
        tr = Trace("c", np.arange(10.0), np.full(10, 5.0))
        log = run_episode(tr, SPEC, fixed_policy(level))
        assert {r.bitrate_kbps for r in log} == {LADDER[level]}

    def test_off_ladder(self):
        with pytest.raises(ValueError):
            fixed_policy(4)


class TestBufferBased:
    @pytest.mark.parametrize("buf, kbps", [(3, 300), (16, 2850), (10, 750)])
    def test_table(self, buf, kbps):
        assert LADDER[buffer_based(buf, CFG, LADDER)] == kbps

    @given(st.floats(0, 20), st.floats(0, 20))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert buffer_based(lo, CFG, LADDER) <= buffer_based(hi, CFG, LADDER)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            BaselineConfig(reservoir=15, cushion_top=5)


class TestRateBased:
    def test_harmonic_mean(self):
        assert harmonic_mean([4, 4, 4, 2, 1]) == pytest.approx(2.2222, abs=1e-4)
        assert harmonic_mean([3] * 5) == pytest.approx(3.0)
        assert harmonic_mean([2, 2]) == pytest.approx(2.0)

    def test_zero_floor(self):
        assert harmonic_mean([0.0]) == pytest.approx(0.01)

    def test_empty(self):
        with pytest.raises(ValueError):
            harmonic_mean([])

    @pytest.mark.parametrize("hist, kbps", [([4, 4, 4, 2, 1], 1850), ([0.2], 300), ([100.0], 2850)])
    def test_table(self, hist, kbps):
        assert LADDER[rate_based(hist, LADDER)] == kbps

    @given(st.lists(st.floats(0, 30), min_size=1, max_size=5), st.integers(0, 4), st.floats(0, 10))
    def test_monotone(self, hist, i, bump):
        i = i % len(hist)
        up = list(hist)
        up[i] += bump
        assert rate_based(hist, LADDER) <= rate_based(up, LADDER)


class TestMPC:
    def test_ample_rate_stays_top(self):
        assert mpc(PlaybackState(20.0, 3, 5), [20.0] * 5, SPEC, CFG) == 3

    def test_starved_rate_lowest(self):
        assert mpc(PlaybackState(0.0, 0, 5), [0.2] * 5, SPEC, CFG) == 0

    def test_horizon_one_matches_brute_force(self):
        rng = np.random.default_rng(0)
        cfg = BaselineConfig(mpc_horizon=1)
        for _ in range(1000):
            buf, last = float(rng.uniform(0, 20)), int(rng.integers(0, 4))
            hist = rng.uniform(0.05, 8.0, int(rng.integers(1, 6)))
            got = mpc(PlaybackState(buf, last, int(rng.integers(0, 41))), hist, SPEC, cfg)
            assert got == brute_force_mpc1(buf, last, harmonic_mean(hist), LADDER)

    def test_horizon_shrinks_at_end(self):
        # One chunk left: the lookahead is a single step regardless of the configured horizon.
        st_ = PlaybackState(4.0, 1, 40)
        assert mpc(st_, [3.0], SPEC, CFG) == mpc(st_, [3.0], SPEC, BaselineConfig(mpc_horizon=1))

    def test_pure(self):
        s = PlaybackState(7.3, 2, 10)
        assert len({mpc(s, [1.1, 2.5, 3.0], SPEC, CFG) for _ in range(5)}) == 1


def test_make_baseline_names():
    for name in ("fixed0", "fixed3", "buffer_based", "rate_based", "mpc"):
        assert callable(make_baseline(name))
    with pytest.raises(ValueError, match="unknown policy"):
        make_baseline("bola")


def test_decision_logs_stable():
    rng = np.random.default_rng(3)
    tr = Trace("r", np.arange(60.0), rng.uniform(0.3, 6.0, 60))
    for name in ("buffer_based", "rate_based", "mpc"):
        a = run_episode(tr, SPEC, make_baseline(name), t0=4.0).to_jsonl()
        b = run_episode(tr, SPEC, make_baseline(name), t0=4.0).to_jsonl()
        assert a == b
