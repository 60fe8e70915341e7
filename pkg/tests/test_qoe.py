import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import chunk_reward
from uavabr.playback import ChunkRecord, EpisodeLog
from uavabr.qoe import QoEBreakdown, QoEConfig, summarize, cdf, cdf_csv, chunk_qoe, episode_summary, summary_csv, utility_log

LADDER = (300.0, 750.0, 1850.0, 2850.0)
rung = st.sampled_from(LADDER)


class TestUtility:
    @pytest.mark.parametrize("l, expected", [(300, 0.0), (2850, 2.2513), (1850, 1.81916)])
    def test_values(self, l, expected):
        assert utility_log(l, 300) == pytest.approx(expected, abs=1e-4)

    def test_below_floor(self):
        with pytest.raises(ValueError):
            utility_log(200, 300)

    @given(st.floats(300, 1e5), st.floats(300, 1e5))
    def test_increasing(self, a, b):
        if a < b:
            assert utility_log(a, 300) < utility_log(b, 300)


class TestChunkQoE:
    def test_steady(self):
        assert chunk_qoe(1850, 1850, 0.0, False).total == pytest.approx(1.81916, abs=1e-4)

    def test_switch_with_stall(self):
        b = chunk_qoe(750, 300, 1.5, False)
        assert b.total == pytest.approx(-3.39, abs=1e-9)
        assert b.smoothness_penalty == pytest.approx(math.log(2.5))

    def test_all_zero(self):
        assert chunk_qoe(300, 300, 0.0, False).total == 0.0

    def test_violation(self):
        assert chunk_qoe(300, 300, 0.0, True).total == -5.0

    def test_off_ladder(self):
        with pytest.raises(ValueError, match="ladder"):
            chunk_qoe(1000, 300, 0.0, False)

    def test_negative_stall(self):
        with pytest.raises(ValueError):
            chunk_qoe(300, 300, -0.5, False)

    def test_config_validation(self):
        for kw in ({"mu": 0}, {"l_min": -1}, {"violation_penalty": -0.1}):
            with pytest.raises(ValueError):
                QoEConfig(**kw)

    @given(rung, rung, st.floats(0, 30), st.booleans())
    def test_identity_and_oracle(self, a, b, T, v):
        r = chunk_qoe(a, b, T, v)
        assert r.total == r.utility - r.rebuffer_penalty - r.smoothness_penalty - r.violation
        assert r.total == pytest.approx(chunk_reward(a, b, T, v), abs=1e-12)

    @given(rung, rung, st.floats(0, 30))
    def test_swap_changes_only_utility(self, a, b, T):
        x, y = chunk_qoe(a, b, T, False), chunk_qoe(b, a, T, False)
        assert x.smoothness_penalty == y.smoothness_penalty
        assert x.total - y.total == pytest.approx(utility_log(a, 300) - utility_log(b, 300), abs=1e-12)

    @given(rung)
    def test_steady_equals_utility(self, a):
        assert chunk_qoe(a, a, 0.0, False).total == utility_log(a, 300)


def _log(levels, rebufs=None, viol=None):
    n = len(levels)
    rebufs = rebufs or [0.0] * n
    viol = viol or [False] * n
    recs, prev = [], 0
    for i, (lv, T, v) in enumerate(zip(levels, rebufs, viol)):
        recs.append(ChunkRecord(i, lv, LADDER[lv], 1.0, T, 2.0, 1.0, v, prev))
        prev = lv
    return EpisodeLog("x", 0.0, recs)


class TestEpisodeSummary:
    def test_constant(self):
        log = _log([2] * 41)
        log.records[0].prev_level = 2
        assert episode_summary(log).mean_qoe == pytest.approx(1.81916, abs=1e-4)

    def test_two_chunk_mean(self):
        totals = [QoEBreakdown(0.0, 0.0, 0.0, 0.0), QoEBreakdown(2.0, 0.0, 0.0, 0.0)]
        assert summarize(totals).mean_qoe == 1.0

    def test_empty(self):
        with pytest.raises(ValueError):
            episode_summary(EpisodeLog("e", 0.0, []))

    @given(st.lists(st.tuples(st.integers(0, 3), st.sampled_from([0.0, 0.5, 3.0]), st.booleans()), min_size=1, max_size=41))
    def test_linearity(self, rows):
        lv, T, v = map(list, zip(*rows))
        s = episode_summary(_log(lv, T, v))
        assert s.mean_qoe == pytest.approx(
            s.mean_utility - s.mean_rebuf_pen - s.mean_smooth_pen - s.mean_violation, abs=1e-12
        )

    def test_rewards_filled(self):
        log = _log([0, 3, 3])
        episode_summary(log)
        assert [r.reward for r in log] == pytest.approx(
            [0.0, utility_log(2850, 300) - utility_log(2850, 300), utility_log(2850, 300)]
        )


def test_csv_layouts():
    s = episode_summary(_log([1, 1]))
    head = summary_csv({"p": s}).splitlines()[0]
    assert head == "policy,mean_qoe,mean_utility,mean_rebuf_pen,mean_smooth_pen,mean_violation"
    lines = cdf_csv([3.0, 1.0, 2.0]).splitlines()
    assert lines[0] == "value,cum_prob" and lines[-1] == "3.0,1.0"


def test_cdf_monotone():
    x, p = cdf(np.random.default_rng(0).normal(size=50))
    assert np.all(np.diff(x) >= 0) and np.all(np.diff(p) > 0) and p[-1] == 1.0
