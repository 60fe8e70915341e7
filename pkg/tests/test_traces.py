import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavabr import traces
from uavabr.traces import SynthParams, Trace, TraceCorpus, TraceError, throughput_at


def two_sample_trace():
    return Trace("t", [0.0, 1.0], [4.0, 2.0], duration=2.0)


class TestThroughputAt:
    def test_hold_semantics(self):
        assert throughput_at(two_sample_trace(), 0.5) == 4.0

    def test_boundary_belongs_to_new_sample(self):
        assert throughput_at(two_sample_trace(), 1.0) == 2.0

    def test_wraps_past_duration(self):
        assert throughput_at(two_sample_trace(), 2.5) == 4.0

    @given(st.lists(st.floats(0, 20, allow_nan=False), min_size=1, max_size=20))
    def test_reproduces_samples_at_timestamps(self, values):
        tr = Trace("h", np.arange(len(values)) * 0.7, values)
        for t, v in zip(tr.t, values):
            assert throughput_at(tr, t) == v


class TestValidation:
    def test_empty(self):
        with pytest.raises(TraceError, match="empty"):
            Trace("x", [], [])

    def test_negative_throughput(self):
        with pytest.raises(TraceError, match="negative throughput"):
            Trace("x", [0, 1], [1, -1])

    def test_duration_before_last_sample(self):
        with pytest.raises(TraceError):
            Trace("x", [0, 1, 2], [1, 1, 1], duration=1.5)

    def test_non_monotonic_row_number(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text(",".join(traces.CSV_HEADER) + "\n0,1,0,0,0,0,0\n1,1,0,0,0,0,0\n1,1,0,0,0,0,0\n")
        with pytest.raises(TraceError, match="row 3"):
            traces.read_trace(p)

    def test_negative_throughput_row(self, tmp_path):
        p = tmp_path / "neg.csv"
        p.write_text(",".join(traces.CSV_HEADER) + "\n0,1,0,0,0,0,0\n1,-2,0,0,0,0,0\n")
        with pytest.raises(TraceError, match="row 2: negative throughput"):
            traces.read_trace(p)


class TestCorpusIO:
    def test_round_trip(self, tmp_path):
        tr = traces.synthesize(SynthParams(), seed=3, id="a")
        traces.write_trace(tr, tmp_path / "a.csv")
        back = traces.read_trace(tmp_path / "a.csv")
        assert back == tr

    def test_empty_directory(self, tmp_path):
        with pytest.raises(TraceError, match="no traces found"):
            traces.load_corpus(tmp_path)

    def test_missing_path(self, tmp_path):
        with pytest.raises(TraceError):
            traces.load_corpus(tmp_path / "nope")

    def test_thousand_hundred_second_traces(self, tmp_path):
        p = SynthParams(path="orbit", orbit_speed=5.0, noise_sigma=0.1)
        tr = traces.synthesize(p, seed=0)
        text = traces.format_trace(tr)
        for i in range(1000):
            (tmp_path / f"tr_{i:04d}.csv").write_text(text)
        corpus = traces.load_corpus(tmp_path)
        assert len(corpus) == 1000
        assert all(t.t[-1] <= 100.0 and t.duration == 100.0 for t in corpus.traces)

    def test_range_warning(self, tmp_path):
        traces.write_trace(Trace("hot", [0, 1], [25.0, 1.0]), tmp_path / "hot.csv")
        with pytest.warns(UserWarning, match="exceeds"):
            traces.load_corpus(tmp_path)


def _corpus(n, seed=0, fraction=0.8):
    return TraceCorpus(tuple(Trace(f"t{i}", [0.0], [1.0]) for i in range(n)), split_seed=seed, train_fraction=fraction)


class TestSplit:
    def test_eighty_twenty(self):
        train, test = traces.split(_corpus(1000))
        assert (len(train), len(test)) == (800, 200)

    def test_deterministic(self):
        a = traces.split(_corpus(10, seed=5))
        b = traces.split(_corpus(10, seed=5))
        assert [t.id for t in a[0]] == [t.id for t in b[0]]

    def test_degenerate_fraction(self):
        with pytest.raises(TraceError, match="empty test set"):
            traces.split(_corpus(10, fraction=1.0))

    def test_single_trace(self):
        with pytest.raises(TraceError):
            traces.split(_corpus(1))

    @settings(max_examples=30)
    @given(st.integers(10, 60), st.integers(0, 2**31), st.floats(0.2, 0.8))
    def test_partition(self, n, seed, frac):
        train, test = traces.split(_corpus(n, seed, frac))
        ids = [t.id for t in train] + [t.id for t in test]
        assert sorted(ids) == sorted(f"t{i}" for i in range(n))
        assert not {t.id for t in train} & {t.id for t in test}


class TestSynthesize:
    def test_constant_when_degenerate(self):
        p = SynthParams(path="orbit", orbit_speed=6.0, noise_sigma=0.0, vibration_sigma=0.0)
        tr = traces.synthesize(p, seed=1)
        assert np.ptp(tr.throughput) < 1e-12
        assert np.ptp(tr.distance) < 1e-9 and np.ptp(tr.velocity) < 1e-9

    def test_deterministic(self):
        assert traces.synthesize(SynthParams(), 11) == traces.synthesize(SynthParams(), 11)

    def test_velocity_halving(self):
        # g_v halves the rate above 12 m/s; the noise draws coincide for equal seeds.
        prof = ((0.0, 1.0), (12.0, 1.0), (12.001, 0.5))
        slow = traces.synthesize(SynthParams(path="orbit", orbit_speed=2.0, velocity_profile=prof), 4)
        fast = traces.synthesize(SynthParams(path="orbit", orbit_speed=16.0, velocity_profile=prof), 4)
        assert slow.throughput.mean() / fast.throughput.mean() == pytest.approx(2.0, rel=0.05)

    def test_velocity_halving_independent_noise(self):
        prof = ((0.0, 1.0), (12.0, 1.0), (12.001, 0.5))
        ratios = []
        for seed in range(20):
            slow = traces.synthesize(SynthParams(path="orbit", orbit_speed=2.0, velocity_profile=prof), seed)
            fast = traces.synthesize(SynthParams(path="orbit", orbit_speed=16.0, velocity_profile=prof), seed + 1000)
            ratios.append(slow.throughput.mean() / fast.throughput.mean())
        assert np.mean(ratios) == pytest.approx(2.0, rel=0.05)

    def test_velocity_anticorrelated_without_noise(self):
        p = SynthParams(noise_sigma=0.0, distance_profile=((0.0, 1.0),))
        for seed in range(5):
            tr = traces.synthesize(p, seed)
            if np.ptp(tr.velocity) > 0 and np.ptp(tr.throughput) > 0:
                assert np.corrcoef(tr.velocity, tr.throughput)[0, 1] <= 0

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            SynthParams(duration=-1)
        with pytest.raises(ValueError):
            SynthParams(velocity_profile=((0.0, 0.5), (10.0, 1.0)))
