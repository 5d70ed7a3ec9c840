import statistics

import pytest

from corescope.errors import UsageError, WatchdogError
from corescope.primitives import (
    CondMode,
    CreateMode,
    IntervalSample,
    SampleSet,
    bench_condvar,
    bench_mutex_handoff,
    bench_mutex_uncontended,
    bench_thread_create,
    summarize,
)


class TestSampleTypes:
    def test_negative_interval_rejected(self):
        with pytest.raises(UsageError):
            IntervalSample(a_ns=-1, b_ns=0)

    def test_effect_may_precede_call_return(self):
        s = IntervalSample(a_ns=1000, b_ns=400)
        assert s.b_ns < s.a_ns

    def test_empty_set_rejected_unless_truncated(self):
        with pytest.raises(UsageError):
            SampleSet(benchmark="x", mode="", samples=[])
        SampleSet(benchmark="x", mode="", samples=[], truncated=True, error="spawn")

    def test_fraction_b_lt_a(self):
        ss = SampleSet(benchmark="x", mode="", samples=[
            IntervalSample(10, 5), IntervalSample(10, 20)])
        assert ss.fraction_b_lt_a() == 0.5


class TestThreadCreate:
    def test_single_sample_has_positive_intervals(self):
        ss = bench_thread_create(CreateMode.JOINABLE, samples=1)
        assert len(ss.samples) == 1
        assert ss.samples[0].a_ns > 0
        assert ss.samples[0].b_ns > 0

    @pytest.mark.parametrize("mode", [CreateMode.JOINABLE, CreateMode.DETACHED])
    def test_all_samples_collected_without_overlap(self, mode):
        ss = bench_thread_create(mode, samples=100)
        assert len(ss.samples) == 100
        assert not ss.truncated
        assert all(s.a_ns >= 0 and s.b_ns >= 0 for s in ss.samples)
        assert 0.0 <= ss.fraction_b_lt_a() <= 1.0

    def test_zero_samples_rejected(self):
        with pytest.raises(UsageError):
            bench_thread_create(CreateMode.JOINABLE, samples=0)

    def test_histogram_percentages_partition(self):
        ss = bench_thread_create(CreateMode.JOINABLE, samples=200)
        summary = summarize(ss, clock_ghz=2.0)
        for axis in ("a", "b"):
            total = sum(p["percent"] for p in summary["percent_in_ranges"][axis])
            assert total == pytest.approx(100.0)
        assert summary["count"] == 200


class TestMutexUncontended:
    def test_positive_average(self):
        assert bench_mutex_uncontended(pairs=1000, clock_ghz=2.0) > 0

    def test_doubling_pairs_keeps_steady_state_average(self):
        med = {n: statistics.median(
            bench_mutex_uncontended(pairs=n, clock_ghz=1.0) for _ in range(7))
            for n in (1000, 2000)}
        assert med[2000] == pytest.approx(med[1000], rel=0.25)

    def test_bad_pairs_rejected(self):
        with pytest.raises(UsageError):
            bench_mutex_uncontended(pairs=0)


class TestMutexHandoff:
    def test_smoke_one_thousand_samples(self):
        ss = bench_mutex_handoff(samples=1000)
        assert len(ss.samples) == 1000
        assert all(s.a_ns >= 0 and s.b_ns >= 0 for s in ss.samples)
        assert ss.protocol_errors == 0

    def test_alternation_under_repeated_runs(self):
        # The turn counter inside the protocol catches any handoff that
        # reached the waiter out of order.
        for _ in range(3):
            ss = bench_mutex_handoff(samples=400)
            assert ss.protocol_errors == 0

    def test_watchdog_fires_with_zero_budget(self):
        with pytest.raises(WatchdogError):
            bench_mutex_handoff(samples=10_000, watchdog_s=0.0)


class TestCondvar:
    @pytest.mark.parametrize("mode", [CondMode.SIGNAL, CondMode.BROADCAST])
    def test_no_lost_wakeups_across_samples(self, mode):
        ss = bench_condvar(mode, samples=1000)
        assert len(ss.samples) == 1000   # completion is the check
        assert all(s.a_ns >= 0 and s.b_ns >= 0 for s in ss.samples)

    def test_broadcast_with_single_waiter_matches_signal_shape(self):
        sig = bench_condvar(CondMode.SIGNAL, samples=300)
        bc = bench_condvar(CondMode.BROADCAST, samples=300)
        assert len(sig.samples) == len(bc.samples)
        assert sig.benchmark == "cond-signal"
        assert bc.benchmark == "cond-broadcast"
        for ss in (sig, bc):
            assert summarize(ss, clock_ghz=1.0)["count"] == 300

    def test_watchdog_fires_with_zero_budget(self):
        with pytest.raises(WatchdogError):
            bench_condvar(CondMode.SIGNAL, samples=10_000, watchdog_s=0.0)


class TestSummarize:
    def test_fraction_matches_manual_count(self):
        ss = SampleSet(benchmark="x", mode="", samples=[
            IntervalSample(1000, 500),
            IntervalSample(1000, 2000),
            IntervalSample(3000, 100),
        ])
        summary = summarize(ss, clock_ghz=1.0)
        assert summary["fraction_b_lt_a"] == pytest.approx(2 / 3)
        assert summary["intensity"]["total"] == 3
