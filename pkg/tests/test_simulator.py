import math

import numpy as np
import pytest

from lacksim.channel import JitterBufferConfig, NetworkModel
from lacksim.duration_models import WeibullModel, exponential
from lacksim.errors import DomainError
from lacksim.scheduler import CODECS
from lacksim.simulator import (
    ChannelConfig,
    SchedulerConfig,
    call_seed,
    duration_distribution_check,
    run_batch,
    run_call,
    summarize,
)

G711 = CODECS["G.711"]


def channel(jitter=0.0, loss=0.0):
    net = NetworkModel(base_delay=0.05, jitter=jitter, random_loss=loss)
    return ChannelConfig(net, JitterBufferConfig.for_network(net))


class TestRunCall:
    def test_zero_budget_is_plain_stream(self):
        m = run_call(exponential(), G711, SchedulerConfig(covert_bits=0), channel(loss=0.05), 3,
                     forced_duration=600.0)
        assert m.covert_bits_sent == 0 and m.induced_loss == 0.0
        assert m.total_discard == m.natural_loss
        assert abs(m.natural_loss - 0.05) < 4 * math.sqrt(0.05 * 0.95 / m.n_packets)
        assert not m.completed

    def test_constant_mode_320(self):
        sched = SchedulerConfig(covert_bits=math.inf, mode="constant", embed_probability=0.005)
        m = run_call(exponential(), G711, sched, channel(), 1, forced_duration=3600.0)
        assert m.n_packets == 180_000
        assert m.throughput == pytest.approx(320.0, rel=0.05)
        assert m.total_discard == pytest.approx(0.005, abs=0.001)
        assert m.covert_bits_delivered == m.covert_bits_sent

    def test_trajectory_starts_at_mean_rate(self):
        sched = SchedulerConfig(covert_bits=1000, cf=1.0)
        m = run_call(exponential(), G711, sched, channel(), 5, forced_duration=1000.0)
        t0, ir0 = m.ir_trajectory[0]
        assert t0 == 0.0 and ir0 == pytest.approx(8.52, abs=0.01)
        assert m.completed and m.budget_exhausted_at is not None
        assert m.covert_bits_sent == 1000 == m.covert_bits_delivered

    def test_sample_every_second(self):
        m = run_call(exponential(), G711, SchedulerConfig(), channel(), 5, forced_duration=30.0)
        times = [t for t, _ in m.ir_trajectory]
        assert times == pytest.approx([float(i) for i in range(30)])

    def test_deterministic(self):
        a = run_call(WeibullModel(0.6, 77.97), G711, SchedulerConfig(), channel(0.01, 0.02), call_seed(9, 4))
        b = run_call(WeibullModel(0.6, 77.97), G711, SchedulerConfig(), channel(0.01, 0.02), call_seed(9, 4))
        assert a == b

    def test_duration_independent_of_scheduler(self):
        seed = call_seed(11, 0)
        a = run_call(exponential(), G711, SchedulerConfig(covert_bits=0), channel(), seed)
        b = run_call(exponential(), G711, SchedulerConfig(covert_bits=10**6, cf=1.0), channel(0.02, 0.1), seed)
        assert a.duration == b.duration

    def test_loss_composition_zero_jitter(self):
        sched = SchedulerConfig(covert_bits=10**6, cf=1.0)
        m = run_call(exponential(), G711, sched, channel(loss=0.01), 2, forced_duration=1200.0)
        assert m.total_discard == pytest.approx(m.induced_loss + m.natural_loss, abs=1e-12)
        assert m.covert_bits_delivered <= m.covert_bits_sent <= 10**6
        assert m.false_covert_reads == 0

    def test_explicit_covert_data_roundtrip(self):
        data = np.random.default_rng(0).integers(0, 2, 5000, dtype=np.uint8)
        sched = SchedulerConfig(cf=1.0)
        m, sent, aware, _ = run_call(exponential(), G711, sched, channel(), 1, forced_duration=2000.0,
                                     covert_data=data, return_streams=True)
        assert m.completed
        np.testing.assert_array_equal(sent, data)
        np.testing.assert_array_equal(aware.bitstream[:5000], data)

    def test_inconsistent_channel_rejected(self):
        with pytest.raises(DomainError):
            ChannelConfig(NetworkModel(), JitterBufferConfig(0.15, 0.08))


class TestBatch:
    def test_single_call_summary(self):
        batch = run_batch(exponential(), G711, SchedulerConfig(), channel(), 1, seed=4)
        (call,) = batch.calls
        s = batch.summary
        assert s.calls == 1 and s.duration_mean == call.duration and s.duration_std == 0.0
        assert s.covert_bits_sent == call.covert_bits_sent
        assert s.completion_fraction == float(call.completed)
        assert s.throughput == pytest.approx(call.throughput)
        assert s.mean_total_discard == call.total_discard

    def test_call_order_matches_seeds(self):
        batch = run_batch(exponential(), G711, SchedulerConfig(), channel(), 5, seed=8)
        for i, c in enumerate(batch.calls):
            assert c == run_call(exponential(), G711, SchedulerConfig(), channel(), call_seed(8, i))

    @pytest.mark.slow
    def test_parallel_equals_serial(self):
        args = (WeibullModel(0.4, 35.3), G711, SchedulerConfig(), channel(0.005))
        serial = run_batch(*args, 40, seed=3)
        parallel = run_batch(*args, 40, seed=3, workers=2)
        assert serial.calls == parallel.calls
        assert serial.summary == parallel.summary

    def test_violation_count(self):
        batch = run_batch(exponential(), G711, SchedulerConfig(covert_bits=0), channel(loss=0.2), 20,
                          seed=1, forced_duration=10.0)
        assert batch.summary.violations == sum(c.total_discard > 0.03 for c in batch.calls) == 20

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            run_batch(exponential(), G711, SchedulerConfig(), channel(), 0, seed=1)
        with pytest.raises(DomainError):
            summarize([], exponential(), G711, False)


def test_exponential_duration_mean():
    # durations come from their own stream, so a zero budget changes nothing
    batch = run_batch(exponential(), G711, SchedulerConfig(covert_bits=0), channel(), 10_000, seed=2)
    assert abs(batch.summary.duration_mean - 117.31) <= 3 * 117.31 / 100


class TestDurationCheck:
    def test_model_samples_pass(self):
        for m in (exponential(), WeibullModel(0.4, 35.3)):
            assert duration_distribution_check(m.sample(5, 2000), m).passed

    def test_degenerate_fails(self):
        res = duration_distribution_check(np.full(500, 117.31), exponential())
        assert not res.passed and res.pvalue < 0.01

    def test_wrong_model_fails(self):
        res = duration_distribution_check(exponential().sample(6, 1000), WeibullModel(0.4, 35.3))
        assert not res.passed

    def test_needs_100(self):
        with pytest.raises(DomainError):
            duration_distribution_check(np.ones(99), exponential())

    def test_batch_durations_pass(self):
        model = WeibullModel(0.6, 77.97)
        batch = run_batch(model, G711, SchedulerConfig(covert_bits=10**5), channel(), 500, seed=12)
        assert duration_distribution_check([c.duration for c in batch.calls], model).passed
