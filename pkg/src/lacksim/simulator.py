"""Monte Carlo batches of LACK calls.

One call: draw a duration from the model, pace covert data with the
scheduler, embed into the voice stream, send it through the network and
hand the result to both an unaware and an aware receiver.

Every call owns three independent random streams (duration, covert payload,
network) spawned from ``SeedSequence([master_seed, call_index])``. The
duration is drawn first and from its own stream, so nothing LACK does can
change call durations.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .channel import (
    JitterBufferConfig,
    NetworkModel,
    generate_stream,
    receive_aware,
    receive_unaware,
    transmit,
)
from .duration_models import DurationModel
from .errors import DomainError
from .residual import AS_PRINTED, ApproxCoefficients, refit_approximation
from .scheduler import CodecProfile, SchedulerState, loss_budget_cap, schedule_call

KS_ALPHA = 0.01


@dataclass(frozen=True)
class SchedulerConfig:
    covert_bits: float = 1000
    cf: float = 0.8
    plc: bool = False
    estimator: str = "exact"
    coeffs: ApproxCoefficients | None = None
    mode: str = "rate"
    embed_probability: float | None = None
    sample_every: float = 1.0


@dataclass(frozen=True)
class ChannelConfig:
    network: NetworkModel = field(default_factory=NetworkModel)
    buffer: JitterBufferConfig = field(default_factory=JitterBufferConfig)

    def __post_init__(self):
        problems = self.buffer.violations(self.network)
        if problems:
            raise DomainError("; ".join(problems))


@dataclass
class CallMetrics:
    duration: float
    n_packets: int
    covert_bits_sent: int
    covert_bits_delivered: int
    budget_exhausted_at: float | None
    induced_loss: float
    natural_loss: float
    total_discard: float
    false_covert_reads: int
    completed: bool
    ir_trajectory: list = field(default_factory=list, repr=False)

    @property
    def throughput(self) -> float:
        return self.covert_bits_delivered / self.duration


def call_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(index)])


def _children(ss: np.random.SeedSequence):
    # like ss.spawn(3) but without advancing ss, so a seed object can be reused
    return [np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,), pool_size=ss.pool_size)
            for i in range(3)]


def run_call(model: DurationModel, codec: CodecProfile, sched: SchedulerConfig,
             channel: ChannelConfig, seed, forced_duration: float | None = None,
             covert_data=None, return_streams: bool = False):
    """Simulate one call and return its :class:`CallMetrics`.

    ``seed`` is an int or a SeedSequence. ``covert_data`` (a 0/1 array)
    overrides ``sched.covert_bits``; otherwise random bits are drawn. With
    ``return_streams`` the tuple ``(metrics, sent_bits, aware_result,
    received_stream)`` is returned instead.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    dur_ss, data_ss, net_ss = _children(ss)
    duration = float(model.sample(np.random.default_rng(dur_ss)))
    if forced_duration is not None:
        duration = float(forced_duration)
    if duration <= 0:
        # a zero draw still lasts one frame
        duration = codec.frame_interval

    data_rng = np.random.default_rng(data_ss)
    if covert_data is not None:
        covert_data = np.asarray(covert_data, dtype=np.uint8)
        budget = float(covert_data.size)
    else:
        budget = float(sched.covert_bits)

    stream = generate_stream(codec, duration)
    n = len(stream)
    natural = channel.network.random_loss
    state = SchedulerState(
        s_remaining=budget,
        cf=sched.cf,
        p_cap=loss_budget_cap(codec, min(natural, 1 - 1e-12), sched.plc),
        estimator=sched.estimator,
        coeffs=sched.coeffs,
        constant_p=sched.embed_probability if sched.mode == "constant" else None,
    )
    plan = schedule_call(state, model, codec, n, sched.sample_every)

    sent = int(sum(plan.embed_bits))
    if covert_data is None:
        # only the bits that actually leave are drawn
        covert_data = data_rng.integers(0, 2, sent, dtype=np.uint8)
    sent_bits = covert_data[:sent]
    offset = 0
    for idx, bits in zip(plan.embed_index, plan.embed_bits):
        stream.embed(idx, sent_bits[offset: offset + bits], channel.buffer.lack_delay)
        offset += bits

    wire = transmit(stream, channel.network, np.random.default_rng(net_ss))
    unaware = receive_unaware(wire, channel.buffer)
    aware = receive_aware(wire, channel.buffer)

    covert_mask = wire.covert
    n_covert = int(covert_mask.sum())
    voice_discarded = n - n_covert - int(np.count_nonzero(~covert_mask[unaware.played]))
    bits_per_packet = np.zeros(n, dtype=np.int64)
    bits_per_packet[plan.embed_index] = plan.embed_bits
    delivered = int(bits_per_packet[aware.carriers].sum())
    false_reads = int(np.count_nonzero(~covert_mask[aware.carriers]))

    metrics = CallMetrics(
        duration=duration,
        n_packets=n,
        covert_bits_sent=sent,
        covert_bits_delivered=delivered,
        budget_exhausted_at=plan.exhausted_at,
        induced_loss=n_covert / n,
        natural_loss=voice_discarded / n,
        total_discard=unaware.discarded / n,
        false_covert_reads=false_reads,
        completed=math.isfinite(budget) and budget > 0 and state.s_remaining <= 0,
        ir_trajectory=plan.trajectory,
    )
    if return_streams:
        return metrics, sent_bits, aware, wire
    return metrics


@dataclass
class BatchSummary:
    calls: int
    duration_mean: float
    duration_std: float
    model_mean: float
    model_std: float
    completion_fraction: float
    completed_calls: int
    violations: int
    loss_tolerance: float
    throughput: float
    covert_bits_sent: int
    covert_bits_delivered: int
    mean_induced_loss: float
    mean_total_discard: float
    false_covert_reads: int


@dataclass
class BatchResult:
    summary: BatchSummary
    calls: list


def resolve_coefficients(model: DurationModel, estimator: str, approx_source: str | None):
    if estimator != "approx":
        return None
    if approx_source == "as-printed":
        return AS_PRINTED
    if approx_source == "refit":
        return refit_approximation(model)
    raise DomainError("approx estimator needs approx_coefficients = 'refit' or 'as-printed'")


def summarize(calls: list, model: DurationModel, codec: CodecProfile, plc: bool) -> BatchSummary:
    if not calls:
        raise DomainError("empty batch")
    durations = np.array([c.duration for c in calls])
    tol = codec.tolerance(plc)
    mom = model.moments()
    total_duration = float(durations.sum())
    completed = sum(c.completed for c in calls)
    return BatchSummary(
        calls=len(calls),
        duration_mean=float(durations.mean()),
        duration_std=float(durations.std(ddof=1)) if len(calls) > 1 else 0.0,
        model_mean=mom.mean,
        model_std=mom.std_dev,
        completion_fraction=completed / len(calls),
        completed_calls=completed,
        violations=sum(c.total_discard > tol for c in calls),
        loss_tolerance=tol,
        throughput=sum(c.covert_bits_delivered for c in calls) / total_duration,
        covert_bits_sent=sum(c.covert_bits_sent for c in calls),
        covert_bits_delivered=sum(c.covert_bits_delivered for c in calls),
        mean_induced_loss=float(np.mean([c.induced_loss for c in calls])),
        mean_total_discard=float(np.mean([c.total_discard for c in calls])),
        false_covert_reads=sum(c.false_covert_reads for c in calls),
    )


def _run_indexed(args):
    model, codec, sched, channel, master, index, forced, covert = args
    return run_call(model, codec, sched, channel, call_seed(master, index), forced, covert)


def run_batch(model: DurationModel, codec: CodecProfile, sched: SchedulerConfig,
              channel: ChannelConfig, n_calls: int, seed: int,
              forced_duration: float | None = None, workers: int = 1,
              covert_data=None) -> BatchResult:
    """Run ``n_calls`` independent calls; results come back in call order.

    With ``covert_data`` every call tries to send that same bit array.
    """
    if n_calls < 1:
        raise DomainError("n_calls must be >= 1")
    jobs = [(model, codec, sched, channel, seed, i, forced_duration, covert_data) for i in range(n_calls)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            calls = list(pool.map(_run_indexed, jobs, chunksize=max(1, n_calls // (4 * workers))))
    else:
        calls = [_run_indexed(job) for job in jobs]
    return BatchResult(summarize(calls, model, codec, sched.plc), calls)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    passed: bool


def duration_distribution_check(durations, model: DurationModel, alpha: float = KS_ALPHA) -> KSResult:
    """Two-sided KS test of observed call durations against the model CDF."""
    durations = np.asarray(durations, dtype=float)
    if durations.size < 100:
        raise DomainError("duration check needs at least 100 calls")
    res = stats.kstest(durations, lambda x: np.asarray(model.cdf(np.maximum(x, 0.0))))
    return KSResult(float(res.statistic), float(res.pvalue), bool(res.pvalue >= alpha))
