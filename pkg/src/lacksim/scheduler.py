"""Covert-budget pacing: insertion rate and per-packet embed decisions.

The insertion rate at elapsed time ``t`` is ``S_R(t) / E(D | D > t)``,
scaled by a correction factor ``cf`` and capped so that the induced packet
loss never exceeds the codec's loss budget. Rates become packet decisions
through a deterministic fractional accumulator: every packet adds
``rate * frame_interval / payload_bits``, and each whole unit collected
sends one covert packet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .duration_models import DurationModel
from .errors import DomainError, SequencingError
from .residual import ApproxCoefficients, approx_conditional_mean, conditional_mean

#: Slack for the accumulator threshold; absorbs float drift in repeated sums
#: such as 200 * 0.005.
ACCUMULATOR_EPS = 1e-9

DEFAULT_CF = 0.8


@dataclass(frozen=True)
class CodecProfile:
    name: str
    bit_rate: float
    frame_interval: float
    loss_tolerance: float
    loss_tolerance_plc: float

    def __post_init__(self):
        bits = self.bit_rate * self.frame_interval
        if abs(bits - round(bits)) > 1e-6 or round(bits) <= 0:
            raise DomainError(f"{self.name}: bit_rate * frame_interval must be a whole number of bits")
        if not 0 < self.loss_tolerance <= self.loss_tolerance_plc < 1:
            raise DomainError(f"{self.name}: need 0 < loss_tolerance <= loss_tolerance_plc < 1")

    @property
    def payload_bits(self) -> int:
        return int(round(self.bit_rate * self.frame_interval))

    @property
    def max_rate(self) -> float:
        """Covert bit rate if every packet carried covert data."""
        return self.payload_bits / self.frame_interval

    def tolerance(self, plc: bool) -> float:
        return self.loss_tolerance_plc if plc else self.loss_tolerance


# Only G.711 gains tolerance from PLC; the others keep their plain one.
CODECS = {
    "G.711": CodecProfile("G.711", 64000, 0.020, 0.03, 0.05),
    "G.729A": CodecProfile("G.729A", 8000, 0.020, 0.02, 0.02),
    "G.723.1": CodecProfile("G.723.1", 6300, 0.030, 0.01, 0.01),
}


def get_codec(name: str) -> CodecProfile:
    def norm(s):
        return s.upper().replace(".", "").replace(" ", "")

    for codec_name, profile in CODECS.items():
        if norm(codec_name) == norm(name):
            return profile
    raise DomainError(f"unknown codec {name!r}; known: {', '.join(CODECS)}")


def loss_budget_cap(codec: CodecProfile, natural_loss: float, plc_enabled: bool = False) -> float:
    """Largest LACK-induced loss probability that keeps total loss within tolerance."""
    if not 0 <= natural_loss < 1:
        raise DomainError(f"natural loss must lie in [0, 1), got {natural_loss!r}")
    return max(0.0, codec.tolerance(plc_enabled) - natural_loss)


@dataclass
class SchedulerState:
    """Mutable per-call pacing state.

    ``s_remaining`` may be ``math.inf`` for an unbounded covert source.
    ``constant_p`` switches from the duration-aware rate to a fixed
    per-packet embed probability.
    """

    s_remaining: float
    cf: float = DEFAULT_CF
    p_cap: float = 1.0
    estimator: str = "exact"
    coeffs: ApproxCoefficients | None = None
    constant_p: float | None = None
    elapsed: float = 0.0
    accumulator: float = 0.0
    cv: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 < self.cf <= 1:
            raise DomainError(f"cf must lie in (0, 1], got {self.cf!r}")
        if not 0 <= self.p_cap <= 1:
            raise DomainError(f"p_cap must lie in [0, 1], got {self.p_cap!r}")
        if self.s_remaining < 0:
            raise DomainError("covert budget must be >= 0")
        if self.estimator not in ("exact", "approx"):
            raise DomainError(f"estimator must be 'exact' or 'approx', got {self.estimator!r}")
        if self.estimator == "approx" and self.coeffs is None:
            raise DomainError("approx estimator needs coefficients")
        if self.constant_p is not None and not 0 <= self.constant_p <= 1:
            raise DomainError("constant embed probability must lie in [0, 1]")


class PacketDecision(NamedTuple):
    embed: bool
    bits: int


def expected_duration(state: SchedulerState, model: DurationModel, t):
    """E(D|D>t) via the state's estimator."""
    if state.estimator == "exact":
        return conditional_mean(model, t)
    cv = state.cv if state.cv is not None else model.moments().cv
    return approx_conditional_mean(state.coeffs, cv, t)


def insertion_rate(state: SchedulerState, model: DurationModel, t: float,
                   codec: CodecProfile | None = None, expected: float | None = None) -> float:
    """Capped, corrected insertion rate in bits/s.

    Without ``codec`` no loss-budget cap is applied (and constant mode is
    unavailable). ``expected`` short-circuits the E(D|D>t) evaluation.
    """
    if state.s_remaining <= 0:
        return 0.0
    if state.constant_p is not None:
        if codec is None:
            raise DomainError("constant-rate mode needs a codec")
        rate = state.constant_p * codec.max_rate
    else:
        if expected is None:
            expected = expected_duration(state, model, t)
        rate = state.cf * state.s_remaining / expected
    if codec is not None:
        rate = min(rate, state.p_cap * codec.max_rate)
    return rate


def _step(state, rate, payload_bits, frame_interval):
    state.accumulator += rate * (frame_interval / payload_bits)
    if state.accumulator >= 1.0 - ACCUMULATOR_EPS and state.s_remaining > 0:
        state.accumulator -= 1.0
        bits = int(min(payload_bits, state.s_remaining))
        state.s_remaining = max(0.0, state.s_remaining - bits)
        return PacketDecision(True, bits)
    return PacketDecision(False, 0)


def decide_packet(state: SchedulerState, model: DurationModel, codec: CodecProfile,
                  t: float | None = None, expected: float | None = None) -> PacketDecision:
    """Advance the state by one voice packet generated at ``t`` and decide whether it carries covert data.

    Mutates ``state``. ``t`` defaults to the state's elapsed time.
    """
    if t is None:
        t = state.elapsed
    if t < state.elapsed - 1e-12:
        raise SequencingError(f"packet at t={t} arrived after t={state.elapsed}")
    state.elapsed = t
    rate = insertion_rate(state, model, t, codec, expected)
    return _step(state, rate, codec.payload_bits, codec.frame_interval)


@dataclass
class Schedule:
    embed_index: list
    embed_bits: list
    trajectory: list
    exhausted_at: float | None


def schedule_call(state: SchedulerState, model: DurationModel, codec: CodecProfile,
                  n_packets: int, sample_every: float = 1.0) -> Schedule:
    """Run :func:`decide_packet` over a whole call of ``n_packets`` packets.

    E(D|D>t) is evaluated once for the whole packet grid, then the same
    accumulator step runs packet by packet. The returned trajectory holds
    ``(t, rate)`` for the first packet at or after each multiple of
    ``sample_every``.
    """
    dt = codec.frame_interval
    times = np.arange(n_packets) * dt
    if n_packets and times[0] < state.elapsed - 1e-12:
        raise SequencingError(f"call restarts at t=0 after t={state.elapsed}")
    if state.constant_p is None and n_packets and state.s_remaining > 0:
        expected = np.asarray(expected_duration(state, model, times), dtype=float).tolist()
    else:
        expected = [None] * n_packets
    payload = codec.payload_bits
    cap = state.p_cap * codec.max_rate
    gain = dt / payload
    constant = None if state.constant_p is None else state.constant_p * codec.max_rate
    cf = state.cf
    s_rem = state.s_remaining
    acc = state.accumulator
    threshold = 1.0 - ACCUMULATOR_EPS
    embed_index, embed_bits, trajectory = [], [], []
    exhausted_at = None
    next_sample = 0.0
    # inlined insertion_rate + _step; kept equivalent to decide_packet
    for i, t in enumerate(times.tolist()):
        if s_rem <= 0:
            rate = 0.0
        else:
            rate = constant if constant is not None else cf * s_rem / expected[i]
            if rate > cap:
                rate = cap
        if t >= next_sample - 1e-9:
            trajectory.append((t, rate))
            next_sample = math.floor(t / sample_every + 1e-9) * sample_every + sample_every
        acc += rate * gain
        if acc >= threshold and s_rem > 0:
            acc -= 1.0
            bits = int(min(payload, s_rem))
            s_rem = max(0.0, s_rem - bits)
            embed_index.append(i)
            embed_bits.append(bits)
            if s_rem <= 0 and exhausted_at is None:
                exhausted_at = t
    if n_packets:
        state.elapsed = float(times[-1])
    state.s_remaining = s_rem
    state.accumulator = acc
    return Schedule(embed_index, embed_bits, trajectory, exhausted_at)
