"""Voice packet stream, LACK embedding, lossy network and receivers.

A LACK sender replaces the payload of a chosen voice packet with covert bits
and holds the packet back by ``lack_delay`` before sending it. An ordinary
receiver's jitter buffer finds the packet too late and drops it as lost; a
receiver that knows the procedure reads the payloads of exactly those late
packets.

Streams are stored column-wise in :class:`PacketStream` (one numpy array per
field) because a single call produces tens of thousands of packets.
Indexing a stream yields :class:`AudioPacket` records. Payloads are arrays
of 0/1 ``uint8``. Voice payloads are synthetic fill derived from the
sequence number and are only materialised on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import DomainError, FramingError

VOICE = "voice"
COVERT = "covert"

DEFAULT_BASE_DELAY = 0.05
DEFAULT_JITTER = 0.005
DEFAULT_PLAYOUT_DEADLINE = 0.15
LACK_MARGIN = 0.1


def voice_payload(seq: int, payload_bits: int) -> np.ndarray:
    """Deterministic stand-in for encoded audio: the big-endian seq, repeated."""
    word = np.unpackbits(np.frombuffer(int(seq % 2**32).to_bytes(4, "big"), dtype=np.uint8))
    reps = -(-payload_bits // word.size)
    return np.tile(word, reps)[:payload_bits]


def pad_payload(bits, payload_bits: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise FramingError("covert payload must be a flat bit array")
    if bits.size > payload_bits:
        raise FramingError(f"covert payload of {bits.size} bits exceeds the {payload_bits}-bit frame")
    if np.any(bits > 1):
        raise FramingError("covert payload must contain only 0/1 values")
    out = np.zeros(payload_bits, dtype=np.uint8)
    out[: bits.size] = bits
    return out


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


@dataclass
class AudioPacket:
    seq: int
    gen_time: float
    send_time: float
    payload: np.ndarray
    kind: str = VOICE
    arrival_time: float | None = None
    lost: bool = False


def embed(packet: AudioPacket, covert_bits, lack_delay: float) -> AudioPacket:
    """Return a covert copy of a voice packet: new payload, send delayed by ``lack_delay``."""
    if packet.kind != VOICE:
        raise DomainError(f"packet {packet.seq} already carries covert data")
    if lack_delay <= 0:
        raise DomainError("lack_delay must be > 0")
    payload = pad_payload(covert_bits, len(packet.payload))
    return replace(packet, kind=COVERT, payload=payload, send_time=packet.gen_time + lack_delay)


@dataclass(frozen=True)
class NetworkModel:
    """Constant path delay plus zero-truncated Gaussian jitter and i.i.d. loss."""

    base_delay: float = DEFAULT_BASE_DELAY
    jitter: float = DEFAULT_JITTER
    random_loss: float = 0.0

    def __post_init__(self):
        if self.base_delay < 0 or self.jitter < 0:
            raise DomainError("base_delay and jitter must be >= 0")
        if not 0 <= self.random_loss <= 1:
            raise DomainError("random_loss must lie in [0, 1]")


@dataclass(frozen=True)
class JitterBufferConfig:
    playout_deadline: float = DEFAULT_PLAYOUT_DEADLINE
    lack_delay: float = DEFAULT_PLAYOUT_DEADLINE - DEFAULT_BASE_DELAY + LACK_MARGIN

    @classmethod
    def for_network(cls, network: NetworkModel, playout_deadline=DEFAULT_PLAYOUT_DEADLINE,
                    lack_delay=None):
        if lack_delay is None:
            lack_delay = playout_deadline - network.base_delay + LACK_MARGIN
        return cls(playout_deadline=playout_deadline, lack_delay=lack_delay)

    def violations(self, network: NetworkModel) -> list[str]:
        out = []
        if self.playout_deadline <= 0:
            out.append("playout_deadline must be > 0")
        if network.base_delay > self.playout_deadline:
            out.append(
                f"base_delay ({network.base_delay:g}) must not exceed playout_deadline "
                f"({self.playout_deadline:g})"
            )
        need = self.playout_deadline - network.base_delay
        if not self.lack_delay > need:
            out.append(
                f"lack_delay ({self.lack_delay:g}) must exceed playout_deadline - base_delay "
                f"({need:g}) so unaware receivers discard LACK packets"
            )
        return out


@dataclass
class PacketStream:
    """Column-wise packet stream; ``seq`` equals the array index."""

    payload_bits: int
    gen_time: np.ndarray
    send_time: np.ndarray
    covert: np.ndarray
    arrival_time: np.ndarray
    lost: np.ndarray
    covert_payloads: dict = field(default_factory=dict)
    transmitted: bool = False

    def __len__(self):
        return self.gen_time.size

    @property
    def seq(self):
        return np.arange(len(self))

    def payload(self, seq: int) -> np.ndarray:
        if self.covert[seq]:
            return self.covert_payloads[seq]
        return voice_payload(seq, self.payload_bits)

    def __getitem__(self, seq: int) -> AudioPacket:
        arrival = None if not self.transmitted or self.lost[seq] else float(self.arrival_time[seq])
        return AudioPacket(
            seq=int(seq),
            gen_time=float(self.gen_time[seq]),
            send_time=float(self.send_time[seq]),
            payload=self.payload(seq),
            kind=COVERT if self.covert[seq] else VOICE,
            arrival_time=arrival,
            lost=bool(self.lost[seq]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def embed(self, seq: int, covert_bits, lack_delay: float) -> None:
        """In-place counterpart of :func:`embed` for packet ``seq``."""
        if self.transmitted:
            raise DomainError("cannot embed into a stream already on the wire")
        packet = embed(AudioPacket(int(seq), float(self.gen_time[seq]), float(self.send_time[seq]),
                                   np.zeros(self.payload_bits, np.uint8),
                                   COVERT if self.covert[seq] else VOICE),
                       covert_bits, lack_delay)
        self.covert[seq] = True
        self.send_time[seq] = packet.send_time
        self.covert_payloads[int(seq)] = packet.payload

    @classmethod
    def from_packets(cls, packets) -> "PacketStream":
        packets = sorted(packets, key=lambda p: p.seq)
        if [p.seq for p in packets] != list(range(len(packets))):
            raise DomainError("packet sequence numbers must be 0..n-1")
        if not packets:
            raise DomainError("empty packet list")
        payload_bits = len(packets[0].payload)
        transmitted = any(p.arrival_time is not None or p.lost for p in packets)
        return cls(
            payload_bits=payload_bits,
            gen_time=np.array([p.gen_time for p in packets], dtype=float),
            send_time=np.array([p.send_time for p in packets], dtype=float),
            covert=np.array([p.kind == COVERT for p in packets]),
            arrival_time=np.array([np.nan if p.arrival_time is None else p.arrival_time
                                   for p in packets], dtype=float),
            lost=np.array([p.lost for p in packets]),
            covert_payloads={p.seq: np.asarray(p.payload, np.uint8)
                             for p in packets if p.kind == COVERT},
            transmitted=transmitted,
        )


def as_stream(packets) -> PacketStream:
    if isinstance(packets, PacketStream):
        return packets
    return PacketStream.from_packets(packets)


def generate_stream(codec, duration: float) -> PacketStream:
    """One voice packet per frame interval covering ``duration`` seconds."""
    if not duration > 0:
        raise DomainError("call duration must be > 0")
    # round before ceil so 3.0 / 0.03 is 100 packets, not 101
    n = max(1, math.ceil(round(duration / codec.frame_interval, 9)))
    gen = np.arange(n) * codec.frame_interval
    return PacketStream(
        payload_bits=codec.payload_bits,
        gen_time=gen,
        send_time=gen.copy(),
        covert=np.zeros(n, dtype=bool),
        arrival_time=np.full(n, np.nan),
        lost=np.zeros(n, dtype=bool),
    )


def transmit(packets, network: NetworkModel, rng=None) -> PacketStream:
    """Push a stream through the network; returns a new stream with arrival data.

    Loss and jitter are drawn per packet in send order from ``rng`` (a seed
    or a Generator).
    """
    stream = as_stream(packets)
    rng = np.random.default_rng(rng)
    n = len(stream)
    order = np.argsort(stream.send_time, kind="stable")
    u = rng.random(n)
    jit = rng.normal(0.0, 1.0, n) * network.jitter if network.jitter > 0 else np.zeros(n)
    lost = np.empty(n, dtype=bool)
    delay = np.empty(n)
    lost[order] = u < network.random_loss
    delay[order] = network.base_delay + np.maximum(0.0, jit)
    arrival = np.where(lost, np.nan, stream.send_time + delay)
    return replace(stream, arrival_time=arrival, lost=lost, send_time=stream.send_time.copy(),
                   covert=stream.covert.copy(), transmitted=True)


class UnawareResult(NamedTuple):
    played: np.ndarray
    discarded: int
    late: int
    lost: int


class AwareResult(NamedTuple):
    played: np.ndarray
    bitstream: np.ndarray
    carriers: np.ndarray


def _lag_split(stream, buffer):
    if not stream.transmitted:
        raise DomainError("stream has not been transmitted")
    lag = stream.arrival_time - stream.gen_time
    with np.errstate(invalid="ignore"):
        on_time = ~stream.lost & (lag <= buffer.playout_deadline)
        late = ~stream.lost & (lag > buffer.playout_deadline)
    return on_time, late


def receive_unaware(packets, buffer: JitterBufferConfig) -> UnawareResult:
    """Plain jitter buffer: plays packets within the deadline, drops the rest."""
    stream = as_stream(packets)
    on_time, late = _lag_split(stream, buffer)
    played = np.flatnonzero(on_time)
    n_late = int(late.sum())
    n_lost = int(stream.lost.sum())
    return UnawareResult(played, n_late + n_lost, n_late, n_lost)


def receive_aware(packets, buffer: JitterBufferConfig) -> AwareResult:
    """LACK-aware receiver: same playout, plus reads every late packet as covert data.

    Carriers are chosen by timing alone, so a voice packet delayed past the
    deadline by the network is read as covert data too.
    """
    stream = as_stream(packets)
    on_time, late = _lag_split(stream, buffer)
    carriers = np.flatnonzero(late)
    if carriers.size:
        bitstream = np.concatenate([stream.payload(int(s)) for s in carriers])
    else:
        bitstream = np.zeros(0, dtype=np.uint8)
    return AwareResult(np.flatnonzero(on_time), bitstream, carriers)


def extract_bits(result: AwareResult, n_bits: int) -> np.ndarray:
    """Covert bitstream trimmed to the known message length."""
    return result.bitstream[:n_bits]
