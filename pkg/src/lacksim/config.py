"""Experiment configuration: TOML parsing, validation and presets.

A config is a flat TOML document. Every key is optional; ``preset`` picks a
starting point from :data:`PRESETS` and the remaining keys override it::

    preset = "g711-baseline"
    model = "weibull"
    k = 0.4
    lambda = 35.3
    covert_bits = 1000        # or "unlimited"
    cf = 0.8
    estimator = "approx"
    approx_coefficients = "refit"

Validation reports every problem at once through :class:`ConfigError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .channel import (
    DEFAULT_BASE_DELAY,
    DEFAULT_JITTER,
    DEFAULT_PLAYOUT_DEADLINE,
    JitterBufferConfig,
    NetworkModel,
)
from .duration_models import REFERENCE_MEAN, DurationModel, model_from_spec
from .errors import ConfigError, DomainError
from .scheduler import CODECS, CodecProfile, get_codec
from .simulator import ChannelConfig, SchedulerConfig, resolve_coefficients


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "exponential"
    k: float | None = None
    lambda_: float | None = None
    codec: str = "G.711"
    covert_bits: float = 1000
    cf: float = 0.8
    plc: bool = False
    estimator: str = "exact"
    approx_coefficients: str | None = None
    mode: str = "rate"
    embed_probability: float | None = None
    forced_duration: float | None = None
    base_delay: float = DEFAULT_BASE_DELAY
    jitter: float = DEFAULT_JITTER
    random_loss: float = 0.0
    playout_deadline: float = DEFAULT_PLAYOUT_DEADLINE
    lack_delay: float | None = None
    sample_every: float = 1.0
    n_calls: int = 1000
    seed: int = 1
    workers: int = 1
    covert_file: str | None = None
    out: str = "results"

    # -- derived objects -------------------------------------------------

    def duration_model(self) -> DurationModel:
        return model_from_spec(self.model, self.k, self.lambda_)

    def codec_profile(self) -> CodecProfile:
        return get_codec(self.codec)

    def network(self) -> NetworkModel:
        return NetworkModel(self.base_delay, self.jitter, self.random_loss)

    def buffer(self) -> JitterBufferConfig:
        return JitterBufferConfig.for_network(self.network(), self.playout_deadline, self.lack_delay)

    def channel(self) -> ChannelConfig:
        return ChannelConfig(self.network(), self.buffer())

    def scheduler(self, model: DurationModel | None = None) -> SchedulerConfig:
        model = model or self.duration_model()
        return SchedulerConfig(
            covert_bits=self.covert_bits,
            cf=self.cf,
            plc=self.plc,
            estimator=self.estimator,
            coeffs=resolve_coefficients(model, self.estimator, self.approx_coefficients),
            mode=self.mode,
            embed_probability=self.embed_probability,
            sample_every=self.sample_every,
        )


# TOML key -> dataclass field
_KEY_ALIASES = {"lambda": "lambda_"}
_FIELD_TO_KEY = {v: k for k, v in _KEY_ALIASES.items()}
_FIELDS = {f.name: f for f in fields(ExperimentConfig)}

_FLOAT_KEYS = {"k", "lambda_", "cf", "embed_probability", "forced_duration", "base_delay",
               "jitter", "random_loss", "playout_deadline", "lack_delay", "sample_every"}
_INT_KEYS = {"n_calls", "seed", "workers"}
_STR_KEYS = {"model", "codec", "estimator", "approx_coefficients", "mode", "covert_file", "out"}


PRESETS: dict[str, dict] = {
    "g711-baseline": {"model": "exponential", "lambda": REFERENCE_MEAN, "codec": "G.711"},
    "g729a-baseline": {"model": "exponential", "lambda": REFERENCE_MEAN, "codec": "G.729A"},
    "g7231-baseline": {"model": "exponential", "lambda": REFERENCE_MEAN, "codec": "G.723.1"},
    "heavy-tail": {"model": "weibull", "k": 0.4, "lambda": 35.3, "codec": "G.711"},
    "empirical": {"model": "empirical", "codec": "G.711"},
    # one hour of G.711 with every 200th packet carrying covert data
    "g711-constant-320": {
        "model": "exponential", "lambda": REFERENCE_MEAN, "codec": "G.711",
        "mode": "constant", "embed_probability": 0.005, "covert_bits": "unlimited",
        "forced_duration": 3600.0, "jitter": 0.0, "n_calls": 1,
    },
}


def _coerce(key, value, problems):
    name = _KEY_ALIASES.get(key, key)
    if name == "covert_bits":
        if value == "unlimited":
            return math.inf
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append("covert_bits: expected a non-negative integer or 'unlimited'")
            return None
        return value
    if name == "plc":
        if not isinstance(value, bool):
            problems.append("plc: expected true or false")
            return None
        return value
    if name in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{key}: expected a number, got {value!r}")
            return None
        return float(value)
    if name in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{key}: expected an integer, got {value!r}")
            return None
        return value
    if name in _STR_KEYS:
        if not isinstance(value, str):
            problems.append(f"{key}: expected a string, got {value!r}")
            return None
        return value
    raise AssertionError(name)


def _apply(base: ExperimentConfig, raw: dict, problems: list) -> ExperimentConfig:
    updates = {}
    for key, value in raw.items():
        name = _KEY_ALIASES.get(key, key)
        if name not in _FIELDS or key == "lambda_":
            problems.append(f"unknown key {key!r}")
            continue
        coerced = _coerce(key, value, problems)
        if coerced is not None:
            updates[name] = coerced
    return replace(base, **updates)


def validate(cfg: ExperimentConfig) -> list[str]:
    """Every constraint violation in ``cfg``; empty when valid."""
    problems = []
    if cfg.model not in ("weibull", "exponential", "empirical"):
        problems.append(f"model: must be weibull, exponential or empirical, got {cfg.model!r}")
    if cfg.model == "weibull":
        if cfg.k is None or cfg.lambda_ is None:
            problems.append("model weibull needs both k and lambda")
    if cfg.k is not None and not cfg.k > 0:
        problems.append("k: Weibull shape must be > 0")
    if cfg.lambda_ is not None and not cfg.lambda_ > 0:
        problems.append("lambda: Weibull scale must be > 0")
    if cfg.model == "exponential" and cfg.k not in (None, 1.0):
        problems.append("k: the exponential model has k = 1")
    try:
        get_codec(cfg.codec)
    except DomainError:
        problems.append(f"codec: unknown codec {cfg.codec!r}; known: {', '.join(CODECS)}")
    if not cfg.covert_bits >= 0:
        problems.append("covert_bits: must be >= 0")
    if not 0 < cfg.cf <= 1:
        problems.append(f"cf: correction factor must lie in (0, 1], got {cfg.cf:g}")
    if cfg.estimator not in ("exact", "approx"):
        problems.append(f"estimator: must be exact or approx, got {cfg.estimator!r}")
    if cfg.approx_coefficients not in (None, "refit", "as-printed"):
        problems.append("approx_coefficients: must be refit or as-printed")
    if cfg.estimator == "approx" and cfg.approx_coefficients is None:
        problems.append(
            "estimator approx: set approx_coefficients = 'refit', or 'as-printed' to accept "
            "the unscaled stock coefficients"
        )
    if cfg.mode not in ("rate", "constant"):
        problems.append(f"mode: must be rate or constant, got {cfg.mode!r}")
    if cfg.mode == "constant":
        if cfg.embed_probability is None or not 0 <= cfg.embed_probability <= 1:
            problems.append("embed_probability: constant mode needs a value in [0, 1]")
    if cfg.forced_duration is not None and not cfg.forced_duration > 0:
        problems.append("forced_duration: must be > 0")
    if cfg.base_delay < 0:
        problems.append("base_delay: must be >= 0")
    if cfg.jitter < 0:
        problems.append("jitter: must be >= 0")
    if not 0 <= cfg.random_loss < 1:
        problems.append("random_loss: must lie in [0, 1)")
    if cfg.base_delay >= 0 and cfg.jitter >= 0 and 0 <= cfg.random_loss < 1:
        net = NetworkModel(cfg.base_delay, cfg.jitter, cfg.random_loss)
        buf = JitterBufferConfig.for_network(net, cfg.playout_deadline, cfg.lack_delay)
        problems.extend(f"jitter buffer: {p}" for p in buf.violations(net))
    if not cfg.sample_every > 0:
        problems.append("sample_every: must be > 0")
    if cfg.n_calls < 1:
        problems.append("n_calls: must be >= 1")
    if cfg.seed < 0:
        problems.append("seed: must be >= 0")
    if cfg.workers < 1:
        problems.append("workers: must be >= 1")
    return problems


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; known: {', '.join(PRESETS)}"])
    problems = []
    cfg = _apply(ExperimentConfig(), PRESETS[name], problems)
    problems += validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse and validate a TOML config; raises :class:`ConfigError` listing all violations."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"malformed TOML: {exc}"]) from None
    problems = []
    cfg = base or ExperimentConfig()
    if "preset" in raw:
        name = raw.pop("preset")
        if name in PRESETS:
            cfg = _apply(cfg, PRESETS[name], problems)
        else:
            problems.append(f"preset: unknown preset {name!r}; known: {', '.join(PRESETS)}")
    nested = [k for k, v in raw.items() if isinstance(v, dict)]
    for key in nested:
        problems.append(f"unknown key {key!r} (tables are not supported)")
        raw.pop(key)
    cfg = _apply(cfg, raw, problems)
    problems += validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name == "covert_bits" and value == math.inf:
            value = "unlimited"
        out[_FIELD_TO_KEY.get(f.name, f.name)] = value
    return out
