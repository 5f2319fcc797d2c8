"""Call-duration probability laws.

Two families are provided:

* :class:`WeibullModel`, the two-parameter Weibull law (``k == 1`` is the
  exponential law), evaluated in closed form.
* :class:`EmpiricalPiecewiseModel`, a piecewise fit to measured VoIP call
  durations (log-normal head and tail, two-term exponential mixture in the
  middle), truncated at 455 s and renormalised.

All models are immutable. Functions that need randomness take a seed or a
:class:`numpy.random.Generator`.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError

#: Absolute tolerance for every adaptive quadrature in this module.
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10

#: Reference mean call duration (seconds) shared by all TABLE1 models.
REFERENCE_MEAN = 117.31

#: (k, lambda, printed C_v) for the eight reference Weibull laws.
TABLE1 = (
    (3.4, 130.57, 0.32),
    (2.0, 132.37, 0.52),
    (1.2, 124.71, 0.84),
    (1.0, 117.31, 1.00),
    (0.8, 103.54, 1.26),
    (0.6, 77.97, 1.76),
    (0.5, 58.65, 2.23),
    (0.4, 35.3, 3.14),
)


def _check_x(x):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"durations must be >= 0, got {x!r}")
    return arr


def _finish(values, like):
    """Return a Python float for scalar input, an array otherwise."""
    if np.ndim(like) == 0:
        return float(values)
    return values


@dataclass(frozen=True)
class ModelMoments:
    mean: float
    std_dev: float
    cv: float
    second_moment: float

    @classmethod
    def from_raw(cls, mean, second_moment):
        var = max(second_moment - mean * mean, 0.0)
        std = math.sqrt(var)
        return cls(mean=mean, std_dev=std, cv=std / mean, second_moment=second_moment)

    @classmethod
    def from_mean_cv(cls, mean, cv):
        std = cv * mean
        return cls(mean=mean, std_dev=std, cv=cv, second_moment=std * std + mean * mean)


class DurationModel(abc.ABC):
    """Common interface of call-duration laws (durations in seconds)."""

    #: Upper end of the support.
    x_max: float = math.inf

    @abc.abstractmethod
    def pdf(self, x):
        """Probability density at ``x``."""

    @abc.abstractmethod
    def ccdf(self, x):
        """Survival function ``P(D > x)``."""

    @abc.abstractmethod
    def tail_integral(self, t):
        """``integral_t^inf P(D > x) dx``."""

    @abc.abstractmethod
    def moments(self) -> ModelMoments:
        ...

    @abc.abstractmethod
    def isf(self, u):
        """Inverse survival function: the ``x`` with ``P(D > x) == u``."""

    @abc.abstractmethod
    def largest_valid_t(self, floor):
        """Largest ``t`` with ``ccdf(t) >= floor``."""

    @property
    @abc.abstractmethod
    def label(self) -> str:
        ...

    def cdf(self, x):
        return _finish(1.0 - np.asarray(self.ccdf(x)), x)

    def sample(self, rng=None, size=None):
        """Draw durations by inverse transform.

        ``rng`` is a seed or a :class:`numpy.random.Generator`; a fixed seed
        gives a fixed draw.
        """
        rng = np.random.default_rng(rng)
        # 1 - U lies in (0, 1], so the inverse never sees log(0)
        u = 1.0 - rng.random(size)
        return self.isf(u)


@dataclass(frozen=True)
class WeibullModel(DurationModel):
    """Two-parameter Weibull law with shape ``k`` and scale ``lam`` (seconds).

    ``ccdf(x) = exp(-(x/lam)**k)``. With ``k == 1`` this is the exponential
    law of mean ``lam``.
    """

    k: float
    lam: float

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise DomainError(f"shape k must be > 0, got {self.k!r}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"scale lambda must be > 0, got {self.lam!r}")

    @property
    def label(self):
        return f"weibull(k={self.k:g},lambda={self.lam:g})"

    def pdf(self, x):
        arr = _check_x(x)
        z = arr / self.lam
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.k / self.lam) * z ** (self.k - 1.0) * np.exp(-(z**self.k))
        if self.k == 1.0:
            # avoid 0**0 ambiguity at the origin
            out = np.exp(-z) / self.lam
        return _finish(out, x)

    def ccdf(self, x):
        arr = _check_x(x)
        return _finish(np.exp(-((arr / self.lam) ** self.k)), x)

    def tail_integral(self, t):
        # substitution u = (x/lam)**k turns the tail into an upper
        # incomplete gamma integral
        arr = _check_x(t)
        u = (arr / self.lam) ** self.k
        out = self.lam * special.gamma(1.0 + 1.0 / self.k) * special.gammaincc(1.0 / self.k, u)
        return _finish(out, t)

    def moments(self):
        mean = self.lam * special.gamma(1.0 + 1.0 / self.k)
        second = self.lam**2 * special.gamma(1.0 + 2.0 / self.k)
        return ModelMoments.from_raw(float(mean), float(second))

    def isf(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u > 1)):
            raise DomainError("survival level must lie in (0, 1]")
        return _finish(self.lam * (-np.log(u)) ** (1.0 / self.k), u)

    def largest_valid_t(self, floor):
        return self.lam * (-math.log(floor)) ** (1.0 / self.k)


def exponential(mean: float = REFERENCE_MEAN) -> WeibullModel:
    return WeibullModel(k=1.0, lam=mean)


def table1_models() -> list[WeibullModel]:
    return [WeibullModel(k, lam) for k, lam, _ in TABLE1]


def _lognormal_form(x, mu, sigma):
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.exp(-((np.log(x) - mu) ** 2) / (2.0 * sigma * sigma)) / (sigma * x * math.sqrt(2.0 * math.pi))
    return np.where(x > 0, v, 0.0)


@dataclass(frozen=True)
class EmpiricalPiecewiseModel(DurationModel):
    """Piecewise fit of measured VoIP call durations.

    Raw branches::

        lognormal(mu, sigma)            on [0, 27.5]
        sum a_i * exp(-b_i x)           on (27.5, 66.5]
        lognormal(mu, sigma)            on (66.5, 455]
        0                               beyond 455

    Boundary points belong to the left branch. The raw density does not
    integrate to one, so it is divided by ``norm``. Survival and tail
    integrals use the closed-form mass and first moment of each branch
    (normal CDF for the log-normal parts, antiderivatives for the
    exponentials). Sampling uses an inverse-CDF table of ``n_knots``
    equiprobable knots with linear interpolation.
    """

    mu: float = 3.8
    sigma: float = 1.55
    mixture: tuple = ((0.000114, 0.00114), (0.027252, 0.03028))
    breaks: tuple = (27.5, 66.5)
    x_max: float = 455.0
    n_knots: int = 4096
    norm: float = field(init=False)
    _levels: np.ndarray = field(init=False, repr=False, compare=False)
    _knots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = self.breaks
        if not (0 < lo < hi < self.x_max):
            raise DomainError("branch bounds must satisfy 0 < lo < hi < x_max")
        if self.sigma <= 0:
            raise DomainError("sigma must be > 0")
        raw = self.raw_pdf(np.linspace(0.0, self.x_max, 4001))
        if np.any(raw < 0):
            raise DomainError("branch parameters give a negative density")
        object.__setattr__(self, "norm", float(self._upper(np.zeros(1))[0][0]))
        levels, knots = self._build_table()
        object.__setattr__(self, "_levels", levels)
        object.__setattr__(self, "_knots", knots)

    @property
    def label(self):
        return "empirical"

    # -- raw density and quadrature ------------------------------------

    def raw_pdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.breaks
        head = _lognormal_form(x, self.mu, self.sigma)
        mid = sum(a * np.exp(-b * x) for a, b in self.mixture)
        out = np.where(x <= lo, head, np.where(x <= hi, mid, head))
        return np.where(x <= self.x_max, out, 0.0)

    def _integrate(self, func, a, b):
        """Adaptive quadrature of ``func`` over [a, b], split at the branch bounds."""
        b = min(b, self.x_max)
        if b <= a:
            return 0.0
        cuts = [a] + [p for p in self.breaks if a < p < b] + [b]
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            val, _ = integrate.quad(
                lambda s: float(func(s)), lo, hi,
                epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200,
            )
            total += val
        return total

    def _ln_parts(self, a, b):
        # mass and first moment of the raw log-normal form on [a, b]
        with np.errstate(divide="ignore"):
            za = (np.log(a) - self.mu) / self.sigma
            zb = (np.log(b) - self.mu) / self.sigma
        scale = math.exp(self.mu + 0.5 * self.sigma**2)
        mass = special.ndtr(zb) - special.ndtr(za)
        first = scale * (special.ndtr(zb - self.sigma) - special.ndtr(za - self.sigma))
        return mass, first

    def _mix_parts(self, a, b):
        mass = sum(c / r * (np.exp(-r * a) - np.exp(-r * b)) for c, r in self.mixture)
        first = sum(c * ((a / r + 1 / r**2) * np.exp(-r * a) - (b / r + 1 / r**2) * np.exp(-r * b))
                    for c, r in self.mixture)
        return mass, first

    def _upper(self, x):
        """Raw mass and first moment on [x, x_max], branch by branch."""
        lo, hi = self.breaks
        x = np.minimum(np.asarray(x, dtype=float), self.x_max)
        m1, f1 = self._ln_parts(np.minimum(x, lo), lo)
        m2, f2 = self._mix_parts(np.clip(x, lo, hi), hi)
        m3, f3 = self._ln_parts(np.clip(x, hi, self.x_max), self.x_max)
        return m1 + m2 + m3, f1 + f2 + f3

    def _build_table(self):
        # per-cell Gauss-Legendre on a grid aligned with the branch bounds,
        # so no cell straddles a discontinuity
        edges = [0.0, *self.breaks, self.x_max]
        grid = np.unique(np.concatenate(
            [np.linspace(a, b, 2001) for a, b in zip(edges[:-1], edges[1:])]
        ))
        nodes, weights = np.polynomial.legendre.leggauss(8)
        h = np.diff(grid)
        mid = 0.5 * (grid[:-1] + grid[1:])
        pts = mid[:, None] + 0.5 * h[:, None] * nodes[None, :]
        mass = 0.5 * h * (self.raw_pdf(pts) @ weights)
        cdf = np.concatenate([[0.0], np.cumsum(mass)])
        cdf /= cdf[-1]
        levels = np.linspace(0.0, 1.0, self.n_knots)
        knots = np.interp(levels, cdf, grid)
        knots[0], knots[-1] = 0.0, self.x_max
        return levels, knots

    # -- public interface ----------------------------------------------

    def pdf(self, x):
        arr = _check_x(x)
        return _finish(self.raw_pdf(arr) / self.norm, x)

    def ccdf(self, x):
        arr = _check_x(x)
        mass, _ = self._upper(arr)
        return _finish(mass / self.norm, x)

    def tail_integral(self, t):
        arr = _check_x(t)
        mass, first = self._upper(arr)
        # int_t^inf (x - t) f(x) dx, clipped against rounding near x_max
        return _finish(np.maximum(first - arr * mass, 0.0) / self.norm, t)

    def moments(self):
        mean = self._integrate(lambda x: x * self.raw_pdf(x), 0.0, self.x_max) / self.norm
        second = self._integrate(lambda x: x * x * self.raw_pdf(x), 0.0, self.x_max) / self.norm
        return ModelMoments.from_raw(mean, second)

    def isf(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)):
            raise DomainError("survival level must lie in [0, 1]")
        return _finish(np.interp(1.0 - u, self._levels, self._knots), u)

    def largest_valid_t(self, floor):
        if self.ccdf(0.0) < floor:
            return 0.0
        return optimize.brentq(lambda t: self.ccdf(t) - floor, 0.0, self.x_max, xtol=1e-12)


def model_from_spec(kind: str, k: float | None = None, lam: float | None = None) -> DurationModel:
    """Build a model from the config triple ``(model, k, lambda)``."""
    if kind == "weibull":
        return WeibullModel(k, lam)
    if kind == "exponential":
        return WeibullModel(1.0, REFERENCE_MEAN if lam is None else lam)
    if kind == "empirical":
        return EmpiricalPiecewiseModel()
    raise DomainError(f"unknown duration model {kind!r}")
