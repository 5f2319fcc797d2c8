"""Mean residual life and conditional expected call duration.

``conditional_mean(model, t)`` is ``E(D | D > t)``, computed from the tail
form ``t + (1 / ccdf(t)) * integral_t^inf ccdf(x) dx``. For Weibull laws the
tail integral is an incomplete gamma function; the empirical law sums the
closed-form pieces of its branches.

The linear approximation ``a*C_v + b*t*sqrt(C_v) + c`` is available with its
stock coefficients (``AS_PRINTED``) and as a template refit against the
exact curve by :func:`refit_approximation`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .duration_models import DurationModel, ModelMoments, WeibullModel, _finish
from .errors import DomainError, FitError, TailUnderflowError

#: Survival probabilities below this make E(D|D>t) numerically meaningless.
TAIL_FLOOR = 1e-12

DEFAULT_FIT_WINDOW = 300.0


def mean_residual(moments: ModelMoments) -> float:
    """Mean residual duration seen from a random instant, ``E(D^2) / 2E(D)``.

    Equal to ``(C_v**2 + 1) / 2 * E(D)``.
    """
    if not moments.mean > 0:
        raise DomainError("mean residual life needs a positive mean")
    return moments.second_moment / (2.0 * moments.mean)


def mean_residual_from_cv(mean: float, cv: float) -> float:
    if not mean > 0:
        raise DomainError("mean residual life needs a positive mean")
    return 0.5 * (cv * cv + 1.0) * mean


def _survival_checked(model, t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise DomainError(f"elapsed time must be >= 0, got {t!r}")
    surv = np.asarray(model.ccdf(arr), dtype=float)
    bad = surv < TAIL_FLOOR
    if np.any(bad):
        raise TailUnderflowError(float(np.max(arr[bad])), model.largest_valid_t(TAIL_FLOOR))
    return arr, surv


def conditional_mean(model: DurationModel, t):
    """Expected total duration of a call that has already lasted ``t`` seconds.

    Accepts a scalar or an array of times. Raises :class:`TailUnderflowError`
    when ``ccdf(t)`` drops below :data:`TAIL_FLOOR`.
    """
    arr, surv = _survival_checked(model, t)
    out = arr + np.asarray(model.tail_integral(arr)) / surv
    return _finish(out, t)


def conditional_mean_bounds(model: DurationModel, t):
    """``(t, E(D) / ccdf(t))``, which bracket ``conditional_mean(model, t)``."""
    arr, surv = _survival_checked(model, t)
    upper = model.moments().mean / surv
    return _finish(arr, t), _finish(upper, t)


def weibull_upper_bound(model: WeibullModel, t):
    """Closed form of the upper bound for Weibull laws: ``exp((t/lam)^k) lam Gamma(1 + 1/k)``."""
    arr, _ = _survival_checked(model, t)
    out = np.exp((arr / model.lam) ** model.k) * model.lam * math.gamma(1.0 + 1.0 / model.k)
    return _finish(out, t)


@dataclass(frozen=True)
class ApproxCoefficients:
    """Coefficients of ``a*cv + b*t*sqrt(cv) + c``.

    ``fit_residual`` is the maximum relative error against the exact curve
    over the fit window, or ``None`` for coefficients that were not fitted.
    """

    a: float = 1.32
    b: float = 1.0
    c: float = 0.59
    fit_residual: float | None = None
    fit_window: float | None = None


AS_PRINTED = ApproxCoefficients()


def approx_conditional_mean(coeffs: ApproxCoefficients, cv: float, t):
    """Evaluate the linear approximation; pure arithmetic, no model access."""
    t_arr = np.asarray(t, dtype=float)
    out = coeffs.a * cv + coeffs.b * t_arr * math.sqrt(cv) + coeffs.c
    return _finish(out, t)


def refit_approximation(model: DurationModel, t_max: float = DEFAULT_FIT_WINDOW,
                        n_points: int = 128) -> ApproxCoefficients:
    """Least-squares refit of ``(a, c)`` with the slope held at ``sqrt(C_v)``.

    For one model the columns ``cv`` and ``1`` are collinear, so only the
    intercept ``a*cv + c`` is identified; the minimum-norm split is returned.
    ``fit_residual`` is the max relative error on the uniform fit grid.
    """
    if not t_max > 0 or n_points < 2:
        raise FitError(f"degenerate fit grid: t_max={t_max!r}, n_points={n_points!r}")
    grid = np.linspace(0.0, t_max, n_points)
    exact = conditional_mean(model, grid)
    cv = model.moments().cv
    target = exact - grid * math.sqrt(cv)
    design = np.column_stack([np.full_like(grid, cv), np.ones_like(grid)])
    (a, c), _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < 1 or not (np.isfinite(a) and np.isfinite(c)):
        raise FitError("singular least-squares system")
    coeffs = ApproxCoefficients(a=float(a), b=1.0, c=float(c))
    fitted = approx_conditional_mean(coeffs, cv, grid)
    resid = float(np.max(np.abs(fitted - exact) / exact))
    return ApproxCoefficients(a=float(a), b=1.0, c=float(c), fit_residual=resid, fit_window=t_max)


@dataclass(frozen=True)
class ConditionalMeanCurve:
    """Precomputed ``(t, E(D|D>t))`` grid, linearly interpolated on lookup."""

    model: DurationModel
    t: np.ndarray
    values: np.ndarray
    tolerance: float = 1e-9

    @classmethod
    def build(cls, model, t_grid):
        t_grid = np.asarray(t_grid, dtype=float)
        if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
            raise DomainError("curve grid must be strictly increasing with >= 2 points")
        values = np.asarray(conditional_mean(model, t_grid), dtype=float)
        lower, upper = conditional_mean_bounds(model, t_grid)
        tol = 1e-9 * np.maximum(values, 1.0)
        if np.any(values < lower - tol) or np.any(values > upper + tol):
            raise DomainError("conditional mean left its bounds; quadrature failed")
        t_grid.setflags(write=False)
        values.setflags(write=False)
        return cls(model=model, t=t_grid, values=values)

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr < self.t[0]) or np.any(arr > self.t[-1]):
            raise DomainError("time outside the precomputed curve grid")
        return _finish(np.interp(arr, self.t, self.values), t)
