"""Simulation toolkit for LACK (Lost Audio PaCKets) VoIP steganography.

Call-duration models, conditional residual call duration, a duration-aware
covert insertion scheduler, a packet-level VoIP channel and a Monte Carlo
batch runner.
"""

from .duration_models import (
    TABLE1,
    DurationModel,
    EmpiricalPiecewiseModel,
    ModelMoments,
    WeibullModel,
    exponential,
    table1_models,
)
from .residual import (
    AS_PRINTED,
    ApproxCoefficients,
    ConditionalMeanCurve,
    approx_conditional_mean,
    conditional_mean,
    conditional_mean_bounds,
    mean_residual,
    refit_approximation,
)
from .scheduler import (
    CODECS,
    CodecProfile,
    SchedulerState,
    decide_packet,
    insertion_rate,
    loss_budget_cap,
)
from .simulator import CallMetrics, run_batch, run_call

__version__ = "0.1.0"
