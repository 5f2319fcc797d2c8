"""Figure data, reference-table checks and deterministic result files.

All CSV files use a fixed column order, 9 significant digits and LF line
endings, so equal inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .duration_models import REFERENCE_MEAN, TABLE1, EmpiricalPiecewiseModel, WeibullModel, table1_models
from .residual import conditional_mean, conditional_mean_bounds
from .scheduler import CodecProfile, SchedulerState, loss_budget_cap, schedule_call


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.9g}"


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _grid(t_max, step):
    n = int(round(t_max / step))
    return np.arange(n + 1) * step


def _model_cols(model):
    if isinstance(model, WeibullModel):
        return [model.label, model.k, model.lam, model.moments().cv]
    return [model.label, None, None, model.moments().cv]


MODEL_HEADER = ["model", "k", "lambda", "cv"]


def fig2_data(x_max=400.0, step=2.0, models=None):
    """Density of each reference Weibull law on a uniform grid."""
    models = models or table1_models()
    x = _grid(x_max, step)
    rows = []
    for m in models:
        cols = _model_cols(m)
        for xi, p in zip(x, np.atleast_1d(m.pdf(x))):
            rows.append(cols + [xi, p])
    return MODEL_HEADER + ["x", "pdf"], rows


def fig3_data(t_max=300.0, step=5.0, models=None):
    """E(D|D>t) and its upper bound for the reference Weibull laws plus the empirical fit."""
    models = models or table1_models() + [EmpiricalPiecewiseModel()]
    t = _grid(t_max, step)
    rows = []
    for m in models:
        cols = _model_cols(m)
        cm = np.atleast_1d(conditional_mean(m, t))
        _, upper = conditional_mean_bounds(m, t)
        for ti, c, u in zip(t, cm, np.atleast_1d(upper)):
            rows.append(cols + [ti, c, u])
    return MODEL_HEADER + ["t", "conditional_mean", "upper_bound"], rows


def fig4_data(covert_bits: float, codec: CodecProfile, cf: float = 0.8, plc: bool = False,
              t_max=300.0, step=5.0, models=None):
    """Insertion rate curves for a budget of ``covert_bits``.

    ``ir_frozen`` keeps the budget at its initial value (``S / E(D|D>t)``).
    ``ir_depleted`` uses the remaining budget left by the scheduler (with
    ``cf`` and the codec cap) on a call that has not ended by ``t``.
    """
    if not (covert_bits > 0 and math.isfinite(covert_bits)):
        raise ValueError("fig4 needs a finite covert budget > 0")
    models = models or table1_models()
    t = _grid(t_max, step)
    dt = codec.frame_interval
    n_packets = int(math.floor(t_max / dt + 1e-9)) + 1
    rows = []
    for m in models:
        cols = _model_cols(m)
        cm = np.atleast_1d(conditional_mean(m, t))
        state = SchedulerState(s_remaining=float(covert_bits), cf=cf,
                               p_cap=loss_budget_cap(codec, 0.0, plc))
        plan = schedule_call(state, m, codec, n_packets)
        embed_t = np.asarray(plan.embed_index, dtype=float) * dt
        spent = np.concatenate([[0], np.cumsum(plan.embed_bits)])
        # budget before the decision at time t
        s_rem = covert_bits - spent[np.searchsorted(embed_t, t - 1e-9, side="left")]
        for ti, c, s in zip(t, cm, s_rem):
            rows.append(cols + [ti, covert_bits / c, s, s / c])
    return MODEL_HEADER + ["t", "ir_frozen", "s_remaining", "ir_depleted"], rows


@dataclass(frozen=True)
class Table1Row:
    k: float
    lam: float
    mean: float
    cv: float
    printed_cv: float
    mean_ok: bool
    cv_ok: bool

    @property
    def ok(self):
        return self.mean_ok and self.cv_ok


def check_table1(mean_rel_tol=0.005, cv_tol=0.01) -> list[Table1Row]:
    out = []
    for k, lam, printed in TABLE1:
        mom = WeibullModel(k, lam).moments()
        out.append(Table1Row(
            k=k, lam=lam, mean=mom.mean, cv=mom.cv, printed_cv=printed,
            mean_ok=abs(mom.mean - REFERENCE_MEAN) / REFERENCE_MEAN < mean_rel_tol,
            cv_ok=abs(mom.cv - printed) <= cv_tol + 1e-12,
        ))
    return out


CALLS_HEADER = [
    "call", "duration", "n_packets", "covert_bits_sent", "covert_bits_delivered",
    "budget_exhausted_at", "induced_loss", "natural_loss", "total_discard",
    "false_covert_reads", "completed",
]


def calls_csv(calls) -> str:
    rows = (
        [i, c.duration, c.n_packets, c.covert_bits_sent, c.covert_bits_delivered,
         c.budget_exhausted_at, c.induced_loss, c.natural_loss, c.total_discard,
         c.false_covert_reads, c.completed]
        for i, c in enumerate(calls)
    )
    return render_csv(CALLS_HEADER, rows)


def trajectory_csv(calls) -> str:
    rows = ([i, t, rate] for i, c in enumerate(calls) for t, rate in c.ir_trajectory)
    return render_csv(["call", "t", "insertion_rate"], rows)


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "unlimited" if obj > 0 else str(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def summary_json(summary, config: dict | None = None, ks=None) -> str:
    doc = {"summary": asdict(summary)}
    if ks is not None:
        doc["duration_check"] = asdict(ks)
    if config is not None:
        doc["config"] = config
    return json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"
