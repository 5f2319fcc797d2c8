"""Command-line entry point (``lacksim``)."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import output
from .channel import bits_to_bytes, bytes_to_bits, extract_bits
from .config import ExperimentConfig, parse_config, preset, to_dict
from .errors import ConfigError, LackError
from .simulator import call_seed, duration_distribution_check, run_batch, run_call


def _load(args) -> ExperimentConfig:
    if args.config:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = preset("g711-baseline")
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "n_calls", None) is not None:
        updates["n_calls"] = args.n_calls
    if getattr(args, "workers", None) is not None:
        updates["workers"] = args.workers
    return replace(cfg, **updates)


def _emit(text: str, out):
    if out:
        output.write_text(out, text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out_dir = Path(args.out or cfg.out)
    model = cfg.duration_model()
    codec = cfg.codec_profile()
    sched = cfg.scheduler(model)
    channel = cfg.channel()
    covert = None
    if cfg.covert_file:
        covert = bytes_to_bits(Path(cfg.covert_file).read_bytes())
    batch = run_batch(model, codec, sched, channel, cfg.n_calls, cfg.seed,
                      cfg.forced_duration, cfg.workers, covert_data=covert)
    ks = None
    if cfg.forced_duration is None and cfg.n_calls >= 100:
        ks = duration_distribution_check([c.duration for c in batch.calls], model)
    output.write_text(out_dir / "calls.csv", output.calls_csv(batch.calls))
    output.write_text(out_dir / "summary.json", output.summary_json(batch.summary, to_dict(cfg), ks))
    if args.trajectory:
        output.write_text(out_dir / "trajectory.csv", output.trajectory_csv(batch.calls))
    if covert is not None:
        _, _, aware, _ = run_call(model, codec, sched, channel, call_seed(cfg.seed, 0),
                                  cfg.forced_duration, covert_data=covert, return_streams=True)
        bits = extract_bits(aware, covert.size)
        (out_dir / "extracted.bin").write_bytes(bits_to_bytes(bits[: bits.size - bits.size % 8]))
    s = batch.summary
    print(f"calls={s.calls} mean_duration={s.duration_mean:.3f} completion={s.completion_fraction:.4f} "
          f"throughput={s.throughput:.4f}b/s violations={s.violations}")
    if ks is not None:
        print(f"duration KS D={ks.statistic:.5f} p={ks.pvalue:.4f} {'pass' if ks.passed else 'FAIL'}")
    return 0 if s.violations == 0 else 1


def cmd_fig(kind):
    def run(args) -> int:
        if kind == "fig2":
            header, rows = output.fig2_data(args.t_max or 400.0, args.step or 2.0)
        elif kind == "fig3":
            header, rows = output.fig3_data(args.t_max or 300.0, args.step or 5.0)
        else:
            cfg = _load(args)
            if not math.isfinite(cfg.covert_bits) or cfg.covert_bits <= 0:
                raise ConfigError(["emit-fig4 needs a finite covert_bits > 0"])
            header, rows = output.fig4_data(cfg.covert_bits, cfg.codec_profile(), cfg.cf, cfg.plc,
                                            args.t_max or 300.0, args.step or 5.0)
        _emit(output.render_csv(header, rows), args.out)
        return 0
    return run


def cmd_check_table1(args) -> int:
    rows = output.check_table1()
    for r in rows:
        status = "PASS" if r.ok else "FAIL"
        print(f"{status} k={r.k:<4g} lambda={r.lam:<7g} mean={r.mean:9.4f} cv={r.cv:.4f} printed={r.printed_cv:.2f}")
    return 0 if all(r.ok for r in rows) else 1


def cmd_validate(args) -> int:
    cfg = _load(args)
    # approx coefficients are resolved here so refit failures surface too
    cfg.scheduler()
    cfg.channel()
    print("config OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lacksim", description="LACK VoIP steganography simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, batch=False):
        p.add_argument("--config", help="TOML experiment config")
        p.add_argument("--preset", help="named preset (ignored when --config is given)")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--seed", type=int)
        if batch:
            p.add_argument("--n-calls", type=int, dest="n_calls")
            p.add_argument("--workers", type=int)

    p = sub.add_parser("simulate", help="run a Monte Carlo batch")
    common(p, batch=True)
    p.add_argument("--trajectory", action="store_true", help="also write per-call IR(t) samples")
    p.set_defaults(func=cmd_simulate)

    for kind in ("fig2", "fig3", "fig4"):
        p = sub.add_parser(f"emit-{kind}", help=f"write {kind} curve data as CSV")
        common(p)
        p.add_argument("--t-max", type=float, dest="t_max")
        p.add_argument("--step", type=float)
        p.set_defaults(func=cmd_fig(kind))

    p = sub.add_parser("check-table1", help="verify the reference Weibull table")
    p.set_defaults(func=cmd_check_table1)

    p = sub.add_parser("validate-config", help="validate a config or preset")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.violations:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except LackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
