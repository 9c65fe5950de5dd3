"""Command-line interface.

Subcommands::

    dpcsim run      one closed-loop simulation; summary + optional trace CSV
    dpcsim compare  non-adaptive vs both adaptive update variants on one
                    scenario; trace CSVs, metric tables, plot script
    dpcsim sweep    re-run one scenario across a list of parameter values
    dpcsim metrics  recompute step/stability metrics from a trace CSV

Exit codes: 0 success, 1 simulation divergence, 2 configuration or usage
error.  Runs are deterministic — identical config and backend give byte-
identical output; the ``--seedless`` flag is reserved and rejected, since
there is no randomness to disable.  Backend selection (compiled kernels vs
pure Python) is import-time via the ``DPCSIM_NUMBA`` environment variable
(``1``/``0``/``auto``).
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _kernel
from ._accel import active_backend
from .config import (SWEEP_PARAMETERS, apply_sweep_value, load_bundled,
                     load_config)
from .engine import SimConfig, Trace, run_simulation
from .metrics import (MetricUnavailable, comparison_table, estimate_convergence,
                      format_comparison_table, lyapunov_check,
                      trace_step_metrics)
from .model import ConfigError, DivergenceError, DomainError
from .trace_io import read_trace_csv, write_trace_csv

_SEEDLESS_HELP = ("reserved; rejected with an explanation (runs are "
                  "deterministic, there is no randomness to disable)")


def _load(args, default_bundle: str) -> SimConfig:
    config = load_config(args.config) if args.config else load_bundled(default_bundle)
    if getattr(args, "controller", None):
        config = replace(config, controller=args.controller)
    if getattr(args, "variant", None):
        config = replace(config, gains=replace(config.gains,
                                               adaptation_variant=args.variant))
    return config


def _reject_seedless(parser: argparse.ArgumentParser, args) -> None:
    if getattr(args, "seedless", False):
        parser.error("--seedless is reserved: this toolkit is fully "
                     "deterministic and has no randomness to disable")


def _worst_lyapunov(trace: Trace) -> str:
    """Worst Lyapunov forward difference as summary text (n/a when undefined)."""
    try:
        rep = lyapunov_check(trace)
    except MetricUnavailable:
        return "worst lyapunov fd = n/a"
    return (f"worst lyapunov fd = {rep.max_fd:+.3e} "
            f"({rep.function}, {rep.decrease_violations} violations)")


def _print_step_metrics(trace: Trace, band_pct: float) -> None:
    print(f"step metrics ({band_pct:g}% band):")
    for m in trace_step_metrics(trace, band_pct):
        ev = m.event
        settle = (f"settles in {m.settling_time * 1e3:.3f} ms"
                  if m.settled else "NOT settled in window")
        print(f"  t={ev.time:g}s {ev.channel:>6} -> {ev.to_value:g} on {ev.signal}: "
              f"{settle}, overshoot {m.overshoot_pct:.4f}%, "
              f"undershoot {m.undershoot_pct:.4f}%, "
              f"steady-state error {m.steady_state_error:+.6g}")


def cmd_run(parser, args) -> int:
    _reject_seedless(parser, args)
    config = _load(args, "canonical.ini")
    trace = run_simulation(config)
    final = trace[len(trace) - 1]
    print(f"backend: {trace.backend}")
    print(f"controller: {config.controller}"
          + (f" ({config.gains.adaptation_variant} update)"
             if config.controller == "adaptive" else ""))
    print(f"records: {len(trace)}  (h = {config.scenario.step_size:g} s, "
          f"duration = {config.scenario.duration:g} s)")
    print(f"summary: final V_o = {final.V_o:.6f} V (ref {final.v_ref:g}), "
          f"final Q = {final.Q:.6f} var (ref {final.q_ref:g}), "
          + _worst_lyapunov(trace))
    if config.controller == "adaptive":
        r_est = f"{final.R_est:.4f} ohm" if math.isfinite(final.R_est) else "non-physical"
        print(f"final load estimate: {r_est} (true {final.load:g} ohm)")
    _print_step_metrics(trace, args.band_pct)
    if args.out:
        write_trace_csv(trace, args.out)
        print(f"trace written: {args.out}")
    return 0


_PLOT_SCRIPT = '''#!/usr/bin/env python3
"""Plot the controller-comparison traces in this directory.

Standalone: needs only matplotlib. Reads the CSVs written by
`dpcsim compare` and saves comparison.png alongside them.
"""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
FILES = {"non-adaptive": "bsc.csv",
         "adaptive (code update)": "adaptive_code.csv",
         "adaptive (derived update)": "adaptive_derived.csv"}


def load(name):
    with open(HERE / name, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {k: [float(r[k]) for r in rows] for k in rows[0]}
    return cols


traces = {label: load(f) for label, f in FILES.items() if (HERE / f).exists()}
fig, axes = plt.subplots(3, 1, figsize=(9, 10), sharex=True)
for label, tr in traces.items():
    axes[0].plot(tr["t"], tr["V_o"], label=label)
    axes[1].plot(tr["t"], tr["Q"], label=label)
    axes[2].plot(tr["t"], tr["R_est"], label=label)
ref = next(iter(traces.values()))
axes[0].plot(ref["t"], ref["v_ref"], "k--", lw=0.8, label="reference")
axes[1].plot(ref["t"], ref["q_ref"], "k--", lw=0.8, label="reference")
axes[2].plot(ref["t"], ref["load"], "k--", lw=0.8, label="true load")
axes[0].set_ylabel("V_o [V]")
axes[1].set_ylabel("Q [var]")
axes[2].set_ylabel("R estimate [ohm]")
axes[2].set_xlabel("t [s]")
for ax in axes:
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
fig.tight_layout()
fig.savefig(HERE / "comparison.png", dpi=150)
print(f"wrote {HERE / 'comparison.png'}")
'''


def cmd_compare(parser, args) -> int:
    _reject_seedless(parser, args)
    config = _load(args, "comparison.ini")
    out_dir = Path(args.out_dir)
    try:                              # prove writability before any simulation
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out_dir} is not writable: {exc}") from exc

    bsc_config = config.with_controller("bsc")
    bsc_trace = run_simulation(bsc_config)   # divergence here is fatal
    write_trace_csv(bsc_trace, out_dir / "bsc.csv")
    print(f"backend: {bsc_trace.backend}")
    print(f"non-adaptive trace: {out_dir / 'bsc.csv'}")

    for variant in ("code", "derived"):
        adaptive_config = config.with_controller("adaptive",
                                                 adaptation_variant=variant)
        print(f"\nadaptive controller, {variant} update:")
        try:
            adaptive_trace = run_simulation(adaptive_config)
        except DivergenceError as exc:
            print(f"  DIVERGED: {exc}")
            continue
        path = out_dir / f"adaptive_{variant}.csv"
        write_trace_csv(adaptive_trace, path)
        print(f"  trace: {path}")
        conv = estimate_convergence(adaptive_trace)
        if conv.converged:
            conv_line = (f"load estimate within {conv.band_frac:.0%} of "
                         f"{conv.target:g} ohm from t = {conv.time:g} s")
        else:
            conv_line = (f"load estimate never stays within {conv.band_frac:.0%} "
                         f"of {conv.target:g} ohm (final error "
                         f"{conv.final_relative_error:.1%})")
        table = format_comparison_table(
            comparison_table(bsc_trace, adaptive_trace, args.band_pct))
        print(f"  {conv_line}")
        print(table)
        table_path = out_dir / f"metrics_{variant}.txt"
        table_path.write_text(f"{conv_line}\n{table}\n", encoding="utf-8")
        print(f"  metric table: {table_path}")

    script = out_dir / "plot_comparison.py"
    script.write_text(_PLOT_SCRIPT, encoding="utf-8")
    print(f"\nplot script: {script} (run with python; needs matplotlib)")
    return 0


def cmd_sweep(parser, args) -> int:
    _reject_seedless(parser, args)
    config = _load(args, "canonical.ini")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        parser.error(f"--values must be a comma-separated number list, got {args.values!r}")
    if not values:
        parser.error("--values is empty")

    nan_fields = ("startup_settle_ms", "startup_overshoot_pct", "lyap_max_fd",
                  "converge_time_s", "final_vo", "final_q")

    def one(value: float) -> dict:
        row = {"param": args.param, "value": value}
        try:
            cfg = apply_sweep_value(config, args.param, value)
            trace = run_simulation(cfg)
        except DivergenceError as exc:
            row["status"] = f"diverged@step{exc.step}"
            row.update({f: math.nan for f in nan_fields})
            return row
        m0 = trace_step_metrics(trace, args.band_pct)[0]
        final = trace[len(trace) - 1]
        try:
            lyap_max_fd = lyapunov_check(trace).max_fd
        except MetricUnavailable:
            lyap_max_fd = math.nan
        row.update(status="ok",
                   startup_settle_ms=(m0.settling_time * 1e3 if m0.settled else math.nan),
                   startup_overshoot_pct=m0.overshoot_pct,
                   lyap_max_fd=lyap_max_fd,
                   final_vo=final.V_o, final_q=final.Q)
        if cfg.controller == "adaptive":
            conv = estimate_convergence(trace)
            row["converge_time_s"] = conv.time if conv.converged else math.nan
        else:
            row["converge_time_s"] = math.nan
        return row

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(one, values))   # input order preserved
    else:
        rows = [one(v) for v in values]

    fields = ("param", "value", "status") + nan_fields
    lines = [",".join(fields)]
    for row in rows:
        lines.append(",".join(
            f"{row[f]:.17g}" if isinstance(row[f], float) else str(row[f])
            for f in fields))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"sweep results written: {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_metrics(parser, args) -> int:
    _reject_seedless(parser, args)
    config = _load(args, "canonical.ini")
    try:
        columns, data = read_trace_csv(args.trace)
    except OSError as exc:
        raise ConfigError(f"cannot read trace {args.trace}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed trace {args.trace}: {exc}") from exc
    if columns != _kernel.COLUMNS:
        raise ConfigError(
            f"{args.trace}: unexpected columns; expected {','.join(_kernel.COLUMNS)}")
    expected_rows = config.scenario.n_steps + 1
    if data.shape[0] != expected_rows:
        raise ConfigError(
            f"{args.trace}: {data.shape[0]} records do not match the scenario's "
            f"{expected_rows} samples — pass the config the trace was produced with")
    diag = np.full(8, -1, dtype=np.int64)
    diag[[_kernel.DIAG_W1_VIOLATIONS, _kernel.DIAG_G_VIOLATIONS,
          _kernel.DIAG_ESTIMATE_NONPHYSICAL]] = 0
    trace = Trace(data, config, diag, backend="file")

    _print_step_metrics(trace, args.band_pct)
    try:
        rep = lyapunov_check(trace)
        print(f"lyapunov ({rep.function}): non-increasing = {rep.nonincreasing} "
              f"({rep.decrease_violations} violations over {rep.samples} windows), "
              f"worst fd = {rep.max_fd:+.3e}, "
              f"analytic-rate match error = {rep.match_relative_error:.3e} "
              f"over {rep.match_samples} resolvable windows")
    except MetricUnavailable as exc:
        print(f"lyapunov: unavailable ({exc})")
    try:
        conv = estimate_convergence(trace)
        status = (f"from t = {conv.time:g} s" if conv.converged
                  else f"never (final error {conv.final_relative_error:.1%})")
        print(f"load-estimate convergence to {conv.target:g} ohm "
              f"({conv.band_frac:.0%} band): {status}")
    except MetricUnavailable:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpcsim",
        description="Deterministic closed-loop simulation of a three-phase "
                    "PWM rectifier under direct-power backstepping control.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, bundled: str,
               controller_flags: bool = True) -> None:
        p.add_argument("--config", help=f"INI config file (default: bundled {bundled})")
        p.add_argument("--band-pct", type=float, default=1.0,
                       help="settling band as %% of target (default 1)")
        if controller_flags:
            p.add_argument("--controller", choices=("bsc", "adaptive"),
                           help="override the config's controller kind")
            p.add_argument("--variant", choices=("derived", "code"),
                           help="override the adaptive update variant")
        p.add_argument("--seedless", action="store_true", help=_SEEDLESS_HELP)

    p_run = sub.add_parser("run", help="run one simulation")
    common(p_run, "canonical.ini")
    p_run.add_argument("--out", help="write the trace CSV here")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare",
                           help="non-adaptive vs adaptive on one scenario")
    common(p_cmp, "comparison.ini", controller_flags=False)
    p_cmp.add_argument("--out-dir", default="dpcsim-compare",
                       help="directory for trace CSVs and the plot script")
    p_cmp.set_defaults(func=cmd_compare)

    p_swp = sub.add_parser("sweep", help="re-run across a parameter list")
    common(p_swp, "canonical.ini")
    p_swp.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMETERS),
                       help="which parameter to sweep")
    p_swp.add_argument("--values", required=True,
                       help="comma-separated numeric values")
    p_swp.add_argument("--jobs", type=int, default=1,
                       help="thread-pool width (rows stay in input order)")
    p_swp.add_argument("--out", help="write the result CSV here (default stdout)")
    p_swp.set_defaults(func=cmd_sweep)

    p_met = sub.add_parser("metrics", help="recompute metrics from a trace CSV")
    common(p_met, "canonical.ini")
    p_met.add_argument("--trace", required=True, help="trace CSV to analyse")
    p_met.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
