"""Command line entry point: run, threshold, validate, and sweep.

Exit codes are the machine contract: 0 success, 1 usage or config error,
2 inadmissible initial data under --strict, 3 runtime singularity.  Stdout
is for humans; the written files are for machines.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    build_grid,
    build_initial_field,
    build_model,
    build_stepper,
    load_run_config,
    load_sweep_config,
    parse_run_config,
    run_config_to_dict,
)
from .diagnostics import (
    RunReport,
    SOBOLEV_ORDERS,
    TimeSeries,
    TimeSeriesRecorder,
    WIENER_ORDERS,
    certify_decay,
    check_lyapunov_monotone,
    check_positivity,
    hr_decay_fit,
)
from .models import MODEL_KINDS, SingularityError
from .spectral import SpectralField, wiener_norm
from .stepper import integrate
from .theory import decay_envelope, delta, smallness_report, threshold_bracket, threshold_root
from .validation import run_checks

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INADMISSIBLE = 2
EXIT_SINGULAR = 3

# Sobolev orders whose fitted decay rates go into the report.
HR_REPORT_ORDERS = (0.0, 1.0, 1.9)

# Threshold table granularity and the slack appended past the sign change.
THRESHOLD_TABLE_STEP = 0.01

_FLOAT_FMT = "%.17g"


def _norm_label(prefix: str, order: float) -> str:
    return prefix + f"{order:g}".replace(".", "_")


def timeseries_columns(series: TimeSeries) -> tuple[list[str], list[np.ndarray]]:
    """Declared column order shared by the CSV writer and the JSON report."""
    names = ["t"]
    cols = [series.times]
    for a in WIENER_ORDERS:
        names.append(_norm_label("wiener_", a))
        cols.append(series.wiener[a])
    names.append("l2")
    cols.append(series.l2)
    for a in SOBOLEV_ORDERS:
        names.append(_norm_label("h", a))
        cols.append(series.sobolev[a])
    names.extend(["linf", "lyapunov", "min_one_plus_v", "max_one_plus_v"])
    cols.extend(
        [series.linf, series.lyapunov, series.min_one_plus_v, series.max_one_plus_v]
    )
    return names, cols


def write_timeseries_csv(path: Path, series: TimeSeries) -> None:
    names, cols = timeseries_columns(series)
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_FLOAT_FMT % x for x in row) + "\n")


def write_decay_plot_csv(path: Path, report: RunReport) -> None:
    """t, |v|_0 and the certified envelope, ready for direct plotting."""
    t = report.series.times
    w0 = report.series.wiener[0.0]
    if report.admissible:
        env = decay_envelope(report.x0, report.delta, t)
    else:
        env = np.full_like(t, math.nan)
    with open(path, "w") as fh:
        fh.write("t,wiener_0,envelope\n")
        for row in zip(t, w0, env):
            fh.write(",".join(_FLOAT_FMT % x for x in row) + "\n")


def _json_safe(obj):
    """Recursively replace non-finite floats, which JSON cannot encode."""
    if isinstance(obj, float):
        if math.isfinite(obj):
            return obj
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def report_payload(report: RunReport) -> dict:
    """JSON-ready dictionary for a RunReport, schema version 1."""
    names, cols = timeseries_columns(report.series)
    cert = report.certificate
    cert_payload = None
    if cert is not None:
        cert_payload = {
            "x0": cert.x0,
            "delta": cert.delta,
            "slack": cert.slack,
            "samples_total": int(len(cert.sample_ok)),
            "samples_within_envelope": int(np.count_nonzero(cert.sample_ok)),
            "all_within_envelope": bool(np.all(cert.sample_ok)),
            "fitted_rate": cert.fitted_rate,
        }
    payload = {
        "schema_version": 1,
        "config": report.config_echo,
        "x0": report.x0,
        "delta": report.delta,
        "admissible": report.admissible,
        "certificate": cert_payload,
        "lyapunov_monotone": report.lyapunov_monotone,
        "positivity_ok": report.positivity_ok,
        "hr_decay_fits": {f"{a:g}": r for a, r in report.hr_decay_fits.items()},
        "series": {
            "columns": names,
            "rows": [[float(x) for x in row] for row in zip(*cols)],
        },
    }
    return _json_safe(payload)


def write_report_json(path: Path, report: RunReport) -> None:
    with open(path, "w") as fh:
        json.dump(report_payload(report), fh, indent=2)
        fh.write("\n")


def execute_run(cfg: RunConfig, v0: SpectralField) -> RunReport:
    """Integrate v0 under the configured model and collect the full report."""
    grid = v0.grid
    mcfg = build_model(cfg, grid)
    scfg = build_stepper(cfg)
    x0 = wiener_norm(v0, 0.0)
    admissibility = smallness_report(cfg.model.kind, x0)
    recorder = TimeSeriesRecorder(cfg.model.kind)
    integrate(mcfg, scfg, v0, observer=recorder)
    series = recorder.finalize()
    certificate = None
    if admissibility.admissible:
        certificate = certify_decay(series, x0, admissibility.delta)
    return RunReport(
        config_echo=run_config_to_dict(cfg),
        x0=x0,
        delta=admissibility.delta,
        admissible=admissibility.admissible,
        series=series,
        certificate=certificate,
        lyapunov_monotone=check_lyapunov_monotone(series),
        positivity_ok=check_positivity(series, x0),
        hr_decay_fits={a: hr_decay_fit(series, a) for a in HR_REPORT_ORDERS},
    )


def run_verdict(report: RunReport) -> bool:
    """True when decay is certified and every structural check holds."""
    return bool(
        report.admissible
        and report.certificate is not None
        and np.all(report.certificate.sample_ok)
        and report.lyapunov_monotone
        and report.positivity_ok
    )


def write_output_bundle(report: RunReport, out_dir: Path, formats) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        p = out_dir / "timeseries.csv"
        write_timeseries_csv(p, report.series)
        written.append(p)
    if "json" in formats:
        p = out_dir / "report.json"
        write_report_json(p, report)
        written.append(p)
    if "plot" in formats:
        p = out_dir / "decay_plot.csv"
        write_decay_plot_csv(p, report)
        written.append(p)
    return written


def cmd_run(args) -> int:
    try:
        cfg = load_run_config(args.config)
        grid = build_grid(cfg)
        v0 = build_initial_field(cfg, grid, Path(args.config).resolve().parent)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    x0 = wiener_norm(v0, 0.0)
    admissibility = smallness_report(cfg.model.kind, x0)
    if not admissibility.admissible:
        print(
            f"warning: initial amplitude {x0:.6g} is past the decay threshold "
            f"(delta = {admissibility.delta:.6g} <= 0); no envelope will be certified",
            file=sys.stderr,
        )
        if args.strict:
            print("aborting: --strict refuses inadmissible initial data", file=sys.stderr)
            return EXIT_INADMISSIBLE
    try:
        report = execute_run(cfg, v0)
    except SingularityError as err:
        t = getattr(err, "time", None)
        where = f" at t = {t:.6g}" if t is not None else ""
        print(f"singularity{where}: {err}", file=sys.stderr)
        return EXIT_SINGULAR
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE

    out_dir = Path(args.out) if args.out else Path(cfg.outputs.directory)
    written = write_output_bundle(report, out_dir, cfg.outputs.formats)

    print(f"model: {cfg.model.kind} ({cfg.model.mode})")
    print(f"x0 = {report.x0:.12g}, delta = {report.delta:.12g}, admissible: {report.admissible}")
    n = len(report.series)
    print(
        f"samples: {n}, final t = {report.series.times[-1]:.6g}, "
        f"final |v|_0 = {report.series.wiener[0.0][-1]:.6g}"
    )
    if report.certificate is not None:
        cert = report.certificate
        ok = int(np.count_nonzero(cert.sample_ok))
        print(
            f"envelope: {ok}/{n} samples within x0 exp(-delta t), "
            f"fitted rate {cert.fitted_rate:.6g}"
        )
    else:
        print("envelope: not certified (inadmissible initial data)")
    print(
        f"lyapunov monotone: {report.lyapunov_monotone}, "
        f"positivity: {report.positivity_ok}, verdict: {run_verdict(report)}"
    )
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def threshold_payload(kind: str) -> dict:
    lo, hi = threshold_bracket(kind)
    root = 0.5 * (lo + hi)
    table = []
    x = 0.0
    while True:
        d = delta(kind, x) if not (kind == "adl" and x >= 1) else float("-inf")
        table.append({"x": round(x, 10), "delta": d})
        if d < 0:
            break
        x += THRESHOLD_TABLE_STEP
    return {
        "model": kind,
        "root": root,
        "bracket": [lo, hi],
        "bracket_width": hi - lo,
        "table": table,
    }


def cmd_threshold(args) -> int:
    payload = threshold_payload(args.model)
    if args.json:
        json.dump(_json_safe(payload), sys.stdout, indent=2)
        print()
        return EXIT_OK
    print(f"model: {payload['model']}")
    print(f"threshold root: {payload['root']:.12g}")
    lo, hi = payload["bracket"]
    print(f"bracket: [{lo:.17g}, {hi:.17g}] (width {payload['bracket_width']:.3g})")
    print(f"{'x':>6}  {'delta':>22}")
    for row in payload["table"]:
        print(f"{row['x']:>6.2f}  {row['delta']:>22.15g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_checks(name_filter=args.filter)
    if not results:
        print(f"no checks match filter {args.filter!r}", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        payload = {
            "checks": [
                {"name": r.name, "passed": r.passed, "detail": r.detail}
                for r in results
            ],
            "all_passed": all(r.passed for r in results),
        }
        json.dump(_json_safe(payload), sys.stdout, indent=2)
        print()
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<24} {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_USAGE


def _scaled_initial_field(cfg: RunConfig, amplitude: float, config_dir: Path | None) -> SpectralField:
    """Base initial data rescaled so |v0|_0 equals the requested amplitude."""
    grid = build_grid(cfg)
    v0 = build_initial_field(cfg, grid, config_dir)
    x0 = wiener_norm(v0, 0.0)
    if x0 == 0:
        raise ConfigError("base initial data is identically zero; cannot rescale")
    return SpectralField(grid, v0.coeffs * (amplitude / x0))


def _sweep_worker(payload) -> dict:
    """One sweep run; module-level so process pools can pickle it."""
    raw_cfg, amplitude, out_base, config_dir = payload
    cfg = parse_run_config(raw_cfg)
    cdir = Path(config_dir) if config_dir else None
    v0 = _scaled_initial_field(cfg, amplitude, cdir)
    out_dir = Path(out_base) / f"amplitude_{amplitude:g}"
    try:
        report = execute_run(cfg, v0)
    except SingularityError as err:
        t = getattr(err, "time", None)
        return {
            "amplitude": amplitude,
            "x0": wiener_norm(v0, 0.0),
            "delta": smallness_report(cfg.model.kind, wiener_norm(v0, 0.0)).delta,
            "fitted_rate": math.nan,
            "verdict": False,
            "error": f"singular at t = {t:.6g}" if t is not None else "singular",
        }
    write_output_bundle(report, out_dir, cfg.outputs.formats)
    fitted = math.nan
    if report.certificate is not None:
        fitted = report.certificate.fitted_rate
    return {
        "amplitude": amplitude,
        "x0": report.x0,
        "delta": report.delta,
        "fitted_rate": fitted,
        "verdict": run_verdict(report),
        "error": "",
    }


def write_sweep_aggregate(path: Path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("x0,delta,fitted_rate,verdict\n")
        for row in rows:
            fh.write(
                f"{_FLOAT_FMT % row['x0']},{_FLOAT_FMT % row['delta']},"
                f"{_FLOAT_FMT % row['fitted_rate']},{str(row['verdict']).lower()}\n"
            )


def cmd_sweep(args) -> int:
    try:
        sweep = load_sweep_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    workers = args.workers if args.workers else sweep.workers
    out_base = Path(args.out) if args.out else Path(sweep.base.outputs.directory)
    config_dir = str(Path(args.config).resolve().parent)
    raw_cfg = run_config_to_dict(sweep.base)
    payloads = [(raw_cfg, a, str(out_base), config_dir) for a in sweep.amplitudes]
    try:
        if workers == 1 or len(payloads) == 1:
            rows = [_sweep_worker(p) for p in payloads]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_sweep_worker, payloads))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    rows.sort(key=lambda r: r["x0"])
    out_base.mkdir(parents=True, exist_ok=True)
    aggregate = out_base / "sweep_aggregate.csv"
    write_sweep_aggregate(aggregate, rows)
    print(f"{'x0':>12} {'delta':>14} {'fitted_rate':>14} {'verdict':>8}")
    for row in rows:
        note = f"  ({row['error']})" if row["error"] else ""
        print(
            f"{row['x0']:>12.6g} {row['delta']:>14.6g} "
            f"{row['fitted_rate']:>14.6g} {str(row['verdict']).lower():>8}{note}"
        )
    print(f"wrote {aggregate}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crystalsurf",
        description=(
            "Spectral solver and verification suite for two fourth-order "
            "surface-diffusion equations on the periodic torus."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one configured trajectory")
    p_run.add_argument("config", help="path to a run config file")
    p_run.add_argument(
        "--strict",
        action="store_true",
        help="refuse initial data past the decay threshold instead of warning",
    )
    p_run.add_argument("--out", help="output directory (overrides the config)")
    p_run.set_defaults(func=cmd_run)

    p_thr = sub.add_parser("threshold", help="print a model's smallness threshold")
    p_thr.add_argument("model", choices=MODEL_KINDS)
    p_thr.add_argument("--json", action="store_true", help="machine-readable output")
    p_thr.set_defaults(func=cmd_threshold)

    p_val = sub.add_parser("validate", help="run the numerical property suite")
    p_val.add_argument(
        "--filter", help="only run checks whose name contains this substring"
    )
    p_val.add_argument("--json", action="store_true", help="machine-readable output")
    p_val.set_defaults(func=cmd_validate)

    p_sw = sub.add_parser("sweep", help="run an amplitude sweep concurrently")
    p_sw.add_argument("config", help="path to a sweep config file")
    p_sw.add_argument("--workers", type=int, help="worker processes (overrides config)")
    p_sw.add_argument("--out", help="output directory (overrides the config)")
    p_sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
