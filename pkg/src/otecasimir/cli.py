"""Command-line interface.

Subcommands: ``pressure`` (single point), ``sweep`` (one-parameter scans),
``spectrum`` (frequency density of the two-temperature correction), ``pfa``
(proximity-force estimate next to the full calculation), ``scan-truncation``
(Fourier-order convergence scan) and ``validate`` (self-checks).

Output is CSV with a ``#``-prefixed header block carrying the code version
and the full echoed configuration, so every result file doubles as a
rerunnable run description.  When an output path is given, ``sweep`` and
``spectrum`` also render a figure next to the CSV (same name, ``.png``).
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cache import OperatorCache
from .config import ConfigError, TruncationConfig, load_config
from .fmm import FmmError, FmmNumericalError
from .geometry import GeometryError
from .materials import MaterialError
from .neqforce import NeqError
from .pfa import PfaError, check_pfa_applies, pfa_pressure
from .quadrature import TransitionError, convergence_scan, delta_spectrum, pressure

_CLI_ERRORS = (
    ConfigError,
    GeometryError,
    MaterialError,
    NeqError,
    PfaError,
    FmmError,
    FmmNumericalError,
    TransitionError,
)


def _fmt(value, precision):
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    return f"{x:.{precision}g}"


def _header_lines(cfg, command):
    lines = [f"# otecasimir {__version__}", f"# command: {command}"]
    lines += ["# " + ln if ln else "#" for ln in cfg.echo().rstrip("\n").splitlines()]
    return lines


def _render_csv(cfg, command, columns, rows, precision):
    buf = io.StringIO()
    for ln in _header_lines(cfg, command):
        buf.write(ln + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v, precision) for v in row) + "\n")
    return buf.getvalue()


def _emit(text, out_path):
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _figure_path(out_path):
    return str(Path(out_path).with_suffix(".png"))


def _make_cache(arg):
    if arg is None or arg == "off":
        return None
    if arg == "mem":
        return OperatorCache()
    return OperatorCache(directory=arg)


def _load_run(args):
    cfg = load_config(args.config)
    quad_kwargs = {}
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}")
        quad_kwargs["workers"] = args.workers
    if args.tolerance is not None:
        if not args.tolerance > 0:
            raise ConfigError(f"--tolerance must be > 0, got {args.tolerance}")
        quad_kwargs["tolerance"] = args.tolerance
    if quad_kwargs:
        cfg = cfg.replace(quadrature=dataclasses.replace(cfg.quadrature, **quad_kwargs))
    if args.fixed_truncation:
        try:
            m_str, mbar_str = args.fixed_truncation.split(",")
            M, mbar = int(m_str), int(mbar_str)
        except ValueError:
            raise ConfigError(
                f"--fixed-truncation expects 'M,mbar' (two integers), got {args.fixed_truncation!r}"
            ) from None
        cfg = cfg.replace(
            truncation=TruncationConfig(
                mode="fixed", M=M, mbar=mbar, accuracy=cfg.truncation.accuracy
            )
        )
    return cfg


def _resolve_truncation(cfg, gap, cache, thermal=None, geo1=None, geo2=None):
    """(M, mbar) from the config, scanning when the policy is 'auto'."""
    t = cfg.truncation
    if t.mode == "fixed":
        return t.M, t.mbar
    M, mbar, _ = convergence_scan(
        geo1 if geo1 is not None else cfg.geometry1,
        geo2 if geo2 is not None else cfg.geometry2,
        thermal if thermal is not None else cfg.thermal,
        gap,
        t.accuracy,
        cache=cache,
    )
    return M, mbar


def pressure_rows(cfg, cache=None, include_timing=True):
    """Single-point pressure as (columns, rows); the cmd_pressure payload."""
    t0 = time.perf_counter()
    M, mbar = _resolve_truncation(cfg, cfg.gap, cache)
    res = pressure(
        cfg.geometry1, cfg.geometry2, cfg.thermal, cfg.gap, cfg.quadrature, M, mbar, cache
    )
    wall = time.perf_counter() - t0
    columns = ["d", "total", "eq_part", "delta_part", "error", "M", "mbar"]
    row = [cfg.gap, res.total, res.eq, res.delta, res.error, M, mbar]
    if include_timing:
        columns.append("wall_time_s")
        row.append(wall)
    return columns, [row]


def cmd_pressure(args):
    cfg = _load_run(args)
    cache = _make_cache(args.cache)
    columns, rows = pressure_rows(cfg, cache)
    out = args.out or cfg.output.path
    _emit(_render_csv(cfg, "pressure", columns, rows, cfg.output.precision), out)
    return 0


def _sweep_sample(cfg, axis, value):
    """The (geo1, geo2, thermal, gap) quadruple for one sweep sample."""
    geo1, geo2, thermal, gap = cfg.geometry1, cfg.geometry2, cfg.thermal, cfg.gap
    if axis == "d":
        gap = float(value)
    elif axis == "t1":
        thermal = dataclasses.replace(thermal, t1=float(value))
    elif axis == "t2":
        thermal = dataclasses.replace(thermal, t2=float(value))
    elif axis == "tenv":
        thermal = dataclasses.replace(thermal, tenv=float(value))
    elif axis == "tb":
        thermal = dataclasses.replace(thermal, t1=float(value), t2=float(value))
    elif axis == "f":
        geo1 = geo1.scaled(filling=float(value))
        geo2 = geo2.scaled(filling=float(value))
    elif axis == "D":
        geo1 = geo1.scaled(period=float(value))
        geo2 = geo2.scaled(period=float(value))
    elif axis == "h":
        geo1 = geo1.scaled(depth=float(value))
        geo2 = geo2.scaled(depth=float(value))
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return geo1, geo2, thermal, gap


def _bracket_crossings(values, totals):
    """Linear-interpolation estimates of sign-change distances, keyed by row.

    Row i gets an estimate when the total changes sign between samples i-1
    and i; other rows get None.
    """
    out = [None] * len(values)
    for i in range(1, len(values)):
        a, b = totals[i - 1], totals[i]
        if a == 0.0 or b == 0.0 or (a < 0) == (b < 0):
            continue
        x0, x1 = values[i - 1], values[i]
        out[i] = x0 + (x1 - x0) * (-a) / (b - a)
    return out


def sweep_rows(cfg, cache=None):
    """All sweep samples as (columns, rows, figure payload)."""
    if cfg.sweep is None:
        raise ConfigError("the sweep command needs a 'sweep' section in the config")
    axis = cfg.sweep.axis
    values = [float(v) for v in cfg.sweep.values()]

    # Pin the k grids (and the scan) to the most demanding sample so cached
    # operators are shared across the whole sweep.
    if axis == "d":
        grid_gap = min(values)
        scan_gap = grid_gap
    else:
        grid_gap = None
        scan_gap = cfg.gap
    geo1_0, geo2_0, thermal_0, _ = _sweep_sample(cfg, axis, values[0])
    M, mbar = _resolve_truncation(cfg, scan_gap, cache, thermal_0, geo1_0, geo2_0)

    try:
        check_pfa_applies(geo1_0, geo2_0)
        with_pfa = True
    except PfaError:
        with_pfa = False

    rows = []
    totals = []
    pfas = []
    for value in values:
        geo1, geo2, thermal, gap = _sweep_sample(cfg, axis, value)
        res = pressure(geo1, geo2, thermal, gap, cfg.quadrature, M, mbar, cache, grid_gap)
        row = [value, res.total, res.eq, res.delta, res.error, M, mbar]
        if with_pfa:
            try:
                row.append(pfa_pressure(geo1, geo2, thermal, gap, cfg.quadrature).total)
            except PfaError:
                row.append(float("nan"))
            pfas.append(row[-1])
        rows.append(row)
        totals.append(res.total)

    columns = [axis, "total", "eq_part", "delta_part", "error", "M", "mbar"]
    if with_pfa:
        columns.append("pfa")
    if axis == "d":
        columns.append("d0_bracket")
        for row, d0 in zip(rows, _bracket_crossings(values, totals)):
            row.append(d0)
    figure = (axis, values, totals, pfas if with_pfa else None, cfg.sweep.spacing == "log")
    return columns, rows, figure


def cmd_sweep(args):
    cfg = _load_run(args)
    cache = _make_cache(args.cache)
    columns, rows, figure = sweep_rows(cfg, cache)
    out = args.out or cfg.output.path
    _emit(_render_csv(cfg, "sweep", columns, rows, cfg.output.precision), out)
    if out and cfg.output.figures:
        from .plotting import sweep_figure

        axis, values, totals, pfas, log_x = figure
        sweep_figure(_figure_path(out), axis, values, totals, pfas, log_x)
    return 0


def spectrum_rows(cfg, cache=None):
    M, mbar = _resolve_truncation(cfg, cfg.gap, cache)
    omegas = cfg.spectrum.values()
    table = delta_spectrum(
        cfg.geometry1, cfg.geometry2, cfg.thermal, cfg.gap, omegas, M, mbar, cfg.quadrature, cache
    )
    rows = [[w, dens] for w, dens in table]
    return ["omega", "delta_density"], rows


def cmd_spectrum(args):
    cfg = _load_run(args)
    cache = _make_cache(args.cache)
    columns, rows = spectrum_rows(cfg, cache)
    out = args.out or cfg.output.path
    _emit(_render_csv(cfg, "spectrum", columns, rows, cfg.output.precision), out)
    if out and cfg.output.figures:
        from .plotting import spectrum_figure

        spectrum_figure(_figure_path(out), [r[0] for r in rows], [r[1] for r in rows])
    return 0


def cmd_pfa(args):
    cfg = _load_run(args)
    cache = _make_cache(args.cache)
    M, mbar = _resolve_truncation(cfg, cfg.gap, cache)
    full = pressure(
        cfg.geometry1, cfg.geometry2, cfg.thermal, cfg.gap, cfg.quadrature, M, mbar, cache
    )
    estimate = pfa_pressure(cfg.geometry1, cfg.geometry2, cfg.thermal, cfg.gap, cfg.quadrature)
    ratio = full.total / estimate.total if estimate.total != 0.0 else float("nan")
    columns = [
        "d", "total", "eq_part", "delta_part", "error",
        "pfa_total", "pfa_eq", "pfa_delta", "ratio", "M", "mbar",
    ]
    rows = [[
        cfg.gap, full.total, full.eq, full.delta, full.error,
        estimate.total, estimate.eq, estimate.delta, ratio, M, mbar,
    ]]
    out = args.out or cfg.output.path
    _emit(_render_csv(cfg, "pfa", columns, rows, cfg.output.precision), out)
    return 0


def cmd_scan_truncation(args):
    cfg = _load_run(args)
    cache = _make_cache(args.cache)
    accuracy = args.tolerance if args.tolerance is not None else cfg.truncation.accuracy
    M, mbar, table = convergence_scan(
        cfg.geometry1, cfg.geometry2, cfg.thermal, cfg.gap, accuracy, cache=cache
    )
    columns = ["kind", "omega", "kx", "ky", "M", "mbar"]
    rows = [[e["kind"], e["omega"], e["kx"], e["ky"], e["M"], e["mbar"]] for e in table]
    rows.append(["selected", None, None, None, M, mbar])
    out = args.out or cfg.output.path
    _emit(_render_csv(cfg, "scan-truncation", columns, rows, cfg.output.precision), out)
    return 0


def cmd_validate(args):
    from .validate import run_checks

    failures = run_checks(stream=sys.stdout)
    return 1 if failures else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="otecasimir",
        description="Casimir-Lifshitz pressure between lamellar gratings at two temperatures.",
    )
    parser.add_argument("--version", action="version", version=f"otecasimir {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, needs_config=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=needs_config, help="YAML run description")
        p.add_argument("--out", help="output CSV path (default: output.path from the config, else stdout)")
        p.add_argument("--workers", type=int, help="override quadrature worker count")
        p.add_argument(
            "--cache",
            default="off",
            metavar="DIR|off",
            help="operator cache: a directory for a disk-backed cache, 'mem' for in-memory, 'off' to disable",
        )
        p.add_argument("--tolerance", type=float, help="override the quadrature tolerance")
        p.add_argument(
            "--fixed-truncation",
            metavar="M,MBAR",
            help="pin the Fourier orders instead of scanning",
        )
        p.set_defaults(func=func)
        return p

    add("pressure", cmd_pressure, "pressure at the configured separation")
    add("sweep", cmd_sweep, "sweep one parameter (d, t1, t2, tenv, tb, f, D, h)")
    add("spectrum", cmd_spectrum, "frequency density of the two-temperature correction")
    add("pfa", cmd_pfa, "proximity-force estimate next to the full result")
    add("scan-truncation", cmd_scan_truncation, "Fourier-order convergence scan")
    add("validate", cmd_validate, "run the self-check suite", needs_config=False)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CLI_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
