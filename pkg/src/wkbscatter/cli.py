"""Command-line front end: ``wkb-scatter <command> --config <path> [--out <dir>]``.

Commands
--------
solve      wavefunction dump per (eps, h): x, Re psi, Im psi, Re eps psi', Im eps psi', j
converge   one row per (eps, h) with the ErrorReport fields and fitted slopes
condition  2-norm condition number of the evanescent FEM matrix per (eps, h)
preset     the canonical protocol of a named preset (fig1: solve;
           example1: converge; example2: converge and condition)

Exit codes: 0 ok, 1 I/O error, 2 config error, 3 hypothesis violation,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import fem
from .config import COMMANDS, ExperimentConfig, load_config
from .coupling import current, solve
from .errors import (
    AdmissibilityError,
    ConfigError,
    HypothesisViolation,
    WkbError,
)
from .field import EVANESCENT, ZoneLayout, compute_eps1, validate
from .oracle import ErrorReport, compare, fine_grid_reference, slope_fit

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_NUMERICAL = 4

SOLVE_COLUMNS = ("x", "re_psi", "im_psi", "re_eps_dpsi", "im_eps_dpsi", "j")
CONDITION_COLUMNS = ("eps", "h", "cond")
PRESET_COMMANDS = {"fig1": ("solve",), "example1": ("converge",), "example2": ("converge", "condition")}


def fmt(value):
    """17-significant-digit text for floats, plain text otherwise."""
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def emit_csv(path, header_lines, columns, rows):
    """Write ``# ``-prefixed header lines, a column row and the data rows."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Inverse of emit_csv: (comment lines, columns, rows of floats)."""
    comments, body = [], []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            (comments if line.startswith("#") else body).append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [[float(v) for v in r] for r in reader]
    return [c[2:].rstrip("\n") for c in comments], columns, rows


def _layout(cfg: ExperimentConfig, field):
    layout = ZoneLayout.from_field(field)
    if cfg.layout != "auto" and layout.kind != cfg.layout:
        raise ConfigError(f"layout = {cfg.layout} but the potential gives {layout.kind or 'an unsupported layout'}", path=cfg.path)
    return layout


def _header(cfg: ExperimentConfig, field, layout):
    lines = cfg.resolved_lines()
    lines.append(f"resolved_layout = {layout.kind}")
    lines.append(f"eps1 = {fmt(compute_eps1(field, layout))}")
    return lines


def _check(cfg, field, layout):
    for eps in cfg.eps:
        rep = validate(field, layout, eps)
        if not rep.passed:
            raise HypothesisViolation(rep)
    if cfg.h_exponents[-1] >= cfg.ref_exponent:
        raise ConfigError("finest h must be coarser than the reference width 2^-ref_exponent", path=cfg.path)


def _map(cfg, fn, tasks):
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _solve_task(args):
    cfg, eps, k = args
    field = cfg.build_field()
    sol = solve(field, eps, 2.0**-k, layout=_layout(cfg, field), check=False)
    x, psi, dpsi, _ = sol.samples()
    j = current(eps, psi, dpsi)
    return np.column_stack([x, psi.real, psi.imag, dpsi.real, dpsi.imag, j]).tolist()


def _converge_task(args):
    cfg, eps = args
    field = cfg.build_field()
    layout = _layout(cfg, field)
    ref = fine_grid_reference(field, layout, eps, 2**cfg.ref_exponent)
    sols = [solve(field, eps, 2.0**-k, layout=layout, check=False) for k in cfg.h_exponents]
    reports = [compare(s, ref, cfg.eval_points) for s in sols]
    for i, k in enumerate(cfg.h_exponents):
        reports[i].h = 2.0**-k
        # incremental error of h is measured against the solve at h/2
        if i + 1 < len(sols) and cfg.h_exponents[i + 1] == k + 1:
            reports[i].incremental_err = compare(sols[i], sols[i + 1], cfg.eval_points).err_psi_inf
    s_psi = slope_fit(reports, "err_psi_inf").slope
    s_dpsi = slope_fit(reports, "err_eps_dpsi_inf").slope
    for r in reports:
        r.slope, r.slope_dpsi = s_psi, s_dpsi
    return [r.row() for r in reports]


def _condition_task(args):
    cfg, eps, k = args
    field = cfg.build_field()
    sol = solve(field, eps, 2.0**-k, layout=_layout(cfg, field), check=False)
    z = next(z for z in sol.zones if z.regime == EVANESCENT)
    return [eps, 2.0**-k, fem.condition_number(z.fem_system)]


def _eps_tag(eps):
    return fmt(float(eps)).replace("+", "")


def run_solve(cfg, out, header):
    tasks = [(cfg, eps, k) for eps in cfg.eps for k in cfg.h_exponents]
    written = []
    for (_, eps, k), rows in zip(tasks, _map(cfg, _solve_task, tasks)):
        name = f"solve_eps{_eps_tag(eps)}_h2m{k}.csv"
        lines = header + [f"run: eps = {fmt(float(eps))}, h = 2^-{k}"]
        written.append(emit_csv(out / name, lines, SOLVE_COLUMNS, rows))
    return written


def run_converge(cfg, out, header):
    tasks = [(cfg, eps) for eps in cfg.eps]
    rows = [row for block in _map(cfg, _converge_task, tasks) for row in block]
    return [emit_csv(out / "converge.csv", header, ErrorReport.FIELDS, rows)]


def run_condition(cfg, out, header, layout):
    if EVANESCENT not in layout.regimes:
        raise ConfigError("condition needs a layout with an evanescent zone", path=cfg.path)
    tasks = [(cfg, eps, k) for eps in cfg.eps for k in cfg.h_exponents]
    rows = _map(cfg, _condition_task, tasks)
    return [emit_csv(out / "condition.csv", header, CONDITION_COLUMNS, rows)]


def run(command, cfg: ExperimentConfig, out_dir="."):
    """Execute ``command`` for ``cfg``; returns the list of written files.

    Raises ConfigError, HypothesisViolation or a numerical WkbError.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if cfg.command is not None and cfg.command != command:
        raise ConfigError(f"config is for command {cfg.command!r}, not {command!r}", path=cfg.path)
    field = cfg.build_field()
    layout = _layout(cfg, field)
    _check(cfg, field, layout)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(cfg, field, layout)
    if command == "preset":
        if cfg.preset is None:
            raise ConfigError("preset command needs 'preset = <name>' in the config", path=cfg.path)
        commands = PRESET_COMMANDS[cfg.preset]
    else:
        commands = (command,)
    written = []
    for c in commands:
        if c == "solve":
            written += run_solve(cfg, out, header)
        elif c == "converge":
            written += run_converge(cfg, out, header)
        else:
            written += run_condition(cfg, out, header, layout)
    return written


def build_parser():
    p = argparse.ArgumentParser(
        prog="wkb-scatter",
        description="Hybrid WKB solver for 1D open-boundary scattering problems.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="flat key = value experiment file")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        written = run(args.command, cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HypothesisViolation, AdmissibilityError) as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (WkbError, MemoryError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
