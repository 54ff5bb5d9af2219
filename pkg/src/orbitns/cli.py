"""Command line interface.

Subcommands: diagnostics, incidence, transfer, simulate, bounds. Tables and
matrices are CSV, states are JSON. Every run is fully determined by its
options (seed included): rerunning a command reproduces byte-identical
output. Options may come from a JSON config file via --config; explicit
flags win.

Exit codes: 0 success, 1 usage, 2 state validation, 3 identity residual
over tolerance, 4 divergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from ._util import atomic_write_text
from .dynamics import (
    SimulationDiverged,
    default_timestep,
    simulate,
)
from .incidence import fit_loglog_slope, incidence_row, max_incidence_scan
from .lattice import enumerate_lattice, shell_radii, triad_count_exact
from .spectral import (
    StateValidationError,
    TruncatedState,
    decompose,
    load_state,
    random_state,
    row_sum_report,
    sobolev_norm,
    transfer_matrix,
    triad_kernel_sum,
)
from .symmetry import enumerate_orbits

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RESIDUAL = 3
EXIT_DIVERGED = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # route argparse's own failures through the usage exit code
    def error(self, message):
        raise UsageError(message)


class _Options:
    """Flag values with config-file fallback; explicit flags override."""

    def __init__(self, args, config):
        self._args = vars(args)
        self._config = config

    def get(self, key, default=None):
        v = self._args.get(key)
        if v is None:
            v = self._config.get(key, default)
        return v

    def require(self, key):
        v = self.get(key)
        if v is None:
            raise UsageError(f"missing required option --{key.replace('_', '-')}")
        return v


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv_text(header, rows, trailer=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    if trailer:
        buf.write(trailer + "\n")
    return buf.getvalue()


def _emit(text, out) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _orbit_label(canonical) -> str:
    return "%d,%d,%d" % canonical


def _parse_orbit_label(text, orbits):
    try:
        parts = tuple(int(x) for x in str(text).split(","))
    except ValueError:
        parts = ()
    if len(parts) != 3:
        raise UsageError(f"orbit label must look like 'a,b,c', got {text!r}")
    for i, orbit in enumerate(orbits):
        if orbit.canonical == parts:
            return i
    valid = " ".join(_orbit_label(o.canonical) for o in orbits)
    raise UsageError(f"unknown orbit {text!r} at this level; valid canonicals: {valid}")


def _parse_number_list(value, kind, name):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [x for x in str(value).split(",") if x.strip() != ""]
    try:
        items = [kind(x) for x in items]
    except (TypeError, ValueError):
        raise UsageError(f"--{name} expects a comma-separated list")
    if not items:
        raise UsageError(f"--{name} must not be empty")
    return items


# ---------------------------------------------------------------- diagnostics

DIAGNOSTICS_HEADER = ("N", "modes", "orbits", "shells", "max_triad_count", "total_triads")


def diagnostics_rows(n_max) -> list[tuple]:
    """Exact combinatorial table for levels 1..n_max, one row per level."""
    rows = []
    for N in range(1, n_max + 1):
        modes = enumerate_lattice(N)
        counts = [triad_count_exact(k, N) for k in modes]
        rows.append(
            (
                N,
                len(modes),
                len(enumerate_orbits(N)),
                len(shell_radii(N)),
                max(counts),
                sum(counts),
            )
        )
    return rows


def cmd_diagnostics(opts: _Options) -> int:
    n_max = opts.get("n_max", 8)
    if not isinstance(n_max, int) or not 1 <= n_max <= 16:
        raise UsageError(f"--n-max must be an integer in [1, 16], got {n_max!r}")
    rows = diagnostics_rows(n_max)
    if opts.get("format", "csv") == "json":
        recs = [dict(zip(DIAGNOSTICS_HEADER, row)) for row in rows]
        _emit(json.dumps(recs, indent=1) + "\n", opts.get("out"))
    else:
        _emit(_csv_text(DIAGNOSTICS_HEADER, rows), opts.get("out"))
    return EXIT_OK


# ------------------------------------------------------------------ incidence


def cmd_incidence(opts: _Options) -> int:
    N = opts.require("n")
    orbits = enumerate_orbits(N)
    alpha = opts.get("alpha")
    targets = orbits if alpha is None else [orbits[_parse_orbit_label(alpha, orbits)]]
    rows = []
    max_sqrt = 0.0
    for target in targets:
        record = incidence_row(target, N, orbits)
        max_sqrt = max(max_sqrt, record.row_sqrt_sum)
        for beta in orbits:
            rows.append(
                (
                    N,
                    _orbit_label(target.canonical),
                    _orbit_label(beta.canonical),
                    record.counts[beta.canonical],
                )
            )
    if opts.get("format", "csv") == "json":
        doc = {
            "N": N,
            "rows": [
                {"alpha": a, "beta": b, "triads": g} for (_, a, b, g) in rows
            ],
            "max_row_sqrt_sum": max_sqrt,
        }
        _emit(json.dumps(doc, indent=1) + "\n", opts.get("out"))
    else:
        trailer = f"# N={N} max_row_sqrt_sum={_fmt(max_sqrt)}"
        _emit(_csv_text(("N", "alpha", "beta", "triads"), rows, trailer), opts.get("out"))
    return EXIT_OK


# ------------------------------------------------------------------- transfer


def _matrix_csv(labels, matrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["alpha"] + labels)
    for label, row in zip(labels, matrix):
        writer.writerow([label] + [_fmt(float(x)) for x in row])
    return buf.getvalue()


def cmd_transfer(opts: _Options) -> int:
    state_path = opts.require("state")
    prefix = opts.require("out")
    workers = opts.get("workers", 1)
    s = opts.get("s")
    if s is not None and not 1.5 < float(s) < 3.0:
        raise UsageError(f"row-sum report requires 3/2 < s < 3, got s={s}")
    u = load_state(state_path)
    matrix = transfer_matrix(u, workers=workers)
    anti, sym = decompose(matrix)
    labels = [_orbit_label(o.canonical) for o in matrix.orbits]
    atomic_write_text(prefix + "_M.csv", _matrix_csv(labels, matrix.entries))
    atomic_write_text(prefix + "_A.csv", _matrix_csv(labels, anti))
    atomic_write_text(prefix + "_V.csv", _matrix_csv(labels, sym))
    if s is not None:
        report = row_sum_report(u, float(s), matrix=matrix)
        rows = [
            (_orbit_label(r.orbit.canonical), r.row_sum, r.bound_shape, r.ratio)
            for r in report
        ]
        text = _csv_text(("alpha", "row_sum", "bound_shape", "ratio"), rows)
        atomic_write_text(prefix + "_rowsums.csv", text)
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------- simulate

SIMULATE_HEADER = (
    "step",
    "time",
    "orbit",
    "Z_alpha",
    "D_alpha",
    "dZdt_direct",
    "dZdt_matrix",
    "residual",
)


def _initial_state(opts: _Options) -> TruncatedState:
    state_path = opts.get("state")
    if state_path is not None:
        return load_state(state_path)
    N = opts.get("n")
    if N is None:
        raise UsageError("simulate needs either --state or --n")
    return random_state(
        N, opts.get("s", 2.0), opts.get("amplitude", 1.0), opts.get("seed", 0)
    )


def cmd_simulate(opts: _Options) -> int:
    u0 = _initial_state(opts)
    nu = float(opts.get("nu", 0.0))
    steps = int(opts.get("steps", 10))
    every = int(opts.get("every", 1))
    dt = opts.get("dt")
    dt = default_timestep(u0, nu) if dt is None else float(dt)
    tol = float(opts.get("residual_tol", 1e-10))
    workers = opts.get("workers", 1)
    records = simulate(u0, nu, dt, steps, diagnostics_every=every, workers=workers)
    rows = []
    worst = 0.0
    for rec in records:
        for od in rec.orbits:
            rows.append(
                (
                    rec.step,
                    rec.time,
                    _orbit_label(od.canonical),
                    od.enstrophy,
                    od.dissipation,
                    od.dzdt_direct,
                    od.dzdt_matrix,
                    od.residual,
                )
            )
            worst = max(worst, od.residual / od.scale)
    if opts.get("format", "csv") == "json":
        doc = [dict(zip(SIMULATE_HEADER, row)) for row in rows]
        _emit(json.dumps(doc, indent=1) + "\n", opts.get("out"))
    else:
        _emit(_csv_text(SIMULATE_HEADER, rows), opts.get("out"))
    if worst > tol:
        print(
            f"identity residual {worst:.3e} exceeds tolerance {tol:.3e}",
            file=sys.stderr,
        )
        return EXIT_RESIDUAL
    return EXIT_OK


# --------------------------------------------------------------------- bounds


def cmd_bounds(opts: _Options) -> int:
    n_max = opts.require("n_max")
    if not isinstance(n_max, int) or n_max < 1:
        raise UsageError(f"--n-max must be a positive integer, got {n_max!r}")
    s_values = _parse_number_list(opts.get("s", "1.6,2.0,2.5,2.9"), float, "s")
    seeds = _parse_number_list(opts.get("seeds", "0,1,2"), int, "seeds")
    amplitude = float(opts.get("amplitude", 1.0))
    workers = opts.get("workers", 1)
    for s in s_values:
        if not 1.5 < s < 3.0:
            raise UsageError(f"bound sweeps require 3/2 < s < 3, got s={s}")

    rows = []
    # kernel-sum ratios: max over orbit representatives (the sum is constant
    # on each orbit) of kernel_sum / (1 + |k|^(4-2s))
    for N in range(1, n_max + 1):
        orbits = enumerate_orbits(N)
        for s in s_values:
            best = 0.0
            for orbit in orbits:
                kn = math.sqrt(orbit.norm2)
                ratio = triad_kernel_sum(orbit.canonical, s, N) / (1.0 + kn ** (4.0 - 2.0 * s))
                best = max(best, ratio)
            rows.append(("kernel_ratio_max", N, s, "", best))
    # transfer row sums against the bound shape, per seeded state
    for N in range(1, n_max + 1):
        for s in s_values:
            for seed in seeds:
                u = random_state(N, s, amplitude, seed)
                report = row_sum_report(u, s, workers=workers)
                best = max(r.ratio for r in report)
                rows.append(("rowsum_ratio_max", N, s, seed, best))
    # incidence growth
    scan = max_incidence_scan(n_max, workers=workers)
    for N, value in scan:
        rows.append(("max_row_sqrt_sum", N, "", "", value))
    if sum(1 for N, v in scan if N >= 4 and v > 0) >= 2:
        rows.append(("incidence_loglog_slope", "", "", "", fit_loglog_slope(scan)))

    if opts.get("format", "csv") == "json":
        doc = [
            dict(zip(("metric", "N", "s", "seed", "value"), row)) for row in rows
        ]
        _emit(json.dumps(doc, indent=1) + "\n", opts.get("out"))
    else:
        _emit(_csv_text(("metric", "N", "s", "seed", "value"), rows), opts.get("out"))
    return EXIT_OK


# ----------------------------------------------------------------- entrypoint


def _add_common(sub):
    sub.add_argument("--out", help="output path (stdout when omitted)")
    sub.add_argument("--format", choices=("csv", "json"), help="table format")
    sub.add_argument("--workers", type=int, help="parallel worker cap (default 1)")
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--seed", type=int, help="random seed where applicable")


def build_parser() -> _Parser:
    parser = _Parser(prog="orbitns", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("diagnostics", help="exact combinatorial table per level")
    p.add_argument("--n-max", dest="n_max", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_diagnostics)

    p = subs.add_parser("incidence", help="orbit-pair triad counts")
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", help="restrict to one target orbit, label 'a,b,c'")
    _add_common(p)
    p.set_defaults(func=cmd_incidence)

    p = subs.add_parser("transfer", help="transfer matrix and its split from a state file")
    p.add_argument("--state", help="input state JSON")
    p.add_argument("--s", type=float, help="Sobolev exponent for the row-sum report")
    _add_common(p)
    p.set_defaults(func=cmd_transfer)

    p = subs.add_parser("simulate", help="integrate and record orbit diagnostics")
    p.add_argument("--state", help="initial state JSON (otherwise random via --n)")
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float, help="Sobolev exponent of the random state")
    p.add_argument("--amplitude", type=float, help="Sobolev norm of the random state")
    p.add_argument("--nu", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--every", type=int, help="diagnostics cadence in steps")
    p.add_argument("--residual-tol", dest="residual_tol", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("bounds", help="kernel, row-sum, and incidence sweeps")
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--s", help="comma-separated Sobolev exponents")
    p.add_argument("--seeds", help="comma-separated random seeds")
    p.add_argument("--amplitude", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = {}
        if getattr(args, "config", None):
            try:
                with open(args.config) as fh:
                    config = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read config file: {exc}")
            if not isinstance(config, dict):
                raise UsageError("config file must hold a JSON object")
        return args.func(_Options(args, config))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StateValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SimulationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
