"""Command-line front end.

    anisotrap <spectrum|berry|evolve|experiment|sweep> --config run.cfg
        [--format csv|json] [--out PATH] [--override key=value ...]

Every output row carries the resolved configuration as ``cfg_*`` columns, so
a row is enough to rerun the point that produced it. Floats are written in
scientific notation with ``precision`` significant digits (17 by default,
which round-trips doubles); lines end in LF. JSON output is one object per
line with the same number tokens as the CSV.

Exit status: 0 success, 2 configuration error, 3 physics precondition
violated, 4 numerical convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from anisotrap.berry import LoopSpec, berry_closed_form, wilson_loop_phase
from anisotrap.config import RunConfig, load_config
from anisotrap.errors import AnisotrapError, ConfigError
from anisotrap.experiment import prepare_superposition, run_cycle_experiment
from anisotrap.fockspace import ModeAngle
from anisotrap.hamiltonian import numeric_spectrum, singlet_energy, singlet_state
from anisotrap.numerics import fidelity, wrap_phase
from anisotrap.propagator import cycle_period, evolve

THREADS_ENV = "ANISOTRAP_THREADS"
CONNECTION_NODES = 64


# --- formatting -------------------------------------------------------------


def format_scalar(v, precision: int) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.{precision - 1}e}"
    if v is None:
        return ""
    if isinstance(v, (tuple, list)):
        return ",".join(format_scalar(x, precision) for x in v)
    return str(v)


def _json_token(v, precision: int) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer, float, np.floating)):
        s = format_scalar(v, precision)
        return "null" if s in ("nan", "inf", "-inf") else s
    if v is None:
        return "null"
    return json.dumps(format_scalar(v, precision))


def csv_line(values: list[str]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(values)
    return buf.getvalue()


def json_line(keys: list[str], row: dict, precision: int) -> str:
    body = ", ".join(f"{json.dumps(k)}: {_json_token(row[k], precision)}" for k in keys)
    return "{" + body + "}\n"


class Writer:
    """Streams rows with a fixed column order."""

    def __init__(self, stream, fmt: str, columns: list[str], precision: int, header: bool = True):
        self.stream = stream
        self.fmt = fmt
        self.columns = columns
        self.precision = precision
        if fmt == "csv" and header:
            stream.write(csv_line(columns))

    def line(self, row: dict) -> str:
        if self.fmt == "csv":
            return csv_line([format_scalar(row[c], self.precision) for c in self.columns])
        return json_line(self.columns, row, self.precision)

    def write(self, row: dict) -> None:
        self.stream.write(self.line(row))
        self.stream.flush()


def config_columns(cfg: RunConfig) -> dict:
    return {f"cfg_{k}": v for k, v in cfg.resolved_items()}


# --- subcommands ------------------------------------------------------------


SPECTRUM_COLUMNS = ["N", "sign", "E_analytic", "E_numeric", "residual"]


def spectrum_rows(cfg: RunConfig) -> list[dict]:
    basis = cfg.basis()
    Ns = cfg.N_list if cfg.N_list is not None else tuple(range(2, basis.n_max + 1))
    for N in Ns:
        if not 2 <= N <= basis.n_max:
            raise ConfigError(f"N_list entry {N} outside 2..n_max = {basis.n_max}")
    if not Ns:
        return []
    g = cfg.geometry()
    found = {e.label: e.energy for e in numeric_spectrum(g, basis, 0.0) if e.label}
    rows = []
    for N in Ns:
        for sign in (-1, 1):
            Ea = singlet_energy(g.lam, N, sign)
            En = found.get(("singlet", N, sign), math.nan)
            rows.append({"N": N, "sign": sign, "E_analytic": Ea, "E_numeric": En, "residual": abs(En - Ea)})
    return rows


BERRY_COLUMNS = [
    "N",
    "theta",
    "closed_form",
    "connection_integral",
    "wilson",
    "wilson_minus_closed",
    "delta_closed",
    "delta_wilson",
]


def connection_integral(N: int, theta: float, basis, nodes: int = CONNECTION_NODES) -> float:
    """``i * loop integral of <n|d/dphi n>``, differentiating the analytic singlet numerically."""
    h = 1e-3

    def state(phi):
        return singlet_state(N, 1, ModeAngle(theta, phi), basis)

    vals = []
    for phi in 2.0 * np.pi * np.arange(nodes) / nodes:
        # fourth-order central difference
        dv = (8 * (state(phi + h) - state(phi - h)) - (state(phi + 2 * h) - state(phi - 2 * h))) / (12 * h)
        vals.append(np.vdot(state(phi), dv))
    # periodic integrand: the rectangle rule is the trapezoid rule
    return float(np.real(1j * 2.0 * np.pi * np.mean(vals)))


def berry_rows(cfg: RunConfig) -> list[dict]:
    basis = cfg.basis()
    Ns = cfg.N_list if cfg.N_list is not None else tuple(range(2, basis.n_max))
    for N in Ns:
        if not 2 <= N <= basis.n_max - 1:
            raise ConfigError(f"N_list entry {N} outside 2..n_max-1 = {basis.n_max - 1}")
    if not Ns:
        return []
    g = cfg.geometry()
    theta = g.theta
    wilson = {}
    for N in sorted(set(Ns) | {N + 1 for N in Ns}):
        wilson[N] = wilson_loop_phase(g, basis, LoopSpec(("singlet", N, 1), cfg.samples))
    rows = []
    for N in Ns:
        closed = berry_closed_form(N, theta, "singlet_N")
        closed1 = berry_closed_form(N + 1, theta, "singlet_N")
        rows.append(
            {
                "N": N,
                "theta": theta,
                "closed_form": closed,
                "connection_integral": connection_integral(N, theta, basis),
                "wilson": wilson[N],
                "wilson_minus_closed": wrap_phase(wilson[N] - closed),
                "delta_closed": wrap_phase(closed - closed1),
                "delta_wilson": wrap_phase(wilson[N] - wilson[N + 1]),
            }
        )
    return rows


EVOLVE_COLUMNS = ["method", "t", "fidelity_vs_closed", "norm_drift", "charge_drift", "step_count"]


def evolve_rows(cfg: RunConfig) -> list[dict]:
    g = cfg.geometry()
    basis = cfg.basis()
    t = cfg.t if cfg.t is not None else cycle_period(g)
    methods = cfg.methods if cfg.methods is not None else ("closed", "stepped", "adiabatic")
    if cfg.initial == "singlet":
        psi0 = singlet_state(cfg.N, 1, ModeAngle(g.theta, 0.0), basis)
    else:
        psi0 = prepare_superposition(cfg.N, g, basis)
    ref = evolve(psi0, g, basis, "closed", t).final_state
    rows = []
    for m in methods:
        res = evolve(psi0, g, basis, m, t, cfg.step_count if m == "stepped" else None)
        rows.append(
            {
                "method": m,
                "t": res.t_final,
                "fidelity_vs_closed": fidelity(ref, res.final_state),
                "norm_drift": res.norm_drift,
                "charge_drift": res.charge_drift,
                "step_count": res.step_count,
            }
        )
    return rows


def experiment_row(cfg: RunConfig) -> dict:
    g = cfg.geometry()
    rec = run_cycle_experiment(cfg.N, g, cfg.basis(), cfg.method, cfg.step_count)
    return rec.to_flat()


def sweep_points(cfg: RunConfig) -> list[RunConfig]:
    dnus = cfg.sweep_dnu_over_lambda or (None,)
    Ns = cfg.sweep_N or (None,)
    thetas = cfg.sweep_theta or (None,)
    return [cfg.point(d, N, th) for d, N, th in itertools.product(dnus, Ns, thetas)]


def _sweep_one(point: RunConfig) -> dict:
    row = experiment_row(point)
    row.update(config_columns(point))
    return row


def thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _completed_lines(path: str, fmt: str) -> tuple[list[str] | None, list[str]]:
    """Header and the fully written rows of an earlier, possibly interrupted, output."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except FileNotFoundError:
        return None, []
    lines = text.split("\n")
    lines = lines[:-1]  # the last element is either "" or a partial row
    if fmt == "csv":
        if not lines:
            return None, []
        return next(csv.reader([lines[0]])), lines[1:]
    return None, lines


# --- driver -----------------------------------------------------------------


def _open_out(cfg: RunConfig, mode: str = "w"):
    if cfg.out is None:
        return sys.stdout, False
    return open(cfg.out, mode, encoding="utf-8", newline=""), True


def run_table(cfg: RunConfig, columns: list[str], rows: list[dict]) -> None:
    cols = columns + list(config_columns(cfg))
    stream, close = _open_out(cfg)
    try:
        w = Writer(stream, cfg.format, cols, cfg.precision)
        for row in rows:
            row.update(config_columns(cfg))
            w.write(row)
    finally:
        if close:
            stream.close()


def run_sweep(cfg: RunConfig, resume: bool) -> None:
    points = sweep_points(cfg)
    done_header, done = (None, [])
    if resume:
        if cfg.out is None:
            raise ConfigError("--resume needs an output file (--out or out = ...)")
        done_header, done = _completed_lines(cfg.out, cfg.format)
    done = done[: len(points)]
    todo = points[len(done):]
    workers = max(1, min(thread_cap(), len(todo) or 1))
    stream, close = _open_out(cfg)
    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_sweep_one, todo)
            writer = None
            if done:
                cols = done_header
                if cfg.format == "json":
                    cols = list(json.loads(done[0]).keys())
                writer = Writer(stream, cfg.format, cols, cfg.precision)
                for line in done:
                    stream.write(line + "\n")
                stream.flush()
            for row in results:
                if writer is None:
                    writer = Writer(stream, cfg.format, list(row), cfg.precision)
                if list(row) != writer.columns:
                    raise ConfigError("existing output does not match this sweep; remove it or drop --resume")
                writer.write(row)
    finally:
        if close:
            stream.close()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anisotrap", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=["spectrum", "berry", "evolve", "experiment", "sweep"])
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--format", choices=["csv", "json"], help="output format (default csv)")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="repeatable")
    p.add_argument("--resume", action="store_true", help="sweep only: keep completed rows of --out")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.override)
        if args.format:
            overrides.append(f"format={args.format}")
        if args.out:
            overrides.append(f"out={args.out}")
        cfg = load_config(args.config, overrides)
        if args.resume and args.command != "sweep":
            raise ConfigError("--resume applies to sweep only")
        if args.command == "spectrum":
            rows = spectrum_rows(cfg)
            run_table(replace(cfg, N_list=tuple(r["N"] for r in rows[::2])), SPECTRUM_COLUMNS, rows)
        elif args.command == "berry":
            rows = berry_rows(cfg)
            run_table(replace(cfg, N_list=tuple(r["N"] for r in rows)), BERRY_COLUMNS, rows)
        elif args.command == "evolve":
            rows = evolve_rows(cfg)
            run_table(replace(cfg, methods=tuple(r["method"] for r in rows)), EVOLVE_COLUMNS, rows)
        elif args.command == "experiment":
            row = experiment_row(cfg)
            run_table(cfg, list(row), [row])
        else:
            run_sweep(cfg, args.resume)
    except AnisotrapError as exc:
        print(f"anisotrap: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        # library-level argument validation surfaces as a configuration problem
        print(f"anisotrap: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
