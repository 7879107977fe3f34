"""Command-line front end.

Subcommands: ``yield`` (one state), ``sweep`` (CSV over a fidelity grid),
``oracle`` (closed form against enumeration) and ``simulate`` (Monte Carlo
against analytic propagation).

Exit codes: 0 success, 1 check failure, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bellspace import BellDiagonal, parse_probs
from .checks import CHECKS
from .engine import DEFAULT_TRUNC, PROTOCOLS, YieldReport, cascade_tables, protocol_report
from .oracle import mc_cascade
from .recurrence import DEFAULT_KMAX, normalize_bell_order, optimal_recurrence_schedule, recurrence_chain

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
JOBS_ENV = "BELLCASCADE_JOBS"
CSV_HEADER = ["fidelity", "protocol", "q", "recurrence_iters", "success_weight", "yield_raw", "yield"]


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.12g" % x


def _recurrence_arg(text: str) -> str | int:
    if text in ("none", "auto"):
        return text
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected none, auto or an iteration count, got {text!r}")
    if k < 0:
        raise argparse.ArgumentTypeError("iteration count must be >= 0")
    return k


def _default_jobs() -> int:
    try:
        return max(int(os.environ.get(JOBS_ENV, "1")), 1)
    except ValueError:
        return 1


@dataclass(frozen=True)
class SweepConfig:
    protocols: tuple[str, ...]
    qdepths: tuple[int, ...]
    trunc: int
    f_min: float
    f_max: float
    steps: int
    recurrence: str | int
    kmax: int = DEFAULT_KMAX
    relative_to: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.f_min <= self.f_max <= 1.0:
            raise UsageError("need 0 <= f-min <= f-max <= 1")
        if self.steps < 1:
            raise UsageError("steps must be >= 1")
        if any(not 1 <= q <= 12 for q in self.qdepths):
            raise UsageError("q must lie in 1..12")
        if self.trunc < 1:
            raise UsageError("trunc must be >= 1")
        if self.kmax < 0:
            raise UsageError("kmax must be >= 0")
        unknown = set(self.protocols) - set(PROTOCOLS)
        if unknown:
            raise UsageError(f"unknown protocol {sorted(unknown)[0]!r}")

    def grid(self) -> np.ndarray:
        return np.linspace(self.f_min, self.f_max, self.steps)


@dataclass(frozen=True)
class Evaluation:
    report: YieldReport
    iterations: int
    success_weight: float

    @property
    def yield_raw(self) -> float:
        return self.success_weight * self.report.raw_yield

    @property
    def yield_floored(self) -> float:
        return self.success_weight * self.report.floored_yield


def evaluate(
    protocol: str, rho: BellDiagonal, qdepth: int, trunc: int, recurrence: str | int, kmax: int
) -> Evaluation:
    """Yield of ``protocol`` on ``rho`` after no, a fixed or the best number of recurrence rounds."""

    def backend(state: BellDiagonal) -> float:
        return protocol_report(protocol, state, qdepth, trunc).floored_yield

    if recurrence == "none" or recurrence == 0:
        return Evaluation(protocol_report(protocol, rho, qdepth, trunc), 0, 1.0)
    if recurrence == "auto":
        best = optimal_recurrence_schedule(rho, backend, kmax)
        return Evaluation(protocol_report(protocol, best.state, qdepth, trunc), best.iterations, best.success_weight)
    steps = recurrence_chain(rho, int(recurrence))
    weight = math.prod(s.weight for s in steps)
    state = normalize_bell_order(steps[-1].kept)
    return Evaluation(protocol_report(protocol, state, qdepth, trunc), len(steps), weight)


def _sweep_rows(config: SweepConfig, fidelity: float) -> list[list[str]]:
    rho = BellDiagonal.werner(float(fidelity))
    rows = []
    baselines: dict = {}
    for protocol in config.protocols:
        qs = config.qdepths if protocol.startswith("cascade") else (None,)
        for q in qs:
            ev = evaluate(protocol, rho, q or 1, config.trunc, config.recurrence, config.kmax)
            row = [
                fmt(float(fidelity)),
                protocol,
                fmt(q),
                fmt(ev.iterations),
                fmt(ev.success_weight),
                fmt(ev.yield_raw),
                fmt(ev.yield_floored),
            ]
            if config.relative_to:
                bq = q or 1
                if bq not in baselines:
                    baselines[bq] = evaluate(config.relative_to, rho, bq, config.trunc, config.recurrence, config.kmax)
                row.append(fmt(relative_difference(ev.yield_floored, baselines[bq].yield_floored)))
            rows.append(row)
    return rows


def relative_difference(value: float, baseline: float) -> float:
    """``(value - baseline) / baseline``; 0 when both vanish, ``inf`` when only the baseline does."""
    if baseline > 0:
        return (value - baseline) / baseline
    return 0.0 if value <= 0 else math.inf


def run_sweep(config: SweepConfig, jobs: int = 1) -> list[list[str]]:
    grid = config.grid()
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_rows, [config] * len(grid), grid))
    else:
        chunks = [_sweep_rows(config, f) for f in grid]
    return [row for chunk in chunks for row in chunk]


def sweep_csv(config: SweepConfig, jobs: int = 1) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(CSV_HEADER)
    if config.relative_to:
        header.append("relative_difference")
    writer.writerow(header)
    writer.writerows(run_sweep(config, jobs))
    return buf.getvalue()


def gnuplot_script(csv_path: str, config: SweepConfig) -> str:
    series = []
    for protocol in config.protocols:
        for q in config.qdepths if protocol.startswith("cascade") else (None,):
            label = protocol if q is None else f"{protocol} q={q}"
            cond = f'strcol(2) eq "{protocol}"' + ("" if q is None else f" && $3 == {q}")
            series.append(f"'{csv_path}' using 1:(({cond}) ? $7 : 1/0) with lines title '{label}'")
    return "\n".join(
        [
            "set datafile separator ','",
            "set key autotitle columnhead",
            "set xlabel 'fidelity'",
            "set ylabel 'yield'",
            "plot " + ", \\\n     ".join(series),
            "",
        ]
    )


def _state_from_args(args) -> BellDiagonal:
    if args.werner is not None:
        return BellDiagonal.werner(args.werner)
    return parse_probs(args.probs)


def _add_state_args(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--werner", type=float, metavar="F", help="Werner state with fidelity F")
    group.add_argument("--probs", metavar="P00,P01,P10,P11", help="Bell-diagonal probabilities")


def cmd_yield(args, out) -> int:
    rho = _state_from_args(args)
    ev = evaluate(args.protocol, rho, args.q, args.trunc, args.recurrence, args.kmax)
    r = ev.report
    fields = [
        ("protocol", r.protocol),
        ("state", str(rho)),
        ("q", r.qdepth),
        ("trunc", r.trunc),
        ("recurrence_iters", ev.iterations),
        ("success_weight", ev.success_weight),
        ("pb_cost", r.pb_cost),
        ("bpm_savings", r.bpm_savings),
        ("residual", r.residual_breeding_cost),
        ("nonmeasured_fraction", r.nonmeasured_fraction),
        ("yield_raw", ev.yield_raw),
        ("yield", ev.yield_floored),
    ]
    for key, value in fields:
        if value is not None:
            print(f"{key}={fmt(value)}", file=out)
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    config = SweepConfig(
        protocols=tuple(args.protocol or ["breeding"]),
        qdepths=tuple(args.q or [6]),
        trunc=args.trunc,
        f_min=args.f_min,
        f_max=args.f_max,
        steps=args.steps,
        recurrence=args.recurrence,
        kmax=args.kmax,
        relative_to=args.relative_to,
    )
    text = sweep_csv(config, args.jobs)
    try:
        if args.output == "-":
            out.write(text)
        else:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        if args.gnuplot:
            source = args.output if args.output != "-" else "sweep.csv"
            with open(args.gnuplot, "w", encoding="utf-8") as fh:
                fh.write(gnuplot_script(source, config))
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_oracle(args, out) -> int:
    names = args.check or list(CHECKS)
    if "all" in names:
        names = list(CHECKS)
    options = {
        "bracket-entropy": {"max_blocks": args.max_blocks},
        "eta": {"trunc": args.trunc},
    }
    ok = True
    for name in names:
        kwargs = dict(options.get(name, {}))
        if name != "commutation":
            kwargs["seed"] = args.seed
        result = CHECKS[name](**kwargs)
        print(result.line(), file=out)
        ok &= result.passed
    return EXIT_OK if ok else EXIT_CHECK


def _class_key(cls) -> str | tuple[int, int]:
    return (cls.n0, cls.n1) if cls.is_bracket else str(cls)


def cmd_simulate(args, out) -> int:
    rho = _state_from_args(args)
    if args.samples < 1:
        raise UsageError("samples must be >= 1")
    mode = args.mode
    analytic_table = cascade_tables(rho, args.q, mode, args.trunc)[-1]
    analytic = {_class_key(c): f for c, f in analytic_table.items()}
    analytic_yield = protocol_report("cascade" if mode == "uniform" else "cascade-ordered", rho, args.q, args.trunc)
    mc = mc_cascade(rho, args.q, mode, args.trunc, args.samples, args.seed, shards=args.shards, jobs=args.jobs)
    n = mc.samples
    print(f"state={rho} q={args.q} mode={mode} trunc={args.trunc} samples={n} seed={args.seed}", file=out)
    print("class,analytic,empirical,std_error,z", file=out)
    worst = 0.0
    keys = sorted(set(analytic) | set(mc.frequencies), key=lambda k: (isinstance(k, str), str(k)))
    for key in keys:
        a = analytic.get(key, 0.0)
        e = mc.frequencies.get(key, 0.0)
        # a class never seen has empirical SE 0; fall back to the Poisson scale of the analytic count
        se = max(mc.std_errors.get(key, 0.0), math.sqrt(max(a, 0.0) / n))
        z = 0.0 if abs(e - a) <= 1e-12 else (abs(e - a) / se if se > 0 else math.inf)
        worst = max(worst, z)
        label = key if isinstance(key, str) else f"[{key[0]};{key[1]}]"
        print(f"{label},{fmt(a)},{fmt(e)},{fmt(se)},{fmt(z)}", file=out)
    y_dev = abs(mc.yield_estimate - analytic_yield.raw_yield)
    y_z = 0.0 if y_dev <= 1e-12 else (y_dev / mc.yield_std_error if mc.yield_std_error > 0 else math.inf)
    worst = max(worst, y_z)
    print(
        f"yield,{fmt(analytic_yield.raw_yield)},{fmt(mc.yield_estimate)},{fmt(mc.yield_std_error)},{fmt(y_z)}",
        file=out,
    )
    for level, (frac, se) in mc.eta_by_level.items():
        print(f"eta_level_{level},,{fmt(frac)},{fmt(se)},", file=out)
    passed = worst <= args.sigma
    print(f"{'PASS' if passed else 'FAIL'} max_z={fmt(worst)} bound={fmt(args.sigma)}", file=out)
    return EXIT_OK if passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellcascade", description="Asymptotic entanglement distillation yields.")
    sub = parser.add_subparsers(dest="command", required=True)

    py = sub.add_parser("yield", help="yield ledger for one state")
    _add_state_args(py)
    py.add_argument("--protocol", choices=PROTOCOLS, default="cascade-ordered")
    py.add_argument("--q", type=int, default=6)
    py.add_argument("--trunc", type=int, default=DEFAULT_TRUNC)
    py.add_argument("--recurrence", type=_recurrence_arg, default="none")
    py.add_argument("--kmax", type=int, default=DEFAULT_KMAX)
    py.set_defaults(func=cmd_yield)

    ps = sub.add_parser("sweep", help="CSV of yields over a Werner fidelity grid")
    ps.add_argument("--protocol", action="append", choices=PROTOCOLS, help="repeatable; default breeding")
    ps.add_argument("--q", type=int, nargs="+", help="cascade depths; default 6")
    ps.add_argument("--trunc", type=int, default=DEFAULT_TRUNC)
    ps.add_argument("--f-min", type=float, default=0.5)
    ps.add_argument("--f-max", type=float, default=1.0)
    ps.add_argument("--steps", type=int, default=51)
    ps.add_argument("--recurrence", type=_recurrence_arg, default="none")
    ps.add_argument("--kmax", type=int, default=DEFAULT_KMAX)
    ps.add_argument("--relative-to", choices=PROTOCOLS)
    ps.add_argument("--output", "-o", default="-")
    ps.add_argument("--gnuplot", metavar="PATH", help="also write a gnuplot script reading the CSV")
    ps.add_argument("--jobs", type=int, default=_default_jobs())
    ps.set_defaults(func=cmd_sweep)

    po = sub.add_parser("oracle", help="closed-form formulas against exhaustive enumeration")
    po.add_argument("--check", action="append", choices=[*CHECKS, "all"])
    po.add_argument("--max-blocks", type=int, default=6)
    po.add_argument("--trunc", type=int, default=20)
    po.add_argument("--seed", type=int, default=0)
    po.set_defaults(func=cmd_oracle)

    pm = sub.add_parser("simulate", help="Monte Carlo cascade against analytic propagation")
    _add_state_args(pm)
    pm.add_argument("--q", type=int, default=3)
    pm.add_argument("--mode", choices=("uniform", "ordered"), default="uniform")
    pm.add_argument("--trunc", type=int, default=DEFAULT_TRUNC)
    pm.add_argument("--samples", type=int, default=100_000)
    pm.add_argument("--seed", type=int, default=0)
    pm.add_argument("--shards", type=int, default=1)
    pm.add_argument("--jobs", type=int, default=_default_jobs())
    pm.add_argument("--sigma", type=float, default=3.0)
    pm.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
