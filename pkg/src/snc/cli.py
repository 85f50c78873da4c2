"""Command-line entry point: ``snc {model,simulate,tune,validate,table1}``.

Every subcommand writes a CSV (header row, UTF-8, LF line endings) to
``--out`` or stdout, and is deterministic given ``--seed``. ``--plot``
additionally writes a gnuplot script that draws the CSV.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from typing import Iterator, Sequence, TextIO

from . import model, sim, tuning
from .codec import Mode, SncParams
from .gf import field, parse_order

DEFAULT_TRIALS = 50000
FAST_TRIALS = 2000
TABLE_WEIGHTS = (1, 2, 3, 5, 10)

log = logging.getLogger("snc")


def _x_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=32, help="generation size (default 32)")
    common.add_argument("--q", type=parse_order, default=2, help="field order: 2, 16, 256, 2^4, 2^8")
    dens = common.add_mutually_exclusive_group()
    dens.add_argument("--w", type=float, help="expected nonzeros per coding vector")
    dens.add_argument("--p", type=float, help="nonzero probability per coefficient")
    common.add_argument("--epsilon", type=float, default=0.0, help="erasure probability")
    common.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.FULLY_RANDOM.value)
    common.add_argument("--m-max", type=int, help="largest m in the grid (default 2n)")
    common.add_argument("--out", help="output CSV path (default stdout)")
    common.add_argument("--plot", help="also write a gnuplot script here")
    common.add_argument("-v", "--verbose", action="store_true")

    runs = argparse.ArgumentParser(add_help=False)
    runs.add_argument("--trials", type=int, help=f"Monte-Carlo trials (default {DEFAULT_TRIALS})")
    runs.add_argument("--fast", action="store_true", help=f"use {FAST_TRIALS} trials unless --trials is set")
    runs.add_argument("--seed", type=int, default=1, help="base seed for per-trial streams")
    runs.add_argument("--x-list", type=_x_list, default=(1, 5, 10), help="thresholds x, e.g. 1,5,10,32")
    runs.add_argument("--schedule", help="per-packet density CSV from `snc tune`")

    ap = argparse.ArgumentParser(prog="snc", description="Sparse network coding: model, tuning and simulation.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("model", parents=[common], help="model grid of P(X>=x|M=m) and P(X=x|M=m)")
    sub.add_parser("simulate", parents=[common, runs], help="Monte-Carlo campaign")
    sub.add_parser("validate", parents=[common, runs], help="model vs simulation deviation")
    tune = sub.add_parser("tune", parents=[common], help="per-packet density schedule")
    tune.add_argument("--tol", type=float, default=tuning.DEFAULT_TOL)
    sub.add_parser("table1", parents=[common, runs], help="ADD/ANT sweep over sparsity, RLNC and tuning")
    return ap


def _params(args, p: float | None = None) -> SncParams:
    fld = field(args.q)
    if p is None:
        if args.w is not None:
            p = args.w / args.n
        elif args.p is not None:
            p = args.p
        else:
            p = 1 - 1 / fld.q
    return SncParams(args.n, fld, p, epsilon=args.epsilon, mode=args.mode)


def _trials(args) -> int:
    if args.trials is not None:
        return args.trials
    return FAST_TRIALS if args.fast else DEFAULT_TRIALS


@contextlib.contextmanager
def _output(path: str | None) -> Iterator[TextIO]:
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _write_plot(path: str, csv_path: str | None, kind: str, x_list: Sequence[int]) -> None:
    data = csv_path or "data.csv"
    lines = ["set datafile separator ','", "set key outside", "set grid"]
    if kind == "grid":
        lines += ["set xlabel 'received packets m'", "set ylabel 'P(X >= x | M = m)'"]
        col_x, col_y = 2, 3
    elif kind == "result":
        lines += ["set xlabel 'transmissions m'", "set ylabel 'P(X >= x | M = m)'"]
        col_x, col_y = 2, 4
    else:
        lines += ["set xlabel 'received packets i'", "set ylabel 'density'",
                  f"plot '{data}' every ::1 using 1:2 with lines title 'target', "
                  f"'' every ::1 using 1:3 with steps title 'per packet'"]
        _dump(path, lines)
        return
    plots = []
    for x in x_list:
        sel = f"(${col_x}=={x} ? ${col_y} : 1/0)"
        plots.append(f"'{data}' every ::1 using 1:{sel} with lines title 'x={x}'")
        if kind == "result":
            plots.append(f"'' every ::1 using 1:(${col_x}=={x} ? $3 : 1/0) with points title 'model x={x}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    _dump(path, lines)


def _dump(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _schedule(args) -> tuning.TuningSchedule | None:
    if not args.schedule:
        return None
    with open(args.schedule, encoding="utf-8") as fh:
        return tuning.TuningSchedule.read_csv(fh, args.n, args.q)


def cmd_model(args) -> int:
    params = _params(args)
    m_max = args.m_max if args.m_max is not None else 2 * args.n
    if params.epsilon > 0:
        rows = [model.effective_receptions(m, params.epsilon) for m in range(m_max + 1)]
        base = model.partial_decoding_table(params, max(max(rows), 2 * args.n))
        table = model.PartialDecodingTable(params, m_max, base.exact[rows], base.at_least_raw[rows],
                                           base.at_least[rows], base.repair_magnitude)
    else:
        table = model.partial_decoding_table(params, m_max)
    with _output(args.out) as fh:
        model.write_table_csv(table, fh)
    if args.plot:
        _write_plot(args.plot, args.out, "grid", (1, 5, 10, args.n))
    return 0


def _campaign(args, params: SncParams, schedule=None) -> sim.Campaign:
    m_max = args.m_max if args.m_max is not None else 2 * args.n
    x_list = tuple(x for x in args.x_list if x <= args.n) or (1,)
    return sim.Campaign(params, _trials(args), m_max, x_list, schedule, args.seed)


def cmd_simulate(args) -> int:
    c = _campaign(args, _params(args), _schedule(args))
    result = sim.run_campaign(c)
    with _output(args.out) as fh:
        sim.write_result_csv(fh, sim.model_grid(c.params, c.m_max), result)
    print(f"ADD {result.add:.4f} (se {result.add_se:.4f})  ANT {result.ant:.4f} (se {result.ant_se:.4f})  "
          f"censored {result.censored}/{result.trials}", file=sys.stderr)
    if args.plot:
        _write_plot(args.plot, args.out, "result", c.x_list)
    return 0


def cmd_validate(args) -> int:
    c = _campaign(args, _params(args))
    result = sim.run_campaign(c)
    grid = sim.model_grid(c.params, c.m_max)
    report = sim.deviation(grid, result.at_least, c.x_list, range(1, c.m_max + 1))
    with _output(args.out) as fh:
        sim.write_result_csv(fh, grid, result)
    summary = sys.stderr if args.out in (None, "-") else sys.stdout
    print(f"MAPD {report.mapd:.2f} pp over {report.cells} cells "
          f"(relative {report.relative_mapd:.1f}%), {result.trials} trials", file=summary)
    for cell in report.worst[:3]:
        print(f"  m={cell.m} x={cell.x}: model {cell.model:.4f} sim {cell.sim:.4f}", file=summary)
    if args.plot:
        _write_plot(args.plot, args.out, "result", c.x_list)
    return 0


def cmd_tune(args) -> int:
    m_max = args.m_max if args.m_max is not None else 4 * args.n
    schedule = tuning.optimize_schedule(args.n, field(args.q), tol=args.tol, m_max=m_max)
    with _output(args.out) as fh:
        schedule.write_csv(fh)
    if args.plot:
        _write_plot(args.plot, args.out, "schedule", ())
    return 0


def table1_rows(args) -> list[sim.MetricRow]:
    n, q = args.n, args.q
    configs: list[tuple[str, SncParams, tuning.TuningSchedule | None]] = []
    for w in TABLE_WEIGHTS:
        if w <= n * (1 - 1 / q):
            configs.append((f"w={w}", _params(args, w / n), None))
    configs.append(("RLNC", _params(args, 1 - 1 / q), None))
    schedule = _schedule(args) or tuning.optimize_schedule(n, field(q))
    configs.append(("tuning", _params(args, schedule.per_packet[0]), schedule))

    rows = []
    for label, params, sched in configs:
        c = sim.Campaign(params, _trials(args), 0, (1,), sched, args.seed)
        r = sim.run_campaign(c)
        if r.censored:
            log.warning("%s: %d of %d trials hit the horizon cap", label, r.censored, r.trials)
        rows.append(sim.MetricRow(f"n{n}-q{q}-{label}", n, q, label, r.add, r.add_se, r.ant, r.ant_se))
    return rows


def improvement(rows: Sequence[sim.MetricRow]) -> sim.MetricRow:
    """Relative change of tuning against RLNC, in percent."""
    by = {r.w_or_tuned: r for r in rows}
    rl, tu = by["RLNC"], by["tuning"]
    return sim.MetricRow(f"n{rl.n}-q{rl.q}-improvement", rl.n, rl.q, "improvement",
                         (tu.add - rl.add) / rl.add * 100, float("nan"),
                         (tu.ant - rl.ant) / rl.ant * 100, float("nan"))


def cmd_table1(args) -> int:
    rows = table1_rows(args)
    rows.append(improvement(rows))
    with _output(args.out) as fh:
        sim.write_metrics_csv(fh, rows)
    return 0


COMMANDS = {
    "model": cmd_model,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "tune": cmd_tune,
    "table1": cmd_table1,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"snc {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
