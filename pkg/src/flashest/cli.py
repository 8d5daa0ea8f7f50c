"""Command-line interface.

Subcommands
-----------
simulate          draw reads for one parameter set and write a histogram CSV
bins              place bin boundaries and write them as JSON
estimate          fit channel parameters to a histogram CSV
sweep             fit every condition of a trajectory (optionally the full
                  solver by read-count table)
binning-study     discretization error and effective resolution per strategy
read-count-study  LM iteration statistics at 6, 9 and 12 reads

Experiment flags mirror the fields of :class:`flashest.harness.ExperimentSpec`.
A ``--config`` JSON file with the same field names overrides the flags.
Validation errors exit with status 2; IO errors exit with status 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .binning import STRATEGIES, BinBoundaries, Histogram, make_bins, measure_histogram
from .channel_model import PARAM_NAMES, ChannelParams, LevelLayout, load_config, sample_reads
from .estimation import SOLVERS, CostContext, SolverConfig, solve


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def _params_arg(text: str) -> ChannelParams:
    """Five comma-separated values or a JSON file with parameter names as keys."""
    if Path(text).is_file():
        return ChannelParams.from_dict(_read_json(text))
    values = _float_list(text)
    if len(values) != 5:
        raise UsageError(
            f"expected 5 values ({', '.join(PARAM_NAMES)}) or a JSON file, got {text!r}"
        )
    return ChannelParams.from_array(values)


def _add_layout_flags(p):
    p.add_argument("--levels", type=_float_list, help="comma-separated level voltages (default 0,1,2,3)")
    p.add_argument("--cells", type=int, help="total cells, split evenly across levels (default 1e6)")


def _add_bin_flags(p):
    p.add_argument("--bin-strategy", choices=STRATEGIES, help="bin placement (default equal_probability)")
    p.add_argument("-M", type=int, dest="M", help="number of bins (default 10)")


def _add_solver_flags(p):
    p.add_argument("--solver", choices=sorted(SOLVERS), help="default lm")
    p.add_argument("--init", help="starting point: 5 comma-separated values or a JSON file")
    p.add_argument("--eta", type=float, help="step-norm stopping threshold")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--lm-scaling", choices=("running_max", "current"))


def _add_experiment_flags(p):
    p.add_argument("--config", help="experiment JSON; its keys override the flags")
    p.add_argument("--trajectory", help="trajectory JSON (default: bundled synthetic trajectory)")
    _add_layout_flags(p)
    _add_bin_flags(p)
    _add_solver_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--reference-mode", choices=harness.REFERENCE_MODES, help="default analytic")
    p.add_argument("--bin-source", choices=harness.BIN_SOURCES,
                   help="place bins from each condition's truth (default) or from --init")
    p.add_argument("--workers", type=int, help="parallel worker processes (default 1)")
    p.add_argument("--json", dest="json_out", help="write the full report as JSON")
    p.add_argument("--csv", dest="csv_out", help="write the main table as CSV")


def _solver_config_from(args, base: dict | None = None) -> dict:
    cfg = dict(base or {})
    for flag, key in (("eta", "eta"), ("max_iterations", "max_iterations"), ("lm_scaling", "lm_scaling")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[key] = value
    return cfg


def spec_from_args(args) -> harness.ExperimentSpec:
    """Merge flags and the optional config file into an ExperimentSpec."""
    data: dict = {}
    if args.trajectory:
        data["trajectory"] = args.trajectory
    if args.levels:
        data["levels"] = args.levels
    if args.cells is not None:
        data["cells"] = args.cells
    for key in ("bin_strategy", "M", "solver", "seed", "reference_mode", "bin_source", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "window", None):
        data["equal_width_window"] = args.window
    if args.init:
        data["init"] = _params_arg(args.init).to_dict()
    solver_cfg = _solver_config_from(args)
    if args.config:
        overrides = _read_json(args.config)
        if not isinstance(overrides, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
        solver_cfg.update(overrides.pop("solver_config", {}))
        if "layout" in overrides:
            data.pop("levels", None)
            data.pop("cells", None)
        data.update(overrides)
    if solver_cfg:
        data["solver_config"] = solver_cfg
    return harness.ExperimentSpec.from_dict(data)


def _layout_from(args) -> LevelLayout:
    kwargs = {}
    if args.levels:
        kwargs["levels"] = tuple(args.levels)
    if args.cells is not None:
        kwargs["cells"] = args.cells
    return LevelLayout.default(**kwargs)


def _emit(report, args, table=None):
    if args.json_out:
        harness.emit_report(report, "json", args.json_out)
    if args.csv_out:
        harness.emit_report(report, "csv", args.csv_out, table=table)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _channel_from(args) -> tuple[ChannelParams, LevelLayout]:
    if args.params_config:
        params, layout = load_config(args.params_config)
        if args.levels or args.cells is not None:
            layout = _layout_from(args)
        return params, layout
    params = _params_arg(args.params) if args.params else harness.REFERENCE_PARAMS
    return params, _layout_from(args)


def cmd_simulate(args) -> int:
    params, layout = _channel_from(args)
    if args.bins:
        bins = BinBoundaries.load_json(args.bins)
    else:
        bins = make_bins(args.bin_strategy or "equal_probability", params, layout, args.M or 10)
    reads = sample_reads(params, layout, np.random.SeedSequence(args.seed or 0))
    hist = measure_histogram(reads.y, bins)
    hist.write_csv(args.out, bins)
    if args.reads_out:
        np.savetxt(args.reads_out, np.column_stack([reads.level_index, reads.y]),
                   delimiter=",", header="level_index,y", comments="", fmt=["%d", "%.17g"])
    print(f"wrote {hist.M}-bin histogram of {layout.total} reads to {args.out}")
    return 0


def cmd_bins(args) -> int:
    params, layout = _channel_from(args)
    bins = make_bins(args.bin_strategy or "equal_probability", params, layout, args.M or 10)
    bins.save_json(args.out)
    print(json.dumps(bins.to_dict()))
    return 0


def cmd_estimate(args) -> int:
    hist, bins = Histogram.read_csv(args.histogram)
    truth = None
    if args.params_config:
        truth, layout = load_config(args.params_config)
    else:
        if args.cells is None:
            args.cells = int(round(hist.total))
        layout = _layout_from(args)
    if args.truth:
        truth = _params_arg(args.truth)
    init = _params_arg(args.init) if args.init else harness.DEFAULT_INIT
    config = SolverConfig.from_dict(_solver_config_from(args))
    report = solve(args.solver or "lm", CostContext(hist, bins, layout), init, config, truth=truth)
    text = report.to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args) -> int:
    spec = spec_from_args(args)
    report = harness.run_sweep(spec)
    _emit(report, args)
    if args.tracking_csv:
        harness.emit_report(report, "csv", args.tracking_csv, table="tracking")
    if args.table_csv or args.table_json:
        table = harness.run_convergence_table(spec)
        if args.table_csv:
            harness.emit_report(table, "csv", args.table_csv)
        if args.table_json:
            harness.emit_report(table, "json", args.table_json)
    print(f"{spec.solver}: {report.convergence_count}/{len(report.conditions)} conditions within 1%")
    return 0


def cmd_binning_study(args) -> int:
    spec = spec_from_args(args)
    study = harness.run_binning_study(spec)
    _emit(study, args)
    for row in study.rows:
        print(f"{row.pe_cycles:>6} {row.strategy:<18} D_E2={row.discretization_error:.6g} "
              f"resolution={row.effective_resolution}")
    return 0


def cmd_read_count_study(args) -> int:
    spec = spec_from_args(args)
    study = harness.run_read_count_study(spec)
    _emit(study, args)
    header, rows = study.tables()["stats"]
    print(",".join(header))
    for row in rows:
        print(",".join(str(v) for v in row))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flashest", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def channel_flags(p):
        p.add_argument("--params-config", help="JSON with the five parameters plus levels and counts")
        p.add_argument("--params", help="5 comma-separated values or a JSON file (default: 3000 P/E anchor)")
        _add_layout_flags(p)

    p = sub.add_parser("simulate", help="sample reads and write a histogram CSV")
    channel_flags(p)
    _add_bin_flags(p)
    p.add_argument("--bins", help="bin boundaries JSON (overrides --bin-strategy/-M)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="histogram CSV path")
    p.add_argument("--reads-out", help="optional CSV of raw reads")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bins", help="place bin boundaries")
    channel_flags(p)
    _add_bin_flags(p)
    p.add_argument("--out", required=True, help="bin boundaries JSON path")
    p.set_defaults(func=cmd_bins)

    p = sub.add_parser("estimate", help="fit parameters to a histogram CSV")
    p.add_argument("--histogram", required=True)
    p.add_argument("--params-config", help="JSON supplying the layout (and truth for the 1%% check)")
    p.add_argument("--truth", help="true parameters for the 1%% check")
    _add_layout_flags(p)
    _add_solver_flags(p)
    p.add_argument("--out", help="report JSON path (default stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="fit every trajectory condition")
    _add_experiment_flags(p)
    p.add_argument("--tracking-csv", help="write pe_cycles, true and estimated gamma_mu_r")
    p.add_argument("--table-csv", help="also run GD/GN/LM at 6, 9 and 12 reads; write counts CSV")
    p.add_argument("--table-json", help="as --table-csv, full JSON")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("binning-study", help="D_E^2 and effective resolution per strategy")
    _add_experiment_flags(p)
    p.add_argument("--window", choices=harness.WINDOWS,
                   help="equal-width range: per condition (default) or whole lifetime")
    p.set_defaults(func=cmd_binning_study)

    p = sub.add_parser("read-count-study", help="LM iteration statistics at 6, 9, 12 reads")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_read_count_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, TypeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
