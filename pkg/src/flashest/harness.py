"""Experiment runner: sweeps over a P/E-cycling trajectory and plot-ready reports.

A sweep takes a list of operating conditions (one set of true channel
parameters per P/E count), builds a reference histogram at each, fits the
channel parameters from a common starting point and records whether the fit
landed within 1% of the truth.  The studies below aggregate sweeps into the
tables that are usually plotted: convergence counts per solver and read
count, discretization error and effective resolution per binning strategy,
and iteration-count statistics per read count.

Every result is a pure function of the :class:`ExperimentSpec`.  Monte-Carlo
references draw from a stream seeded by ``(seed, pe_cycles)`` so a condition
gives the same histogram regardless of which worker runs it or in what order.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .binning import (
    STRATEGIES,
    BinBoundaries,
    Histogram,
    discretization_error,
    effective_resolution,
    equal_width_bins,
    make_bins,
    measure_histogram,
    mixture_bin_probabilities,
    model_support,
)
from .channel_model import PARAM_NAMES, ChannelParams, LevelLayout, sample_reads
from .estimation import CostContext, SolverConfig, SolverReport, SOLVERS, solve

SCHEMA_VERSION = 1

#: Ground-truth vector at 3000 P/E used as the anchor of the synthetic trajectory.
REFERENCE_PARAMS = ChannelParams(
    lam=0.0099, sigma_p=0.05, sigma_e=0.35, gamma_sigma_r=0.0617, gamma_mu_r=-0.5882
)
#: Common starting point handed to every solver.
DEFAULT_INIT = ChannelParams(
    lam=0.007, sigma_p=0.1, sigma_e=0.4, gamma_sigma_r=0.04, gamma_mu_r=-0.4
)

REFERENCE_MODES = ("analytic", "monte_carlo")
BIN_SOURCES = ("truth", "init")
WINDOWS = ("condition", "lifetime")

#: Read counts studied for iteration statistics; M bins need M - 1 reads.
READ_COUNTS = (6, 9, 12)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryPoint:
    pe_cycles: int
    params: ChannelParams

    def __post_init__(self):
        if isinstance(self.pe_cycles, bool) or not isinstance(self.pe_cycles, (int, np.integer)):
            raise TypeError(f"pe_cycles must be an integer, got {self.pe_cycles!r}")
        if self.pe_cycles < 0:
            raise ValueError(f"pe_cycles must be >= 0, got {self.pe_cycles}")
        if not isinstance(self.params, ChannelParams):
            raise TypeError("params must be a ChannelParams")

    def to_dict(self) -> dict:
        return {"pe_cycles": int(self.pe_cycles), **self.params.to_dict()}


class TrajectoryError(ValueError):
    """A trajectory file that does not follow the expected schema."""


def _point_from_record(index: int, record) -> TrajectoryPoint:
    if not isinstance(record, dict):
        raise TrajectoryError(f"entry {index}: expected an object, got {type(record).__name__}")
    for key in ("pe_cycles", *PARAM_NAMES):
        if key not in record:
            raise TrajectoryError(f"entry {index}: missing field {key!r}")
    pe = record["pe_cycles"]
    if isinstance(pe, float) and pe.is_integer():
        pe = int(pe)
    if isinstance(pe, bool) or not isinstance(pe, int):
        raise TrajectoryError(f"entry {index}: field 'pe_cycles' must be an integer, got {pe!r}")
    for key in PARAM_NAMES:
        value = record[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TrajectoryError(f"entry {index}: field {key!r} must be a number, got {value!r}")
    try:
        params = ChannelParams.from_dict(record)
        point = TrajectoryPoint(pe, params)
    except (TypeError, ValueError) as exc:
        raise TrajectoryError(f"entry {index}: {exc}") from exc
    params.warn_if_implausible(context=f"trajectory entry {index} ({pe} P/E)")
    return point


def parse_trajectory(records) -> list[TrajectoryPoint]:
    """Validate decoded JSON records and return points sorted by P/E count.

    Duplicate P/E counts keep the last occurrence.  Raises
    :class:`TrajectoryError` naming the offending entry and field.
    """
    if isinstance(records, dict) and "points" in records:
        records = records["points"]
    if not isinstance(records, list):
        raise TrajectoryError("trajectory must be a JSON array of condition objects")
    if not records:
        raise TrajectoryError("trajectory is empty")
    by_pe: dict[int, TrajectoryPoint] = {}
    for index, record in enumerate(records):
        point = _point_from_record(index, record)
        by_pe[point.pe_cycles] = point
    return [by_pe[pe] for pe in sorted(by_pe)]


def load_trajectory(path) -> list[TrajectoryPoint]:
    """Read a trajectory JSON file.

    The file holds an array of objects with keys ``pe_cycles`` and the five
    parameter names (``lambda``, ``sigma_p``, ``sigma_e``, ``gamma_sigma_r``,
    ``gamma_mu_r``).  An object ``{"source": ..., "points": [...]}`` is also
    accepted.  JSON syntax errors are reported with their line number.
    """
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise TrajectoryError(f"{path}: trajectory file is empty")
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TrajectoryError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    try:
        return parse_trajectory(records)
    except TrajectoryError as exc:
        raise TrajectoryError(f"{path}: {exc}") from exc


def save_trajectory(path, trajectory: Sequence[TrajectoryPoint], source: Optional[str] = None):
    points = [p.to_dict() for p in trajectory]
    payload = {"source": source, "points": points} if source else points
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def synthetic_trajectory(
    pe_cycles: Sequence[int] = tuple(range(0, 4000, 300)),
    anchor: ChannelParams = REFERENCE_PARAMS,
    anchor_pe: int = 3000,
    offset: float = 1000.0,
) -> list[TrajectoryPoint]:
    """Synthetic wear trajectory passing through ``anchor`` at ``anchor_pe``.

    With ``s = (pe + offset) / (anchor_pe + offset)`` the wear-out scale grows
    linearly in ``s`` and both retention coefficients grow as ``sqrt(s)``;
    the two programming spreads stay fixed.  This is a stand-in for a measured
    degradation model, not a measurement.
    """
    points = []
    for pe in pe_cycles:
        s = (pe + offset) / (anchor_pe + offset)
        params = replace(
            anchor,
            lam=anchor.lam * s,
            gamma_sigma_r=anchor.gamma_sigma_r * math.sqrt(s),
            gamma_mu_r=anchor.gamma_mu_r * math.sqrt(s),
        )
        points.append(TrajectoryPoint(int(pe), params))
    return points


def default_trajectory() -> list[TrajectoryPoint]:
    """The bundled 14-point synthetic trajectory (0 to 3900 P/E, step 300)."""
    ref = resources.files("flashest").joinpath("data/synthetic_trajectory.json")
    with resources.as_file(ref) as path:
        return load_trajectory(path)


# ---------------------------------------------------------------------------
# experiment description
# ---------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    """Everything a sweep depends on.

    ``layout`` fixes the cell count ``N``; ``cells`` is kept as a field so the
    count is visible in reports and is checked against the layout.
    ``bin_source`` chooses whether bins are placed from each condition's true
    parameters or from ``init``.  ``equal_width_window`` only affects the
    binning study: ``"condition"`` spans each condition's own read range,
    ``"lifetime"`` uses one range covering the whole trajectory.
    """

    trajectory: list[TrajectoryPoint]
    layout: LevelLayout = field(default_factory=LevelLayout.default)
    cells: Optional[int] = None
    bin_strategy: str = "equal_probability"
    M: int = 10
    solver: str = "lm"
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    init: ChannelParams = DEFAULT_INIT
    seed: int = 0
    reference_mode: str = "analytic"
    bin_source: str = "truth"
    equal_width_window: str = "condition"
    mmi_grid_size: int = 2000
    workers: int = 1

    def __post_init__(self):
        self.trajectory = list(self.trajectory)
        if not self.trajectory:
            raise ValueError("trajectory must contain at least one condition")
        pes = [p.pe_cycles for p in self.trajectory]
        if len(set(pes)) != len(pes):
            raise ValueError("trajectory has duplicate pe_cycles")
        if self.cells is None:
            self.cells = self.layout.total
        elif self.cells != self.layout.total:
            raise ValueError(f"cells={self.cells} but layout holds {self.layout.total} cells")
        if isinstance(self.M, bool) or not isinstance(self.M, (int, np.integer)) or self.M < 2:
            raise ValueError(f"M must be an integer >= 2, got {self.M!r}")
        _check_choice("bin_strategy", self.bin_strategy, STRATEGIES)
        _check_choice("solver", self.solver, tuple(SOLVERS))
        _check_choice("reference_mode", self.reference_mode, REFERENCE_MODES)
        _check_choice("bin_source", self.bin_source, BIN_SOURCES)
        _check_choice("equal_width_window", self.equal_width_window, WINDOWS)
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "trajectory": [p.to_dict() for p in self.trajectory],
            "layout": self.layout.to_dict(),
            "cells": int(self.cells),
            "bin_strategy": self.bin_strategy,
            "M": int(self.M),
            "solver": self.solver,
            "solver_config": self.solver_config.to_dict(),
            "init": self.init.to_dict(),
            "seed": int(self.seed),
            "reference_mode": self.reference_mode,
            "bin_source": self.bin_source,
            "equal_width_window": self.equal_width_window,
            "mmi_grid_size": int(self.mmi_grid_size),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        unknown = set(data) - {f for f in cls.__dataclass_fields__} - {"levels"}
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        if "trajectory" in data:
            traj = data["trajectory"]
            data["trajectory"] = (
                load_trajectory(traj) if isinstance(traj, str) else parse_trajectory(traj)
            )
        else:
            data["trajectory"] = default_trajectory()
        levels = data.pop("levels", None)
        if "layout" in data:
            data["layout"] = LevelLayout.from_dict(data["layout"])
        elif levels is not None or "cells" in data:
            kwargs = {}
            if levels is not None:
                kwargs["levels"] = tuple(float(v) for v in levels)
            if "cells" in data:
                kwargs["cells"] = int(data["cells"])
            data["layout"] = LevelLayout.default(**kwargs)
        if "solver_config" in data:
            data["solver_config"] = SolverConfig.from_dict(data["solver_config"])
        if "init" in data:
            data["init"] = ChannelParams.from_dict(data["init"])
        return cls(**data)


def _check_choice(name, value, allowed):
    if value not in allowed:
        raise ValueError(f"{name} must be one of {tuple(allowed)}, got {value!r}")


# ---------------------------------------------------------------------------
# per-condition work
# ---------------------------------------------------------------------------


def condition_bins(spec: ExperimentSpec, point: TrajectoryPoint) -> BinBoundaries:
    params = point.params if spec.bin_source == "truth" else spec.init
    return make_bins(spec.bin_strategy, params, spec.layout, spec.M, grid_size=spec.mmi_grid_size)


def condition_seed(seed: int, pe_cycles: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(pe_cycles)])


def reference_histogram(spec: ExperimentSpec, point: TrajectoryPoint, bins: BinBoundaries) -> Histogram:
    """Expected counts (analytic) or the histogram of one seeded draw of N reads."""
    if spec.reference_mode == "analytic":
        probs = mixture_bin_probabilities(point.params, spec.layout, bins)
        return Histogram(spec.layout.total * np.asarray(probs, dtype=float))
    reads = sample_reads(point.params, spec.layout, condition_seed(spec.seed, point.pe_cycles))
    return measure_histogram(reads.y, bins)


@dataclass
class ConditionResult:
    pe_cycles: int
    truth: ChannelParams
    bins: Optional[BinBoundaries]
    report: Optional[SolverReport]
    error: Optional[str] = None

    @property
    def converged(self) -> bool:
        return bool(self.report is not None and self.report.within_one_percent)

    def to_dict(self) -> dict:
        return {
            "pe_cycles": int(self.pe_cycles),
            "truth": self.truth.to_dict(),
            "cuts": None if self.bins is None else [float(c) for c in self.bins.cuts],
            "converged": self.converged,
            "error": self.error,
            "report": None if self.report is None else self.report.to_dict(),
        }


def run_condition(spec: ExperimentSpec, point: TrajectoryPoint) -> ConditionResult:
    """Fit one condition; any exception is recorded instead of raised."""
    bins = None
    try:
        bins = condition_bins(spec, point)
        reference = reference_histogram(spec, point, bins)
        ctx = CostContext(reference, bins, spec.layout)
        report = solve(spec.solver, ctx, spec.init, spec.solver_config, truth=point.params)
        return ConditionResult(point.pe_cycles, point.params, bins, report)
    except Exception as exc:  # noqa: BLE001 - a sweep must survive any single condition
        return ConditionResult(
            point.pe_cycles, point.params, bins, None, error=f"{type(exc).__name__}: {exc}"
        )


def _map_conditions(fn, spec: ExperimentSpec, items):
    if spec.workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(fn, [spec] * len(items), items))
    return [fn(spec, item) for item in items]


# ---------------------------------------------------------------------------
# sweeps and studies
# ---------------------------------------------------------------------------


def iteration_stats(iterations: Sequence[int]) -> dict:
    """min/mean/max/std (population) of a list of iteration counts."""
    if len(iterations) == 0:
        return {"n": 0, "min": None, "mean": None, "max": None, "std": None}
    arr = np.asarray(iterations, dtype=float)
    return {
        "n": int(arr.size),
        "min": int(arr.min()),
        "mean": float(arr.mean()),
        "max": int(arr.max()),
        "std": float(arr.std()),
    }


@dataclass
class SweepReport:
    spec: ExperimentSpec
    conditions: list[ConditionResult]

    def __post_init__(self):
        if [c.pe_cycles for c in self.conditions] != [p.pe_cycles for p in self.spec.trajectory]:
            raise ValueError("sweep conditions do not match the trajectory")

    @property
    def convergence_count(self) -> int:
        return sum(c.converged for c in self.conditions)

    @property
    def iterations(self) -> list[int]:
        return [c.report.iterations for c in self.conditions if c.report is not None]

    def iteration_stats(self, converged_only: bool = False) -> dict:
        its = [
            c.report.iterations
            for c in self.conditions
            if c.report is not None and (c.converged or not converged_only)
        ]
        return iteration_stats(its)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "sweep",
            "spec": self.spec.to_dict(),
            "convergence_count": self.convergence_count,
            "conditions_total": len(self.conditions),
            "iteration_stats": self.iteration_stats(),
            "iteration_stats_converged": self.iteration_stats(converged_only=True),
            "conditions": [c.to_dict() for c in self.conditions],
        }

    def tables(self) -> dict:
        header = ["pe_cycles", "converged", "iterations", "final_cost", "error"]
        for name in PARAM_NAMES:
            header += [f"truth_{name}", f"estimate_{name}"]
        rows = []
        for c in self.conditions:
            r = c.report
            row = [
                c.pe_cycles,
                int(c.converged),
                "" if r is None else r.iterations,
                "" if r is None else r.cost_trace[-1],
                c.error or (r.failure if r is not None and r.failure else ""),
            ]
            truth = c.truth.to_dict()
            est = None if r is None else r.estimate.to_dict()
            for name in PARAM_NAMES:
                row += [truth[name], "" if est is None else est[name]]
            rows.append(row)
        tracking = [
            [
                c.pe_cycles,
                c.truth.gamma_mu_r,
                "" if c.report is None else c.report.estimate.gamma_mu_r,
            ]
            for c in self.conditions
        ]
        return {
            "conditions": (header, rows),
            "tracking": (["pe_cycles", "truth_gamma_mu_r", "estimate_gamma_mu_r"], tracking),
        }


def run_sweep(spec: ExperimentSpec) -> SweepReport:
    """Fit every trajectory condition with ``spec.solver`` from ``spec.init``."""
    results = _map_conditions(run_condition, spec, spec.trajectory)
    return SweepReport(spec, results)


@dataclass
class ConvergenceTable:
    """Converged-condition counts by read count (rows) and solver (columns)."""

    read_counts: list[int]
    solvers: list[str]
    sweeps: dict  # (reads, solver) -> SweepReport

    def count(self, reads: int, solver: str) -> int:
        return self.sweeps[(reads, solver)].convergence_count

    def to_dict(self) -> dict:
        any_sweep = next(iter(self.sweeps.values()))
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "convergence_table",
            "conditions_total": len(any_sweep.conditions),
            "read_counts": list(self.read_counts),
            "solvers": list(self.solvers),
            "counts": {
                str(reads): {s: self.count(reads, s) for s in self.solvers}
                for reads in self.read_counts
            },
            "sweeps": {
                f"{reads}:{s}": self.sweeps[(reads, s)].to_dict()
                for reads in self.read_counts
                for s in self.solvers
            },
        }

    def tables(self) -> dict:
        header = ["reads", "M"] + list(self.solvers)
        rows = [
            [reads, reads + 1] + [self.count(reads, s) for s in self.solvers]
            for reads in self.read_counts
        ]
        return {"counts": (header, rows)}


def run_convergence_table(
    spec: ExperimentSpec,
    read_counts: Sequence[int] = READ_COUNTS,
    solvers: Sequence[str] = ("gd", "gn", "lm"),
) -> ConvergenceTable:
    sweeps = {}
    for reads in read_counts:
        for s in solvers:
            sweeps[(reads, s)] = run_sweep(replace(spec, M=reads + 1, solver=s))
    return ConvergenceTable(list(read_counts), list(solvers), sweeps)


@dataclass
class BinningRow:
    pe_cycles: int
    strategy: str
    discretization_error: float
    effective_resolution: int
    cuts: list[float]


@dataclass
class BinningStudy:
    M: int
    window: str
    rows: list[BinningRow]

    def value(self, pe_cycles: int, strategy: str) -> BinningRow:
        for row in self.rows:
            if row.pe_cycles == pe_cycles and row.strategy == strategy:
                return row
        raise KeyError((pe_cycles, strategy))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "binning_study",
            "M": self.M,
            "equal_width_window": self.window,
            "rows": [
                {
                    "pe_cycles": r.pe_cycles,
                    "strategy": r.strategy,
                    "discretization_error": r.discretization_error,
                    "effective_resolution": r.effective_resolution,
                    "cuts": r.cuts,
                }
                for r in self.rows
            ],
        }

    def tables(self) -> dict:
        header = ["pe_cycles", "strategy", "discretization_error", "effective_resolution"]
        rows = [
            [r.pe_cycles, r.strategy, r.discretization_error, r.effective_resolution]
            for r in self.rows
        ]
        return {"metrics": (header, rows)}


def lifetime_window(spec: ExperimentSpec, tail: float = 1e-4) -> tuple[float, float]:
    """Read range covering every condition of the trajectory."""
    spans = [model_support(p.params, spec.layout, tail) for p in spec.trajectory]
    return min(s[0] for s in spans), max(s[1] for s in spans)


def _binning_rows(spec: ExperimentSpec, item) -> list[BinningRow]:
    point, strategies, window = item
    rows = []
    for strategy in strategies:
        if strategy == "equal_width" and window is not None:
            bins = equal_width_bins(window[0], window[1], spec.M)
        else:
            bins = make_bins(strategy, point.params, spec.layout, spec.M, grid_size=spec.mmi_grid_size)
        rows.append(
            BinningRow(
                point.pe_cycles,
                strategy,
                float(discretization_error(point.params, spec.layout, bins)),
                int(effective_resolution(point.params, spec.layout, bins)),
                [float(c) for c in bins.cuts],
            )
        )
    return rows


def run_binning_study(
    spec: ExperimentSpec, strategies: Sequence[str] = STRATEGIES
) -> BinningStudy:
    """Discretization error and effective resolution per strategy and condition.

    Bins are always placed from each condition's true parameters here; the
    study compares placements, not fits.
    """
    for s in strategies:
        _check_choice("strategy", s, STRATEGIES)
    window = lifetime_window(spec) if spec.equal_width_window == "lifetime" else None
    items = [(p, tuple(strategies), window) for p in spec.trajectory]
    chunks = _map_conditions(_binning_rows, spec, items)
    return BinningStudy(int(spec.M), spec.equal_width_window, [r for chunk in chunks for r in chunk])


@dataclass
class ReadCountStudy:
    sweeps: dict  # M -> SweepReport

    def stats(self, M: int, converged_only: bool = False) -> dict:
        return self.sweeps[M].iteration_stats(converged_only)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "read_count_study",
            "per_read_count": [
                {
                    "reads": M - 1,
                    "M": M,
                    "convergence_count": sweep.convergence_count,
                    "conditions_total": len(sweep.conditions),
                    "iterations": sweep.iterations,
                    "stats": sweep.iteration_stats(),
                    "stats_converged": sweep.iteration_stats(converged_only=True),
                }
                for M, sweep in sorted(self.sweeps.items())
            ],
        }

    def tables(self) -> dict:
        header = ["reads", "M", "converged", "n", "min", "mean", "max", "std",
                  "converged_mean", "converged_std"]
        rows = []
        for M, sweep in sorted(self.sweeps.items()):
            s = sweep.iteration_stats()
            c = sweep.iteration_stats(converged_only=True)
            rows.append([M - 1, M, sweep.convergence_count, s["n"], s["min"], s["mean"],
                         s["max"], s["std"], _blank(c["mean"]), _blank(c["std"])])
        return {"stats": (header, rows)}


def _blank(value):
    return "" if value is None else value


def run_read_count_study(
    spec: ExperimentSpec, read_counts: Sequence[int] = READ_COUNTS
) -> ReadCountStudy:
    """LM sweeps at ``M = reads + 1`` for each read count.

    Statistics cover every condition that produced a report, whether or not it
    reached the 1% band; converged-only statistics are reported alongside.
    """
    return ReadCountStudy(
        {reads + 1: run_sweep(replace(spec, M=reads + 1, solver="lm")) for reads in read_counts}
    )


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def report_json(report) -> str:
    """Stable JSON text: sorted keys, no timing fields."""
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"


def emit_report(report, format: str, path, table: Optional[str] = None) -> None:
    """Write ``report`` as JSON or as one of its CSV tables.

    CSV tables per report type:

    * sweep: ``conditions`` (default) and ``tracking`` (P/E, true and
      estimated ``gamma_mu_r``)
    * convergence table: ``counts`` (one row per read count, one column per solver)
    * binning study: ``metrics``
    * read-count study: ``stats``
    """
    path = Path(path)
    try:
        if format == "json":
            path.write_text(report_json(report))
            return
        if format != "csv":
            raise ValueError(f"format must be 'csv' or 'json', got {format!r}")
        tables = report.tables()
        name = table or next(iter(tables))
        if name not in tables:
            raise ValueError(f"unknown table {name!r}; available: {sorted(tables)}")
        header, rows = tables[name]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows([[_csv_cell(v) for v in row] for row in rows])
    except OSError as exc:
        raise OSError(f"could not write report to {path}: {exc}") from exc


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def load_report(path) -> dict:
    data = json.loads(Path(path).read_text())
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported report schema version {version!r}")
    return data

