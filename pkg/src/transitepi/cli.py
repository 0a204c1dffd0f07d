"""Command-line pipeline: generate | ingest | classify | simulate | sweep | analyze.

Every parameter can come from a JSON spec file (--spec) or a flag; flags win.
Data goes to files, logs go to stderr.  Exit codes: 0 success, 1 usage or
configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import classify as classify_mod
from .classify import (
    ClassificationResult,
    DegenerateClusteringError,
    classify_population,
    group_shares,
    group_sizes,
    read_assignments_csv,
    write_assignments_csv,
)
from .contacts import ExposureLog, build_exposure_log, connected_components, degree_distribution, write_histogram_csv
from .flows import DataIntegrityError, GroupMatrix, chord_export, difference_matrix, group_flow_matrix, per_group_summary
from .geo import get_model
from .ingest import (
    SchemaError,
    TripFormat,
    TripRecord,
    filter_by_min_trips,
    parse_trip_records,
    population_vs_threshold,
    trip_frequency_distribution,
    write_trip_csv,
)
from .mobility import DEFAULT_K, mobility_table, write_mobility_csv
from .sim import InfectionEvent, SimConfig, SimOutcome, run_ensemble, write_infection_csv
from .synth import SynthConfig, synthesize

logger = logging.getLogger("transitepi")

DEFAULT_BETA_GRID = (0.05, 0.1, 0.15, 0.25, 0.5, 0.75, 1.0)
DEFAULT_DT_GRID_MINUTES = (0.0, 15.0, 30.0, 60.0, 120.0)
DEFAULT_MIN_TRIPS = 15
OUTDIR_ENV = "TRANSITEPI_OUTDIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


@dataclass
class ExperimentSpec:
    """Everything one experiment needs; mirrors the JSON spec file."""

    dataset: Optional[str] = None
    synth: Optional[SynthConfig] = None
    k: int = DEFAULT_K
    min_trips: int = DEFAULT_MIN_TRIPS
    distance_model: str = "haversine"
    beta: float = 1.0
    dt_minutes: float = 0.0
    n_seeds: int = 500
    infectious_days: float = 5.0
    n_runs: int = 100
    master_seed: int = 0
    beta_grid: Tuple[float, ...] = DEFAULT_BETA_GRID
    dt_grid_minutes: Tuple[float, ...] = DEFAULT_DT_GRID_MINUTES
    output_dir: Optional[str] = None

    def validate_grids(self) -> None:
        for name, grid in (("beta_grid", self.beta_grid), ("dt_grid_minutes", self.dt_grid_minutes)):
            if not grid:
                raise UsageError(f"{name} must be non-empty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise UsageError(f"{name} must be sorted strictly ascending, got {list(grid)}")

    def sim_config(self, beta: Optional[float] = None, dt_minutes: Optional[float] = None) -> SimConfig:
        return SimConfig(
            beta=self.beta if beta is None else beta,
            d_t=60.0 * (self.dt_minutes if dt_minutes is None else dt_minutes),
            n_seeds=self.n_seeds,
            infectious_period=self.infectious_days * 86_400.0,
            n_runs=self.n_runs,
            master_seed=self.master_seed,
        )

    @classmethod
    def from_json_file(cls, path) -> "ExperimentSpec":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        synth = data.pop("synth", None)
        spec = cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})
        if synth is not None:
            spec.synth = SynthConfig.from_dict(synth)
        spec.beta_grid = tuple(float(b) for b in spec.beta_grid)
        spec.dt_grid_minutes = tuple(float(d) for d in spec.dt_grid_minutes)
        return spec


def _fmt_num(x: float) -> str:
    return f"{x:g}"


def _parse_grid(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}")


def _parse_mix(text: str) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        if not value:
            raise argparse.ArgumentTypeError(f"mix entries must look like name=fraction, got {part!r}")
        out[name.strip()] = float(value)
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_trips(path: str, delimiter: str = ",") -> List[TripRecord]:
    records, report = parse_trip_records(path, TripFormat(delimiter=delimiter))
    if report.rejected:
        logger.warning("ingest rejected %d of %d rows", report.rejected, report.total_rows)
    return records


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    spec = ExperimentSpec.from_json_file(args.spec) if getattr(args, "spec", None) else ExperimentSpec()
    for attr, flag in (
        ("dataset", "input"),
        ("k", "k"),
        ("min_trips", "min_trips"),
        ("distance_model", "distance_model"),
        ("beta", "beta"),
        ("dt_minutes", "dt_minutes"),
        ("n_seeds", "seeds"),
        ("infectious_days", "infectious_days"),
        ("n_runs", "runs"),
        ("master_seed", "master_seed"),
        ("beta_grid", "beta_grid"),
        ("dt_grid_minutes", "dt_grid_minutes"),
        ("output_dir", "out_dir"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(spec, attr, value)
    if getattr(args, "synth_config", None):
        spec.synth = SynthConfig.from_json_file(args.synth_config)
    if spec.output_dir is None:
        spec.output_dir = os.environ.get(OUTDIR_ENV)
    return spec


def _resolve_trips(spec: ExperimentSpec, staging: Optional[Path] = None) -> List[TripRecord]:
    """Dataset path wins; otherwise synthesize (and persist when staging)."""
    if spec.dataset:
        return _load_trips(spec.dataset)
    if spec.synth is None:
        raise UsageError("no dataset: pass --input or a synth config")
    _, records = synthesize(spec.synth)
    if staging is not None:
        write_trip_csv(records, staging / "trips.csv")
    return records


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args: argparse.Namespace) -> int:
    if args.synth_config:
        config = SynthConfig.from_json_file(args.synth_config)
    else:
        config = SynthConfig()
    overrides = {
        "n_passengers": args.passengers,
        "n_routes": args.routes,
        "stops_per_route": args.stops_per_route,
        "days": args.days,
        "rng_seed": args.seed,
        "city_extent_km": args.extent_km,
        "min_trips_per_passenger": args.min_trips_per_passenger,
        "archetype_mix": args.mix,
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(config, name, value)
    config.validate()
    _, records = synthesize(config)
    write_trip_csv(records, args.out)
    logger.info("wrote %d trips to %s", len(records), args.out)
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    records, report = parse_trip_records(args.input, TripFormat(delimiter=args.delimiter))
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    filtered = filter_by_min_trips(records, args.min_trips) if args.min_trips > 1 else records
    if args.out:
        write_trip_csv(filtered, args.out)
    if args.freq_csv:
        write_histogram_csv(trip_frequency_distribution(records), args.freq_csv, value_name="trips_per_card")
    if args.population_csv:
        thresholds = [int(t) for t in (args.population_thresholds or "1,2,5,10,15,20,30").split(",")]
        curve = population_vs_threshold(records, thresholds)
        import csv as _csv

        with open(args.population_csv, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["threshold", "population"])
            writer.writerows(curve)
    logger.info(
        "accepted %d/%d rows; %d records after min-trips filter (threshold %d)",
        report.accepted, report.total_rows, len(filtered), args.min_trips,
    )
    return EXIT_OK


def _classify_pipeline(
    trips: Sequence[TripRecord], spec: ExperimentSpec
) -> Tuple[List[TripRecord], ClassificationResult, ExposureLog, Dict[str, int]]:
    """Shared front half: filter, contact log, mobility vectors, classification."""
    filtered = filter_by_min_trips(trips, spec.min_trips)
    if not filtered:
        raise DataIntegrityError(f"no passengers survive the {spec.min_trips}-trip threshold")
    exposures = build_exposure_log(filtered, 0.0)
    model = get_model(spec.distance_model)
    vectors = mobility_table(filtered, exposures, k=spec.k, model=model)
    result = classify_population(vectors)
    encounters = exposures.direct_encounter_counts()
    return filtered, result, exposures, encounters


def cmd_classify(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    trips = _resolve_trips(spec)
    filtered, result, exposures, _ = _classify_pipeline(trips, spec)
    write_assignments_csv(result, args.out_assignments)
    if args.out_summary:
        Path(args.out_summary).write_text(result.to_summary_json() + "\n", encoding="utf-8")
    if args.out_mobility:
        model = get_model(spec.distance_model)
        vectors = mobility_table(filtered, exposures, k=spec.k, model=model)
        write_mobility_csv(vectors, args.out_mobility)
    shares = group_shares(result)
    logger.info("classified %d passengers; shares: %s", len(result.assignments), shares)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    if spec.output_dir is None:
        raise UsageError("simulate needs --out-dir (or TRANSITEPI_OUTDIR)")
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trips = _resolve_trips(spec)
    filtered, result, base_log, encounters = _classify_pipeline(trips, spec)
    population = sorted({r.card_id for r in filtered})
    config = spec.sim_config()
    exposures = base_log if config.d_t == 0.0 else build_exposure_log(filtered, config.d_t)
    ensemble = run_ensemble(
        filtered, config, exposures=exposures, population=population,
        progress=lambda i, n: logger.info("run %d/%d", i, n),
    )
    write_assignments_csv(result, out_dir / "assignments.csv")
    for outcome in ensemble.outcomes:
        write_infection_csv(outcome, out_dir / f"infections_run{outcome.per_run_seed:03d}.csv")
    summary = per_group_summary(ensemble.outcomes, result.assignments, encounters)
    summary.to_csv(out_dir / "group_summary.csv")
    matrix = group_flow_matrix(ensemble.outcomes, result.assignments, group_sizes(result))
    matrix.to_csv(out_dir / "flow_matrix.csv")
    chord_export(matrix, path=out_dir / "chord.json")
    payload = {
        "config": {
            "beta": config.beta,
            "d_t_seconds": config.d_t,
            "n_seeds": config.n_seeds,
            "infectious_period_seconds": config.infectious_period,
            "n_runs": config.n_runs,
            "master_seed": config.master_seed,
        },
        "ensemble": ensemble.summary(),
    }
    (out_dir / "summary.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    logger.info("simulate: mean infections %.1f over %d runs", ensemble.mean_infections, config.n_runs)
    return EXIT_OK


def _matrices_for_dt(
    trips: Sequence[TripRecord],
    population: Sequence[str],
    assignments,
    sizes: Dict[str, int],
    spec: ExperimentSpec,
    dt_minutes: float,
) -> Dict[float, GroupMatrix]:
    exposures = build_exposure_log(list(trips), 60.0 * dt_minutes, cards=population)
    out: Dict[float, GroupMatrix] = {}
    for beta in spec.beta_grid:
        config = spec.sim_config(beta=beta, dt_minutes=dt_minutes)
        ensemble = run_ensemble(list(trips), config, exposures=exposures, population=population)
        out[beta] = group_flow_matrix(ensemble.outcomes, assignments, sizes)
        logger.info("sweep point done: beta=%s dt=%sm", _fmt_num(beta), _fmt_num(dt_minutes))
    return out


def _matrices_for_dt_worker(payload) -> Tuple[float, Dict[float, List[List[float]]]]:
    """Process-pool entry: reload trips from CSV, return plain nested lists."""
    (trips_csv, assignment_rows, spec_dict, dt_minutes) = payload
    spec = ExperimentSpec(**spec_dict)
    trips = filter_by_min_trips(_load_trips(trips_csv), spec.min_trips)
    population = sorted({r.card_id for r in trips})
    assignments = {c: classify_mod.MobilityGroup.from_name(g) for c, g in assignment_rows}
    sizes: Dict[str, int] = {name: 0 for name in classify_mod.GROUP_NAMES}
    for g in assignments.values():
        sizes[g.name] += 1
    matrices = _matrices_for_dt(trips, population, assignments, sizes, spec, dt_minutes)
    return dt_minutes, {beta: m.values.tolist() for beta, m in matrices.items()}


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    spec.validate_grids()
    if spec.output_dir is None:
        raise UsageError("sweep needs --out-dir (or TRANSITEPI_OUTDIR)")
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = out_dir / ".staging"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir()
    try:
        artifacts = _run_sweep(spec, staging, workers=args.workers)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    for name in artifacts:
        os.replace(staging / name, out_dir / name)
    shutil.rmtree(staging, ignore_errors=True)
    logger.info("sweep complete: %d artifacts in %s", len(artifacts), out_dir)
    return EXIT_OK


def _run_sweep(spec: ExperimentSpec, staging: Path, workers: int = 1) -> List[str]:
    """Produce all sweep artifacts inside `staging`; returns their names."""
    trips = _resolve_trips(spec, staging=staging)
    filtered, result, _, encounters = _classify_pipeline(trips, spec)
    population = sorted({r.card_id for r in filtered})
    sizes = group_sizes(result)

    artifacts: List[str] = []
    if (staging / "trips.csv").exists():
        artifacts.append("trips.csv")
    write_assignments_csv(result, staging / "assignments.csv")
    (staging / "classification.json").write_text(result.to_summary_json() + "\n", encoding="utf-8")
    artifacts += ["assignments.csv", "classification.json"]

    matrices: Dict[Tuple[float, float], GroupMatrix] = {}
    if workers > 1 and len(spec.dt_grid_minutes) > 1:
        # workers reload the dataset from disk: either the caller's CSV or
        # the synthesized one staged by _resolve_trips
        trips_csv = spec.dataset or str(staging / "trips.csv")
        spec_dict = {
            k: getattr(spec, k)
            for k in ("k", "min_trips", "distance_model", "n_seeds", "infectious_days",
                      "n_runs", "master_seed", "beta_grid", "dt_grid_minutes")
        }
        rows = sorted((c, g.name) for c, g in result.assignments.items())
        payloads = [(str(trips_csv), rows, spec_dict, dt) for dt in spec.dt_grid_minutes]
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for dt, by_beta in pool.map(_matrices_for_dt_worker, payloads):
                for beta, values in by_beta.items():
                    matrices[(beta, dt)] = GroupMatrix(values=values)
    else:
        for dt in spec.dt_grid_minutes:
            by_beta = _matrices_for_dt(filtered, population, result.assignments, sizes, spec, dt)
            for beta, matrix in by_beta.items():
                matrices[(beta, dt)] = matrix

    manifest = {
        "dataset": spec.dataset or "trips.csv",
        "parameters": {
            "beta_grid": list(spec.beta_grid),
            "dt_grid_minutes": list(spec.dt_grid_minutes),
            "n_seeds": spec.n_seeds,
            "n_runs": spec.n_runs,
            "infectious_days": spec.infectious_days,
            "master_seed": spec.master_seed,
            "min_trips": spec.min_trips,
            "k": spec.k,
        },
        "matrices": [],
        "differences": [],
    }
    for (beta, dt), matrix in sorted(matrices.items()):
        name = f"flow_beta{_fmt_num(beta)}_dt{_fmt_num(dt)}m.csv"
        matrix.to_csv(staging / name)
        artifacts.append(name)
        manifest["matrices"].append({"beta": beta, "dt_minutes": dt, "path": name})

    dt0 = spec.dt_grid_minutes[0]
    for beta in spec.beta_grid:
        for dt in spec.dt_grid_minutes[1:]:
            diff = difference_matrix(matrices[(beta, dt0)], matrices[(beta, dt)])
            name = f"diff_dt{_fmt_num(dt)}m_vs_dt{_fmt_num(dt0)}m_beta{_fmt_num(beta)}.csv"
            diff.to_csv(staging / name)
            artifacts.append(name)
            manifest["differences"].append(
                {"axis": "dt", "beta": beta, "baseline_dt_minutes": dt0, "dt_minutes": dt, "path": name}
            )
    for dt in spec.dt_grid_minutes:
        for b_low, b_high in zip(spec.beta_grid, spec.beta_grid[1:]):
            diff = difference_matrix(matrices[(b_low, dt)], matrices[(b_high, dt)])
            name = f"diff_beta{_fmt_num(b_high)}_vs_beta{_fmt_num(b_low)}_dt{_fmt_num(dt)}m.csv"
            diff.to_csv(staging / name)
            artifacts.append(name)
            manifest["differences"].append(
                {"axis": "beta", "dt_minutes": dt, "baseline_beta": b_low, "beta": b_high, "path": name}
            )

    (staging / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    artifacts.append("manifest.json")
    return artifacts


def cmd_analyze(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    if spec.output_dir is None:
        raise UsageError("analyze needs --out-dir (or TRANSITEPI_OUTDIR)")
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trips = _resolve_trips(spec)
    filtered = filter_by_min_trips(trips, spec.min_trips)
    assignments = read_assignments_csv(args.assignments)
    exposures = build_exposure_log(filtered, 0.0)
    encounters = exposures.direct_encounter_counts()

    events_dir = Path(args.events_dir)
    event_files = sorted(events_dir.glob("infections_run*.csv"))
    if not event_files:
        raise DataIntegrityError(f"no infections_run*.csv files under {events_dir}")
    outcomes = [_read_outcome_csv(path) for path in event_files]

    summary = per_group_summary(outcomes, assignments, encounters)
    summary.to_csv(out_dir / "group_summary.csv")
    sizes: Dict[str, int] = {name: 0 for name in classify_mod.GROUP_NAMES}
    for g in assignments.values():
        sizes[g.name] += 1
    matrix = group_flow_matrix(outcomes, assignments, sizes)
    matrix.to_csv(out_dir / "flow_matrix.csv")
    chord_export(matrix, path=out_dir / "chord.json")
    comps = connected_components(exposures, cards={r.card_id for r in filtered})
    write_histogram_csv(degree_distribution(exposures, {r.card_id for r in filtered}),
                        out_dir / "degree_distribution.csv", value_name="degree")
    (out_dir / "components.json").write_text(
        json.dumps({"component_sizes": comps}, indent=2) + "\n", encoding="utf-8"
    )
    logger.info("analyze: %d runs aggregated from %s", len(outcomes), events_dir)
    return EXIT_OK


def _read_outcome_csv(path: Path) -> SimOutcome:
    import csv as _csv

    events: List[InfectionEvent] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        next(reader)
        for row in reader:
            events.append(InfectionEvent(row[0], row[1], float(row[2]), row[3], row[4]))
    return SimOutcome(
        infection_events=events,
        encounter_log={},
        final_state={},
        per_run_seed=-1,
    )


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="transitepi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic trip CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--synth-config", help="SynthConfig JSON file")
    p.add_argument("--passengers", type=int)
    p.add_argument("--routes", type=int)
    p.add_argument("--stops-per-route", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--extent-km", type=float)
    p.add_argument("--min-trips-per-passenger", type=int)
    p.add_argument("--mix", type=_parse_mix, help="e.g. commuter=0.45,roamer=0.3,long_hauler=0.1,offpeak_regular=0.15")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="validate, filter and profile a trip CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--min-trips", type=int, default=DEFAULT_MIN_TRIPS)
    p.add_argument("--out", help="filtered trip CSV")
    p.add_argument("--report", help="IngestReport JSON")
    p.add_argument("--freq-csv", help="trip frequency histogram CSV")
    p.add_argument("--population-csv", help="population vs threshold CSV")
    p.add_argument("--population-thresholds", help="comma-separated thresholds")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("classify", help="assign mobility groups")
    _add_spec_args(p)
    p.add_argument("--out-assignments", required=True)
    p.add_argument("--out-summary")
    p.add_argument("--out-mobility")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="run an SIR ensemble at one grid point")
    _add_spec_args(p)
    p.add_argument("--beta", type=float)
    p.add_argument("--dt-minutes", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="flow matrices over the beta and dt grids")
    _add_spec_args(p)
    p.add_argument("--beta-grid", type=_parse_grid)
    p.add_argument("--dt-grid-minutes", type=_parse_grid)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="re-aggregate stored infection logs")
    _add_spec_args(p)
    p.add_argument("--assignments", required=True)
    p.add_argument("--events-dir", required=True)
    p.set_defaults(func=cmd_analyze)

    return parser


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", help="ExperimentSpec JSON file; flags override it")
    p.add_argument("--input", help="trip CSV path")
    p.add_argument("--synth-config", help="SynthConfig JSON (used when no --input)")
    p.add_argument("--min-trips", type=int, dest="min_trips")
    p.add_argument("--k", type=int)
    p.add_argument("--distance-model", choices=("haversine", "planar"), dest="distance_model")
    p.add_argument("--seeds", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--infectious-days", type=float, dest="infectious_days")
    p.add_argument("--master-seed", type=int, dest="master_seed")
    p.add_argument("--out-dir", dest="out_dir")


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except (SchemaError, DataIntegrityError, DegenerateClusteringError, OSError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
