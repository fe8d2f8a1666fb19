"""Command-line entry point: ingest, synth, run, forecast.

Experiments are driven by a flat key-value config file (see
DEFAULT_CONFIG for the grammar: ``key = value`` lines, ``#`` comments);
command-line flags override config keys. Identical config, seed and data
produce byte-identical report files. Exit codes: 0 on success, 1 when
nothing could be processed, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import experiments, synth
from .errors import MortcastError
from .hmd import (
    DatasetRegistry,
    Sex,
    apply_exclusions,
    dump_matrix_csv,
    load_hmd_directory,
)

USAGE_ERROR = 2

DEFAULT_CONFIG = """\
# mortcast experiment configuration (key = value; '#' starts a comment)
# data_dir        directory of HMD Mx 1x1 files (required for run/forecast)
# countries       'all' or comma-separated country codes
# min_years       minimum years of data for a country to be included
# horizon         holdout length in years
# lc_orders       comma-separated Lee-Carter orders ('' disables LC)
# lc_selections   rw_drift and/or auto
# lstm_regimes    any of country,world,coed ('' disables the LSTM)
# lstm_*          training hyperparameters
# seed            master seed for training
# jobs            worker processes for per-country model runs
# output_dir      where report CSVs are written
"""

CONFIG_DEFAULTS: dict[str, str] = {
    "data_dir": "",
    "countries": "all",
    "min_years": "30",
    "horizon": "10",
    "lc_orders": "1,3",
    "lc_selections": "rw_drift,auto",
    "lstm_regimes": "country,world,coed",
    "lstm_hidden_dim": "8",
    "lstm_unroll": "16",
    "lstm_batch_size": "128",
    "lstm_learning_rate": "0.001",
    "lstm_epochs": "300",
    "lstm_beta1": "0.9",
    "lstm_beta2": "0.999",
    "lstm_eps": "1e-8",
    "seed": "0",
    "jobs": "1",
    "output_dir": "reports",
}


@dataclass
class ExperimentConfig:
    data_dir: str
    countries: list[str] | None  # None means all
    min_years: int
    horizon: int
    lc_orders: list[int]
    lc_selections: list[str]
    lstm_regimes: list[str]
    lstm: dict = field(default_factory=dict)
    seed: int = 0
    jobs: int = 1
    output_dir: str = "reports"


def parse_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in CONFIG_DEFAULTS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def _csv_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def build_experiment_config(raw: dict[str, str]) -> ExperimentConfig:
    merged = dict(CONFIG_DEFAULTS)
    merged.update(raw)
    if int(merged["horizon"]) < 1:
        raise ValueError("horizon must be >= 1")
    if int(merged["min_years"]) < 1:
        raise ValueError("min_years must be >= 1")
    countries = merged["countries"].strip()
    return ExperimentConfig(
        data_dir=merged["data_dir"],
        countries=None if countries.lower() in ("", "all") else _csv_list(countries),
        min_years=int(merged["min_years"]),
        horizon=int(merged["horizon"]),
        lc_orders=[int(x) for x in _csv_list(merged["lc_orders"])],
        lc_selections=_csv_list(merged["lc_selections"]),
        lstm_regimes=_csv_list(merged["lstm_regimes"]),
        lstm={
            "hidden_dim": int(merged["lstm_hidden_dim"]),
            "unroll": int(merged["lstm_unroll"]),
            "batch_size": int(merged["lstm_batch_size"]),
            "learning_rate": float(merged["lstm_learning_rate"]),
            "epochs": int(merged["lstm_epochs"]),
            "beta1": float(merged["lstm_beta1"]),
            "beta2": float(merged["lstm_beta2"]),
            "eps": float(merged["lstm_eps"]),
            "seed": int(merged["seed"]),
        },
        seed=int(merged["seed"]),
        jobs=int(merged["jobs"]),
        output_dir=merged["output_dir"],
    )


def _load_config(args) -> ExperimentConfig:
    raw = parse_config_file(args.config) if args.config else {}
    for flag in ("seed", "jobs", "output", "data_dir"):
        value = getattr(args, flag, None)
        if value is not None:
            raw["output_dir" if flag == "output" else flag] = str(value)
    config = build_experiment_config(raw)
    config.lstm["seed"] = config.seed
    return config


def _load_registry(config: ExperimentConfig) -> tuple[DatasetRegistry, list[tuple[str, str]]]:
    if not config.data_dir:
        raise MortcastError("no data_dir configured; pass --data-dir or set it in the config")
    registry, failures = load_hmd_directory(config.data_dir, config.countries)
    return apply_exclusions(registry, config.min_years), failures


def _lc_country_worker(task) -> experiments.ForecastSet:
    matrix, order, selection, horizon = task
    split = experiments.split_holdout(matrix, horizon)
    return experiments.run_lc_pipeline(split, order=order, selection=selection, horizon=horizon)


def _lstm_country_worker(task) -> experiments.ForecastSet:
    registry, country, lstm_config, horizon = task
    sub = DatasetRegistry(
        entries={(country, Sex.TOTAL): registry.get(country, Sex.TOTAL)},
        min_years=registry.min_years,
    )
    return experiments.run_lstm_pipeline(sub, "country", lstm_config, horizon=horizon)


def _map_tasks(worker, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


def run_experiment(config: ExperimentConfig, registry: DatasetRegistry) -> tuple[
    list[experiments.ForecastSet], experiments.EvaluationReport | None
]:
    """Execute all configured model pipelines and aggregate the surviving grid."""
    horizon = config.horizon
    forecast_sets: list[experiments.ForecastSet] = []

    for order in config.lc_orders:
        for selection in config.lc_selections:
            model = experiments.lc_model_name(order, selection)
            merged = experiments.ForecastSet(model=model, horizon=horizon)
            tasks = []
            for country in registry.countries():
                tasks.append((registry.get(country, Sex.TOTAL), order, selection, horizon))
            try:
                for part in _map_tasks(_lc_country_worker, tasks, config.jobs):
                    merged.merge(part)
            except MortcastError as exc:
                merged.errors.append(("*", str(exc)))
            forecast_sets.append(merged)

    for regime in config.lstm_regimes:
        if regime == "country":
            merged = experiments.ForecastSet(
                model=experiments.LSTM_MODEL_NAMES[regime], horizon=horizon
            )
            tasks = [
                (registry, country, config.lstm, horizon) for country in registry.countries()
            ]
            for part in _map_tasks(_lstm_country_worker, tasks, config.jobs):
                merged.merge(part)
            forecast_sets.append(merged)
        else:
            forecast_sets.append(
                experiments.run_lstm_pipeline(registry, regime, config.lstm, horizon=horizon)
            )

    populated = [fset for fset in forecast_sets if fset.entries]
    if not populated:
        return forecast_sets, None
    # aggregation needs a full grid: keep countries every populated model covers
    common = set.intersection(*(set(c for c, _ in fset.entries) for fset in populated))
    for fset in populated:
        dropped = sorted({c for c, _ in fset.entries} - common)
        for country in dropped:
            fset.errors.append((country, "dropped from aggregation: not covered by all models"))
        fset.entries = {key: v for key, v in fset.entries.items() if key[0] in common}
    records = experiments.evaluate_forecasts(populated, registry, horizon)
    return forecast_sets, experiments.aggregate(records)


def cmd_ingest(args) -> int:
    config = _load_config(args)
    if not config.data_dir:
        print("error: no data_dir configured", file=sys.stderr)
        return USAGE_ERROR
    registry, failures = load_hmd_directory(config.data_dir, config.countries)
    kept = apply_exclusions(registry, config.min_years)
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    for country, reason in sorted(failures):
        print(f"{country}: excluded ({reason})")
    for country in registry.countries():
        matrix = registry.get(country, Sex.TOTAL)
        if (country, Sex.TOTAL) in kept:
            print(f"{country}: {matrix.n_years} years, included")
            parts = [
                dump_matrix_csv(registry.get(country, sex)) for sex in Sex
            ]
            header, *_ = parts[0].splitlines(keepends=True)
            body = "".join(part.split("\n", 1)[1] for part in parts)
            (output_dir / f"{country}.csv").write_text(header + body, encoding="utf-8")
        else:
            print(
                f"{country}: {matrix.n_years} years, excluded "
                f"(fewer than {config.min_years} years)"
            )
    if not registry.entries:
        print("no datasets could be loaded", file=sys.stderr)
        return 1
    return 0


def cmd_synth(args) -> int:
    registry = synth.generate_registry(
        n_countries=args.countries,
        n_years=args.years,
        order=args.order,
        noise=args.noise,
        seed=args.seed if args.seed is not None else 0,
    )
    paths = synth.write_hmd_files(registry, args.output or "synth_data")
    print(f"wrote {len(paths)} synthetic life tables to {Path(paths[0]).parent}")
    return 0


def cmd_run(args) -> int:
    config = _load_config(args)
    try:
        registry, failures = _load_registry(config)
    except MortcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if not registry.entries:
        print("no datasets passed ingestion", file=sys.stderr)
        return 1
    for country, reason in failures:
        print(f"warning: {country} excluded ({reason})", file=sys.stderr)

    forecast_sets, report = run_experiment(config, registry)
    if report is None:
        print("all model pipelines failed", file=sys.stderr)
        return 1
    paths = experiments.write_report(
        report, forecast_sets, registry, config.output_dir, horizon=config.horizon
    )
    print(f"wrote {len(paths)} report files to {config.output_dir}")
    for model in report.models():
        rmse = report.overall[model]["rmse"]
        print(f"  {model}: overall RMSE {rmse:.6f}")
    return 0


def cmd_forecast(args) -> int:
    config = _load_config(args)
    try:
        registry, _ = _load_registry(config)
    except MortcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if (args.country, Sex.TOTAL) not in registry:
        print(f"error: unknown country {args.country!r}", file=sys.stderr)
        return USAGE_ERROR
    if not 0 <= args.age <= 110:
        print(f"error: age {args.age} out of range 0..110", file=sys.stderr)
        return USAGE_ERROR

    matrix = registry.get(args.country, Sex.TOTAL)
    split = experiments.split_holdout(matrix, config.horizon)
    model = args.model
    lc_variants = {
        experiments.lc_model_name(order, selection): (order, selection)
        for order in (1, 2, 3, 4, 5)
        for selection in experiments.SELECTIONS
    }
    if model in lc_variants:
        order, selection = lc_variants[model]
        fset = experiments.run_lc_pipeline(
            split, order=order, selection=selection, horizon=config.horizon
        )
    elif model in experiments.LSTM_MODEL_NAMES.values():
        regime = {v: k for k, v in experiments.LSTM_MODEL_NAMES.items()}[model]
        scope = registry
        if regime == "country":
            scope = DatasetRegistry(
                entries={(args.country, Sex.TOTAL): matrix}, min_years=registry.min_years
            )
        fset = experiments.run_lstm_pipeline(
            scope, regime, config.lstm, horizon=config.horizon
        )
    else:
        print(f"error: unknown model {model!r}", file=sys.stderr)
        return USAGE_ERROR

    key = (args.country, args.age)
    if key not in fset.entries:
        for country, message in fset.errors:
            print(f"error: {country}: {message}", file=sys.stderr)
        return 1
    print("year,rate,segment")
    for year, rate in zip(matrix.years, matrix.rates[args.age]):
        print(f"{year},{float(rate)!r},history")
    test_years = matrix.years[-config.horizon :]
    for year, rate in zip(test_years, fset.entries[key]):
        print(f"{year},{float(rate)!r},forecast")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mortcast", description="Mortality forecasting benchmark harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--jobs", type=int, help="worker processes for country pipelines")
        p.add_argument("--output", help="output directory")
        p.add_argument("--data-dir", dest="data_dir", help="directory of HMD files")

    p_ingest = sub.add_parser("ingest", help="parse HMD files and write canonical dumps")
    add_common(p_ingest)
    p_ingest.set_defaults(func=cmd_ingest)

    p_synth = sub.add_parser("synth", help="generate a synthetic HMD-style dataset")
    p_synth.add_argument("--countries", type=int, default=20)
    p_synth.add_argument("--years", type=int, default=60)
    p_synth.add_argument("--order", type=int, default=3)
    p_synth.add_argument("--noise", type=float, default=0.02)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--output", help="output directory")
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="run the configured benchmark and write reports")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_forecast = sub.add_parser("forecast", help="print history plus forecast for one cell")
    add_common(p_forecast)
    p_forecast.add_argument("--country", required=True)
    p_forecast.add_argument("--age", type=int, required=True)
    p_forecast.add_argument("--model", required=True)
    p_forecast.set_defaults(func=cmd_forecast)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
