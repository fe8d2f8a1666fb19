"""Benchmark protocol: 10-year holdout, model pipelines, and aggregation.

Every country's matrix is split into a training part and the last 10
years. The Lee-Carter pipelines fit the decomposition on the training log
rates, forecast each index component with either a random walk with drift
or stepwise auto-ARIMA, and exponentiate the projection back to rates.
The LSTM pipelines pool training windows under the chosen regime, train
one network per country or one global network, and roll recursive
forecasts per (country, age).

Forecasting code only ever receives the training part of a split, so test
data cannot leak into any forecast. Per-(country, age) metrics are
aggregated as unweighted means over all cells; per-country and per-age
marginals plus pairwise win counts come from the same grid.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arima import ArimaFit, ArimaSpec, auto_select, fit_rw_drift, forecast
from .errors import AggregationError, InsufficientDataError
from .hmd import DatasetRegistry, MortalityMatrix, Sex
from .leecarter import DEFAULT_RATE_FLOOR, LeeCarter, log_transform
from .metrics import METRIC_NAMES, ForecastMetrics, compute_metrics
from .lstm import LstmForecaster, build_dataset

DEFAULT_HORIZON = 10
SELECTIONS = ("rw_drift", "auto")

# four Lee-Carter variants and three LSTM training regimes
LSTM_MODEL_NAMES = {"country": "lstm_country", "world": "lstm_world", "coed": "lstm_coed"}


def lc_model_name(order: int, selection: str) -> str:
    if selection not in SELECTIONS:
        raise ValueError(f"unknown selection {selection!r}, expected one of {SELECTIONS}")
    if order == 1:
        return "lc" if selection == "rw_drift" else "lc_auto"
    if selection == "rw_drift":
        return f"lc_higher{order}"
    return f"lc_auto_higher{order}"


@dataclass
class HoldoutSplit:
    """Training years and the final `horizon` test years of one matrix."""

    train: MortalityMatrix
    test: MortalityMatrix


def split_holdout(matrix: MortalityMatrix, horizon: int = DEFAULT_HORIZON) -> HoldoutSplit:
    """Reserve the last ``horizon`` years; the rest is for fitting.

    Requires at least horizon + 17 years so the training part can hold at
    least one 16-step window plus its target.
    """
    if matrix.n_years < horizon + 17:
        raise InsufficientDataError(
            f"{matrix.country}/{matrix.sex}: {matrix.n_years} years is too short for a "
            f"{horizon}-year holdout (need {horizon + 17})"
        )
    cut = matrix.n_years - horizon
    train = MortalityMatrix(
        country=matrix.country,
        sex=matrix.sex,
        years=matrix.years[:cut],
        rates=matrix.rates[:, :cut].copy(),
    )
    test = MortalityMatrix(
        country=matrix.country,
        sex=matrix.sex,
        years=matrix.years[cut:],
        rates=matrix.rates[:, cut:].copy(),
    )
    return HoldoutSplit(train=train, test=test)


@dataclass
class ForecastSet:
    """Per-(country, age) rate forecasts of one model, plus run diagnostics."""

    model: str
    horizon: int
    entries: dict[tuple[str, int], np.ndarray] = field(default_factory=dict)
    arima_orders: dict[tuple[str, str], ArimaSpec] = field(default_factory=dict)
    errors: list[tuple[str, str]] = field(default_factory=list)

    def merge(self, other: "ForecastSet") -> None:
        if other.model != self.model or other.horizon != self.horizon:
            raise ValueError("can only merge forecast sets of the same model/horizon")
        self.entries.update(other.entries)
        self.arima_orders.update(other.arima_orders)
        self.errors.extend(other.errors)


def _index_series_label(component: int, order: int) -> str:
    return "k" if order == 1 else f"k{component + 1}"


def _forecast_index(series: np.ndarray, selection: str, horizon: int) -> tuple[np.ndarray, ArimaFit]:
    fit = fit_rw_drift(series) if selection == "rw_drift" else auto_select(series)
    return forecast(fit, series, horizon), fit


def run_lc_pipeline(
    split: HoldoutSplit,
    order: int = 1,
    selection: str = "rw_drift",
    horizon: int = DEFAULT_HORIZON,
    floor: float = DEFAULT_RATE_FLOOR,
) -> ForecastSet:
    """Lee-Carter forecasts for one country: fit, extrapolate indices, project.

    Each index component is forecast independently; the projected log
    rates are exponentiated, so all forecast rates are positive.
    """
    if selection not in SELECTIONS:
        raise ValueError(f"unknown selection {selection!r}, expected one of {SELECTIONS}")
    result = ForecastSet(model=lc_model_name(order, selection), horizon=horizon)
    country = split.train.country
    logm = log_transform(split.train, floor=floor)
    lc = LeeCarter(order=order).fit(logm)
    kt_future = np.empty((order, horizon))
    for i in range(order):
        kt_future[i], fit = _forecast_index(lc.kt_[i], selection, horizon)
        if selection == "auto":
            result.arima_orders[(country, _index_series_label(i, order))] = fit.spec
    rates = np.exp(lc.project(kt_future))
    for age in range(rates.shape[0]):
        result.entries[(country, age)] = rates[age]
    return result


def _split_registry(
    registry: DatasetRegistry, horizon: int
) -> tuple[DatasetRegistry, list[tuple[str, str]]]:
    """Registry of training halves; countries too short to split are dropped
    (all sexes) and reported."""
    train = DatasetRegistry(min_years=registry.min_years)
    failures: list[tuple[str, str]] = []
    bad_countries = set()
    for (country, _), matrix in sorted(registry.entries.items(), key=lambda kv: kv[0][0]):
        try:
            train.add(split_holdout(matrix, horizon).train)
        except InsufficientDataError as exc:
            if country not in bad_countries:
                failures.append((country, str(exc)))
            bad_countries.add(country)
    for key in [key for key in train.entries if key[0] in bad_countries]:
        del train.entries[key]
    return train, failures


def run_lstm_pipeline(
    registry: DatasetRegistry,
    regime: str,
    config: dict | None = None,
    horizon: int = DEFAULT_HORIZON,
    floor: float = DEFAULT_RATE_FLOOR,
) -> ForecastSet:
    """Train under one regime and forecast every country's total rates.

    The "country" regime trains one model per country; "world" and "coed"
    train a single pooled model. A per-country failure skips that country
    and is recorded on the returned set; the other countries proceed.
    """
    config = dict(config or {})
    result = ForecastSet(model=LSTM_MODEL_NAMES[regime], horizon=horizon)
    train_registry, split_failures = _split_registry(registry, horizon)
    result.errors.extend(split_failures)
    countries = train_registry.countries()
    unroll = config.get("unroll", 16)

    shared: LstmForecaster | None = None
    if regime in ("world", "coed"):
        dataset = build_dataset(train_registry, regime, unroll=unroll, floor=floor)
        shared = LstmForecaster(**config).fit(dataset)

    for country in countries:
        try:
            if shared is None:
                dataset = build_dataset(
                    train_registry, "country", country=country, unroll=unroll, floor=floor
                )
                model = LstmForecaster(**config).fit(dataset)
            else:
                model = shared
            train = train_registry.get(country, Sex.TOTAL)
            histories = np.log(np.maximum(train.rates, floor))
            forecasts = np.exp(model.forecast_matrix(histories, horizon))
            for age in range(histories.shape[0]):
                result.entries[(country, age)] = forecasts[age]
        except Exception as exc:  # noqa: BLE001 - isolate per-country failures
            result.errors.append((country, str(exc)))
    return result


@dataclass(frozen=True)
class MetricRecord:
    model: str
    country: str
    age: int
    metrics: ForecastMetrics


def evaluate_forecasts(
    forecast_sets: list[ForecastSet],
    registry: DatasetRegistry,
    horizon: int = DEFAULT_HORIZON,
) -> list[MetricRecord]:
    """Score every forecast cell against the held-out test years."""
    records = []
    tests: dict[str, MortalityMatrix] = {}
    for fset in forecast_sets:
        for (country, age), predicted in sorted(fset.entries.items()):
            if country not in tests:
                tests[country] = split_holdout(registry.get(country, Sex.TOTAL), horizon).test
            actual = tests[country].rates[age]
            records.append(
                MetricRecord(fset.model, country, age, compute_metrics(actual, predicted))
            )
    return records


@dataclass(frozen=True)
class WinCount:
    model_a: str
    model_b: str
    metric: str
    axis: str  # "country" or "age"
    wins_a: int
    wins_b: int
    ties: int

    @property
    def pct_a(self) -> float:
        total = self.wins_a + self.wins_b + self.ties
        return 100.0 * self.wins_a / total if total else 0.0

    @property
    def pct_b(self) -> float:
        total = self.wins_a + self.wins_b + self.ties
        return 100.0 * self.wins_b / total if total else 0.0


@dataclass
class EvaluationReport:
    """Aggregates of the per-(model, country, age) metric grid."""

    records: list[MetricRecord]
    overall: dict[str, dict[str, float]]
    by_country: dict[tuple[str, str], dict[str, float]]
    by_age: dict[tuple[str, int], dict[str, float]]
    wins: list[WinCount]
    metadata: dict

    def models(self) -> list[str]:
        return sorted(self.overall)


def _mean_metrics(cells: list[ForecastMetrics]) -> dict[str, float]:
    return {
        name: float(np.mean([getattr(m, name) for m in cells])) for name in METRIC_NAMES
    }


def aggregate(records: list[MetricRecord]) -> EvaluationReport:
    """Unweighted means over (country, age) cells, marginals, and win counts.

    Requires a complete grid: every model must cover the same cells.
    Win counts compare per-country / per-age marginals pairwise with
    strict inequality (lower wins; mean error by absolute value); ties
    count for neither model.
    """
    by_model: dict[str, dict[tuple[str, int], ForecastMetrics]] = {}
    for rec in records:
        by_model.setdefault(rec.model, {})[(rec.country, rec.age)] = rec.metrics
    if not by_model:
        raise AggregationError("no metric records to aggregate")
    all_cells = sorted(set().union(*(set(cells) for cells in by_model.values())))
    gaps = [
        f"{model} missing {len(set(all_cells) - set(cells))} cells"
        for model, cells in sorted(by_model.items())
        if set(cells) != set(all_cells)
    ]
    if gaps:
        raise AggregationError("ragged metric grid: " + "; ".join(gaps))

    countries = sorted({country for country, _ in all_cells})
    ages = sorted({age for _, age in all_cells})

    overall = {}
    by_country = {}
    by_age = {}
    for model, cells in sorted(by_model.items()):
        overall[model] = _mean_metrics(list(cells.values()))
        for country in countries:
            subset = [m for (c, _), m in cells.items() if c == country]
            by_country[(model, country)] = _mean_metrics(subset)
        for age in ages:
            subset = [m for (_, a), m in cells.items() if a == age]
            by_age[(model, age)] = _mean_metrics(subset)

    wins = []
    models = sorted(by_model)
    for ia, model_a in enumerate(models):
        for model_b in models[ia + 1 :]:
            for metric in METRIC_NAMES:
                for axis, keys, table in (
                    ("country", countries, by_country),
                    ("age", ages, by_age),
                ):
                    wins_a = wins_b = ties = 0
                    for key in keys:
                        va = table[(model_a, key)][metric]
                        vb = table[(model_b, key)][metric]
                        if metric == "me":
                            va, vb = abs(va), abs(vb)
                        if va < vb:
                            wins_a += 1
                        elif vb < va:
                            wins_b += 1
                        else:
                            ties += 1
                    wins.append(
                        WinCount(model_a, model_b, metric, axis, wins_a, wins_b, ties)
                    )

    return EvaluationReport(
        records=records,
        overall=overall,
        by_country=by_country,
        by_age=by_age,
        wins=wins,
        metadata={
            "aggregation": "unweighted mean over (country, age) cells",
            "n_countries": len(countries),
            "n_ages": len(ages),
            "win_rule": "strict inequality, ties count for neither; me compared by absolute value",
        },
    )


def _fmt(value: float) -> str:
    return format(value, ".12g")


def write_report(
    report: EvaluationReport,
    forecast_sets: list[ForecastSet],
    registry: DatasetRegistry,
    output_dir: str | Path,
    horizon: int = DEFAULT_HORIZON,
) -> list[Path]:
    """Emit the CSV report files; returns the written paths.

    Files: metrics.csv, by_country.csv, by_age.csv, summary.csv (metric
    rows by model columns), wins.csv, arima_orders.csv, forecasts.csv,
    errors.csv, and report_meta.json with the aggregation conventions.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def open_csv(name):
        path = output_dir / name
        written.append(path)
        return path.open("w", newline="", encoding="utf-8")

    with open_csv("metrics.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "country", "age"] + list(METRIC_NAMES))
        for rec in sorted(report.records, key=lambda r: (r.model, r.country, r.age)):
            writer.writerow(
                [rec.model, rec.country, rec.age]
                + [_fmt(getattr(rec.metrics, name)) for name in METRIC_NAMES]
            )

    with open_csv("by_country.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "country"] + list(METRIC_NAMES))
        for (model, country), values in sorted(report.by_country.items()):
            writer.writerow(
                [model, country] + [_fmt(values[name]) for name in METRIC_NAMES]
            )

    with open_csv("by_age.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "age"] + list(METRIC_NAMES))
        for (model, age), values in sorted(report.by_age.items()):
            writer.writerow([model, age] + [_fmt(values[name]) for name in METRIC_NAMES])

    with open_csv("summary.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        models = report.models()
        writer.writerow(["metric"] + models)
        for name in METRIC_NAMES:
            writer.writerow([name] + [_fmt(report.overall[model][name]) for model in models])

    with open_csv("wins.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["model_a", "model_b", "metric", "axis", "wins_a", "wins_b", "ties", "pct_a", "pct_b"]
        )
        for win in report.wins:
            writer.writerow(
                [
                    win.model_a,
                    win.model_b,
                    win.metric,
                    win.axis,
                    win.wins_a,
                    win.wins_b,
                    win.ties,
                    _fmt(win.pct_a),
                    _fmt(win.pct_b),
                ]
            )

    with open_csv("arima_orders.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["country", "series", "p", "d", "q"])
        orders: dict[tuple[str, str], ArimaSpec] = {}
        for fset in forecast_sets:
            orders.update(fset.arima_orders)
        for (country, series), spec in sorted(orders.items()):
            writer.writerow([country, series, spec.p, spec.d, spec.q])

    with open_csv("forecasts.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["country", "age", "year", "model", "rate"])
        test_years: dict[str, list[int]] = {}
        for fset in sorted(forecast_sets, key=lambda s: s.model):
            for (country, age), values in sorted(fset.entries.items()):
                if country not in test_years:
                    matrix = registry.get(country, Sex.TOTAL)
                    test_years[country] = matrix.years[-horizon:]
                for year, rate in zip(test_years[country], values):
                    writer.writerow([country, age, year, fset.model, _fmt(rate)])

    with open_csv("errors.csv") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "country", "message"])
        for fset in sorted(forecast_sets, key=lambda s: s.model):
            for country, message in sorted(fset.errors):
                writer.writerow([fset.model, country, message])

    meta_path = output_dir / "report_meta.json"
    meta_path.write_text(json.dumps(report.metadata, indent=2, sort_keys=True) + "\n")
    written.append(meta_path)
    return written
