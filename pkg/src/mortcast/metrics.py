"""Forecast error metrics for the holdout comparison.

All five metrics are computed over the n test points of one
(country, age, model) cell. SMAPE divides each absolute error by half the
sum of the absolute actual and forecast values, so it is bounded by 200;
a term with actual = forecast = 0 contributes 0. ME keeps the sign of
forecast minus actual, so a positive value means over-forecasting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_series

METRIC_NAMES = ("rmse", "mae", "medae", "smape", "me")


@dataclass(frozen=True)
class ForecastMetrics:
    rmse: float
    mae: float
    medae: float
    smape: float
    me: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def compute_metrics(actual, predicted) -> ForecastMetrics:
    """RMSE, MAE, MedAE, SMAPE (percent), and mean error of a forecast."""
    y = check_series(actual, "actual")
    yhat = check_series(predicted, "predicted")
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: actual {y.shape[0]}, predicted {yhat.shape[0]}")

    err = yhat - y
    abs_err = np.abs(err)
    denom = (np.abs(y) + np.abs(yhat)) / 2.0
    terms = np.zeros_like(abs_err)
    np.divide(abs_err, denom, out=terms, where=denom > 0)
    return ForecastMetrics(
        rmse=float(np.sqrt(np.mean(err**2))),
        mae=float(np.mean(abs_err)),
        medae=float(np.median(abs_err)),
        smape=float(100.0 * np.mean(terms)),
        me=float(np.mean(err)),
    )
