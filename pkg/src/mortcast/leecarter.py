"""Lee-Carter decomposition of log-mortality surfaces.

The model writes log death rates as an age profile plus one or more
bilinear age/time terms:

    ln m[x, t] = a[x] + sum_i b[i, x] * k[i, t] + e[x, t]

with the usual identification (each b component sums to 1, each k
component sums to 0 over the fitted years). Estimation is the classic
two-step: a is the row mean of the log rates, and the b/k components come
from the SVD of the row-centered matrix, one singular triplet per order.
The second-stage re-estimation of k against death counts is deliberately
not implemented.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DegenerateComponentError
from .hmd import MortalityMatrix, Sex
from .svd import jacobi_svd
from .validation import check_fitted, check_matrix

DEFAULT_RATE_FLOOR = 1e-12


@dataclass
class LogMortalityMatrix:
    """Log-transformed mortality matrix; every entry finite by construction."""

    country: str
    sex: Sex
    years: list[int]
    values: np.ndarray  # shape (ages, T)

    @property
    def n_years(self) -> int:
        return len(self.years)


def log_transform(
    matrix: MortalityMatrix, floor: float = DEFAULT_RATE_FLOOR
) -> LogMortalityMatrix:
    """Elementwise ln(max(rate, floor)); the floor keeps zero rates finite."""
    if floor <= 0:
        raise ValueError("floor must be positive")
    return LogMortalityMatrix(
        country=matrix.country,
        sex=matrix.sex,
        years=list(matrix.years),
        values=np.log(np.maximum(matrix.rates, floor)),
    )


class LeeCarter(BaseEstimator):
    """Lee-Carter estimator of order ``order`` (1 = the basic model).

    Parameters
    ----------
    order : int
        Number of bilinear components to extract from the SVD.

    Attributes
    ----------
    ax_ : ndarray of shape (n_ages,)
        Age profile: per-age mean of the log rates over the fitted years.
    bx_ : ndarray of shape (order, n_ages)
        Age responses, each row summing to 1.
    kt_ : ndarray of shape (order, n_years)
        Mortality indices, each row summing to 0.
    singular_values_ : ndarray of shape (order,)
        Singular values of the centered matrix, descending.
    residuals_ : ndarray of shape (n_ages, n_years)
        Centered matrix minus the fitted bilinear terms; the reconstruction
        ``ax_ + bx_.T @ kt_ + residuals_`` reproduces the input exactly.
    padded_components_ : ndarray of bool, shape (order,)
        True for components beyond the numerical rank of the centered
        matrix; those get a uniform bx and a zero kt and act as warnings.
    """

    def __init__(self, order: int = 1):
        self.order = order

    def fit(self, log_rates, y=None) -> "LeeCarter":
        """Fit on an ages x years array (or LogMortalityMatrix) of log rates."""
        values = (
            log_rates.values if isinstance(log_rates, LogMortalityMatrix) else log_rates
        )
        m = check_matrix(values, "log_rates")
        n_ages, n_years = m.shape
        if n_years < 2:
            raise ValueError("need at least 2 years of data to fit")
        if not 1 <= self.order <= min(n_ages, n_years):
            raise ValueError(
                f"order must be in [1, {min(n_ages, n_years)}], got {self.order}"
            )

        ax = m.mean(axis=1)
        centered = m - ax[:, None]
        u, sigma, v = jacobi_svd(centered)

        # components beyond the numerical rank are zero-padded, not estimated
        rank_tol = max(n_ages, n_years) * np.finfo(float).eps * (sigma[0] if len(sigma) else 0.0)

        bx = np.empty((self.order, n_ages))
        kt = np.empty((self.order, n_years))
        singular_values = np.empty(self.order)
        padded = np.zeros(self.order, dtype=bool)
        for i in range(self.order):
            singular_values[i] = sigma[i]
            if sigma[i] <= rank_tol:
                padded[i] = True
                bx[i] = 1.0 / n_ages
                kt[i] = 0.0
                continue
            ui = u[:, i]
            vi = v[:, i]
            colsum = ui.sum()
            if colsum < 0:
                ui = -ui
                vi = -vi
                colsum = -colsum
            elif colsum == 0.0:
                nonzero = np.nonzero(ui)[0]
                if len(nonzero) and ui[nonzero[0]] < 0:
                    ui = -ui
                    vi = -vi
                raise DegenerateComponentError(
                    f"component {i}: singular vector sums to zero, bx undefined"
                )
            bx[i] = ui / colsum
            kt[i] = vi * sigma[i] * colsum

        self.n_ages_ = n_ages
        self.n_years_ = n_years
        self.ax_ = ax
        self.bx_ = bx
        self.kt_ = kt
        self.singular_values_ = singular_values
        self.padded_components_ = padded
        self.residuals_ = centered - bx.T @ kt
        return self

    def project(self, kt_future: np.ndarray) -> np.ndarray:
        """Log-rate surface implied by future index values.

        ``kt_future`` has shape (order, horizon); returns (n_ages, horizon)
        with entries ``ax_[x] + sum_i bx_[i, x] * kt_future[i, h]``.
        """
        check_fitted(self, "ax_")
        kt_future = np.atleast_2d(np.asarray(kt_future, dtype=float))
        if kt_future.shape[0] != self.order:
            raise ValueError(
                f"kt_future must have {self.order} component rows, got {kt_future.shape[0]}"
            )
        return self.ax_[:, None] + self.bx_.T @ kt_future

    def reconstruct(self) -> np.ndarray:
        """Fitted log-rate surface over the training years (excludes residuals)."""
        check_fitted(self, "ax_")
        return self.project(self.kt_)

    def to_json(self, include_residuals: bool = False) -> str:
        check_fitted(self, "ax_")
        payload = {
            "order": self.order,
            "ax": self.ax_.tolist(),
            "bx": self.bx_.tolist(),
            "kt": self.kt_.tolist(),
            "singular_values": self.singular_values_.tolist(),
        }
        if include_residuals:
            payload["residuals"] = self.residuals_.tolist()
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "LeeCarter":
        payload = json.loads(text)
        est = cls(order=int(payload["order"]))
        est.ax_ = np.asarray(payload["ax"], dtype=float)
        est.bx_ = np.asarray(payload["bx"], dtype=float)
        est.kt_ = np.asarray(payload["kt"], dtype=float)
        est.singular_values_ = np.asarray(payload["singular_values"], dtype=float)
        est.n_ages_ = est.ax_.shape[0]
        est.n_years_ = est.kt_.shape[1]
        est.padded_components_ = np.zeros(est.order, dtype=bool)
        if "residuals" in payload:
            est.residuals_ = np.asarray(payload["residuals"], dtype=float)
        return est
