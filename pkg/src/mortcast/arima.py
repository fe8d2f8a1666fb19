"""ARIMA modeling of mortality index series.

Covers the forecasting needs of the index components: the classic random
walk with drift, general ARIMA(p,d,q) estimation by conditional sum of
squares, a level-stationarity KPSS test, and stepwise AIC order selection
(successive KPSS tests pick the differencing order, then a local search
over AR/MA orders and the drift toggle).

Estimation is Gaussian CSS with zero-initialized presample values, which
is adequate for the short (T <= ~120) annual series this package handles.
The searched parameters are mapped through partial-autocorrelation space
(tanh then Durbin-Levinson expansion) so every visited point is already
stationary/invertible; fitted roots are additionally pushed away from the
unit circle to a fixed margin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .errors import InsufficientDataError, NonConvergenceError, SelectionError
from .validation import check_series

MAX_P = 5
MAX_Q = 5
MAX_D = 2
ROOT_MARGIN = 1e-3
SIGMA2_FLOOR = 1e-300
KPSS_CRITICAL_5PCT = 0.463


@dataclass(frozen=True)
class ArimaSpec:
    """Model order (p, d, q) plus whether a drift constant is included."""

    p: int
    d: int
    q: int
    with_drift: bool = False

    def __post_init__(self):
        if not (0 <= self.p <= MAX_P and 0 <= self.q <= MAX_Q and 0 <= self.d <= MAX_D):
            raise ValueError(
                f"orders out of bounds: p<={MAX_P}, d<={MAX_D}, q<={MAX_Q}, got {self}"
            )

    def n_params(self) -> int:
        # +1 counts the innovation variance
        return self.p + self.q + int(self.with_drift) + 1

    def label(self) -> str:
        drift = "+drift" if self.with_drift else ""
        return f"ARIMA({self.p},{self.d},{self.q}){drift}"


@dataclass
class ArimaFit:
    """Fitted ARIMA model: coefficients, innovation variance, and fit quality."""

    spec: ArimaSpec
    ar: np.ndarray
    ma: np.ndarray
    drift: float
    sigma2: float
    loglik: float
    aic: float
    n_obs: int
    exact_fit: bool = False

    def to_json(self) -> str:
        payload: dict = {
            "p": self.spec.p,
            "d": self.spec.d,
            "q": self.spec.q,
            "ar": np.asarray(self.ar).tolist(),
            "ma": np.asarray(self.ma).tolist(),
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "aic": self.aic,
        }
        if self.spec.with_drift:
            payload["drift"] = self.drift
        return json.dumps(payload)


@dataclass(frozen=True)
class KpssResult:
    statistic: float
    reject_stationarity: bool


def _pacf_to_coeffs(pac: np.ndarray) -> np.ndarray:
    """Durbin-Levinson expansion: partial autocorrelations in (-1,1) to a
    coefficient vector whose polynomial 1 - sum(c_i z^i) has all roots
    outside the unit circle."""
    coeffs = np.zeros(len(pac))
    for j in range(len(pac)):
        prev = coeffs[:j].copy()
        coeffs[:j] = prev - pac[j] * prev[::-1]
        coeffs[j] = pac[j]
    return coeffs


def _css_residuals(z: np.ndarray, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """One-step-ahead residuals of the ARMA recursion with zero presample."""
    x = z if len(phi) == 0 else lfilter(np.r_[1.0, -phi], [1.0], z)
    return x if len(theta) == 0 else lfilter([1.0], np.r_[1.0, theta], x)


def _gaussian_fit_stats(ss: float, n: int, spec: ArimaSpec) -> tuple[float, float, float, bool]:
    """(sigma2, loglik, aic, exact_fit) from a residual sum of squares."""
    sigma2 = ss / n
    exact = sigma2 <= SIGMA2_FLOOR
    if exact:
        sigma2 = SIGMA2_FLOOR
    loglik = -0.5 * n * (np.log(2.0 * np.pi * sigma2) + 1.0)
    aic = -2.0 * loglik + 2.0 * spec.n_params()
    return sigma2, loglik, aic, exact


def _shrink_roots(tail: np.ndarray, margin: float = ROOT_MARGIN) -> np.ndarray:
    """Push roots of 1 + sum(tail_i z^i) outside |z| = 1 + margin.

    Returns the adjusted tail coefficients; raises NonConvergenceError if
    the projection produces non-finite values.
    """
    if len(tail) == 0:
        return tail
    roots = np.roots(np.r_[tail[::-1], 1.0])
    if len(roots) == 0:
        return tail
    mags = np.abs(roots)
    target = 1.0 + 1.05 * margin
    if np.all(mags >= 1.0 + margin):
        return tail
    if np.any(mags == 0.0):
        raise NonConvergenceError("root projection failed: zero root")
    scaled = np.where(mags < 1.0 + margin, roots * (target / mags), roots)
    poly = np.array([1.0 + 0.0j])
    for r in scaled:
        poly = np.convolve(poly, np.array([1.0, -1.0 / r]))
    if np.max(np.abs(poly.imag)) > 1e-8 or not np.all(np.isfinite(poly.real)):
        raise NonConvergenceError("root projection failed: complex coefficients")
    return poly.real[1:]


def _closed_form_fit(k: np.ndarray, spec: ArimaSpec) -> ArimaFit:
    """Exact CSS solution for p = q = 0: drift is the differenced-series mean."""
    w = np.diff(k, n=spec.d) if spec.d else k
    drift = float(np.mean(w)) if spec.with_drift else 0.0
    resid = w - drift
    sigma2, loglik, aic, exact = _gaussian_fit_stats(float(resid @ resid), len(w), spec)
    return ArimaFit(
        spec=spec,
        ar=np.empty(0),
        ma=np.empty(0),
        drift=drift,
        sigma2=sigma2,
        loglik=loglik,
        aic=aic,
        n_obs=len(w),
        exact_fit=exact,
    )


def fit_rw_drift(k) -> ArimaFit:
    """Random walk with drift, the classic model for the mortality index.

    The drift is the mean first difference and sigma2 the mean squared
    residual of the differences about it.
    """
    series = check_series(k, "k")
    if len(series) < 2:
        raise InsufficientDataError("random walk with drift needs at least 2 observations")
    return _closed_form_fit(series, ArimaSpec(0, 1, 0, with_drift=True))


def fit_arima(k, spec: ArimaSpec) -> ArimaFit:
    """Estimate an ARIMA(p,d,q) model by conditional sum of squares.

    Optimizes the concentrated Gaussian likelihood over AR/MA partial
    autocorrelations (plus drift when requested) starting from the zero
    coefficients / differenced-mean initialization.
    """
    series = check_series(k, "k")
    if len(series) - spec.d < spec.p + spec.q + 2:
        raise InsufficientDataError(
            f"{spec.label()} needs at least {spec.p + spec.q + 2 + spec.d} observations, "
            f"got {len(series)}"
        )
    if spec.p == 0 and spec.q == 0:
        return _closed_form_fit(series, spec)

    w = np.diff(series, n=spec.d) if spec.d else series
    n = len(w)
    p, q = spec.p, spec.q

    def unpack(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        phi = _pacf_to_coeffs(np.tanh(raw[:p]))
        theta = -_pacf_to_coeffs(np.tanh(raw[p : p + q]))
        drift = raw[p + q] if spec.with_drift else 0.0
        return phi, theta, drift

    def objective(raw: np.ndarray) -> float:
        phi, theta, drift = unpack(raw)
        e = _css_residuals(w - drift, phi, theta)
        ms = float(e @ e) / n
        return 0.5 * n * np.log(max(ms, SIGMA2_FLOOR))

    x0 = np.zeros(p + q + int(spec.with_drift))
    if spec.with_drift:
        x0[-1] = float(np.mean(w))

    result = minimize(objective, x0, method="L-BFGS-B")
    if not np.isfinite(result.fun):
        result = None
    fallback = minimize(
        objective,
        x0 if result is None else result.x,
        method="Nelder-Mead",
        options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000},
    )
    best = fallback if result is None or fallback.fun <= result.fun else result
    if not np.all(np.isfinite(best.x)) or not np.isfinite(best.fun):
        raise NonConvergenceError(f"{spec.label()}: optimizer returned non-finite parameters")

    phi, theta, drift = unpack(best.x)
    # keep the fitted polynomials a fixed distance from the unit circle
    phi = -_shrink_roots(-phi)
    theta = _shrink_roots(theta)
    e = _css_residuals(w - drift, phi, theta)
    sigma2, loglik, aic, exact = _gaussian_fit_stats(float(e @ e), n, spec)
    if not np.isfinite(aic) or not np.isfinite(loglik):
        raise NonConvergenceError(f"{spec.label()}: non-finite likelihood after projection")
    return ArimaFit(
        spec=spec,
        ar=phi,
        ma=theta,
        drift=float(drift),
        sigma2=sigma2,
        loglik=loglik,
        aic=aic,
        n_obs=n,
        exact_fit=exact,
    )


def forecast(fit: ArimaFit, k, horizon: int) -> np.ndarray:
    """Mean forecast: the ARIMA recursion iterated with zero future shocks.

    For a random walk with drift this reduces to last value + h * drift.
    A zero horizon yields an empty series.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    series = check_series(k, "k", min_length=fit.spec.d + 1)
    if horizon == 0:
        return np.empty(0)

    d = fit.spec.d
    w = np.diff(series, n=d) if d else series
    z = list(w - fit.drift)
    e = list(_css_residuals(np.asarray(z), fit.ar, fit.ma))
    n = len(z)
    for h in range(horizon):
        t = n + h
        value = 0.0
        for i, phi in enumerate(fit.ar, start=1):
            if t - i >= 0:
                value += phi * z[t - i]
        for j, theta in enumerate(fit.ma, start=1):
            if 0 <= t - j < n:
                value += theta * e[t - j]
        z.append(value)
        e.append(0.0)
    future = np.asarray(z[n:]) + fit.drift

    # integrate the differenced forecasts back to the original scale
    levels = [series]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    for level in range(d - 1, -1, -1):
        future = levels[level][-1] + np.cumsum(future)
    return future


def kpss_test(y) -> KpssResult:
    """Level-stationarity KPSS test at the 5% critical value (0.463).

    Uses Bartlett-kernel long-run variance with lag truncation
    floor(4 * (T/100)^0.25). A constant series scores 0 (no rejection).
    """
    series = check_series(y, "y")
    t = len(series)
    if t < 10:
        raise InsufficientDataError(f"KPSS test needs at least 10 observations, got {t}")
    resid = series - series.mean()
    # a (numerically) constant series has no level deviation to test
    if np.sqrt(np.mean(resid**2)) <= 1e-13 * max(1.0, abs(series.mean())):
        return KpssResult(statistic=0.0, reject_stationarity=False)
    lags = int(np.floor(4.0 * (t / 100.0) ** 0.25))
    s2 = float(resid @ resid) / t
    for h in range(1, lags + 1):
        weight = 1.0 - h / (lags + 1.0)
        s2 += 2.0 * weight * float(resid[h:] @ resid[:-h]) / t
    if s2 <= 0.0:
        return KpssResult(statistic=0.0, reject_stationarity=False)
    partial_sums = np.cumsum(resid)
    statistic = float(partial_sums @ partial_sums) / (t**2 * s2)
    return KpssResult(statistic=statistic, reject_stationarity=statistic > KPSS_CRITICAL_5PCT)


@dataclass
class _SearchState:
    series: np.ndarray
    tried: dict[ArimaSpec, ArimaFit | None] = field(default_factory=dict)
    attempts: list[str] = field(default_factory=list)

    def evaluate(self, spec: ArimaSpec) -> ArimaFit | None:
        if spec in self.tried:
            return self.tried[spec]
        try:
            fit = fit_arima(self.series, spec)
            self.attempts.append(f"{spec.label()}: aic={fit.aic:.4f}")
        except (InsufficientDataError, NonConvergenceError) as exc:
            fit = None
            self.attempts.append(f"{spec.label()}: failed ({exc})")
        self.tried[spec] = fit
        return fit


def select_differencing(k) -> int:
    """Smallest d in {0,1,2} whose d-times differenced series passes KPSS.

    Falls back to the maximum (2) when the test still rejects there.
    """
    series = check_series(k, "k", min_length=10)
    for d in range(MAX_D + 1):
        differenced = np.diff(series, n=d) if d else series
        if len(differenced) < 10:
            break
        if not kpss_test(differenced).reject_stationarity:
            return d
    return MAX_D


def auto_select(k) -> ArimaFit:
    """Stepwise automatic ARIMA: KPSS differencing, then local AIC search.

    Starts from (0,0), (1,0), (0,1) and (2,2); repeatedly moves to the
    best-AIC neighbor (one step in p or q, or a drift toggle) until no
    neighbor improves. Drift is searched only when d <= 1.
    """
    series = check_series(k, "k", min_length=10)
    d = select_differencing(series)
    drift_allowed = d <= 1

    state = _SearchState(series)
    initial = [
        ArimaSpec(p, d, q, with_drift=drift_allowed) for p, q in [(2, 2), (0, 0), (1, 0), (0, 1)]
    ]
    initial.append(ArimaSpec(0, d, 0, with_drift=False))

    best: ArimaFit | None = None
    for spec in initial:
        fit = state.evaluate(spec)
        if fit is not None and (best is None or fit.aic < best.aic):
            best = fit
    if best is None:
        raise SelectionError(
            "no initial ARIMA candidate converged:\n  " + "\n  ".join(state.attempts)
        )

    while True:
        p, q = best.spec.p, best.spec.q
        drift = best.spec.with_drift
        neighbors = []
        for dp, dq in [(-1, 0), (1, 0), (0, -1), (0, 1)]:
            np_, nq = p + dp, q + dq
            if 0 <= np_ <= MAX_P and 0 <= nq <= MAX_Q:
                neighbors.append(ArimaSpec(np_, d, nq, with_drift=drift))
        if drift_allowed:
            neighbors.append(ArimaSpec(p, d, q, with_drift=not drift))
        improved = None
        for spec in neighbors:
            fit = state.evaluate(spec)
            if fit is not None and fit.aic < best.aic and (
                improved is None or fit.aic < improved.aic
            ):
                improved = fit
        if improved is None:
            return best
        best = improved
