"""From-scratch LSTM sequence forecaster for pooled mortality series.

A single-layer LSTM (8 units by default) with a linear one-unit head reads
16-step windows of standardized log death rates and predicts the next
value. Training minimizes mean squared error with Adam; gradients come
from full backpropagation through time over the unrolled window. Every
(country, sex, age) series is treated as an independent univariate
sequence and all windows are pooled, so one model serves any age.

Multi-year forecasts are produced recursively: each one-step prediction is
appended to the window and fed back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator

from .errors import EmptyDatasetError, InsufficientDataError, NumericError
from .hmd import DatasetRegistry, Sex
from .leecarter import DEFAULT_RATE_FLOOR
from .validation import check_fitted, check_series

GATES = ("i", "f", "o", "c")
REGIMES = ("country", "world", "coed")


@dataclass
class Standardizer:
    """Affine map to zero mean / unit variance, shared by inputs and targets."""

    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("standardizer requires a positive std")

    def transform(self, values):
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def inverse_transform(self, values):
        return np.asarray(values, dtype=float) * self.std + self.mean


class LstmNetwork:
    """Weight container: per-gate input/recurrent/bias arrays plus the head.

    Gate order everywhere is input, forget, output, candidate ("i f o c").
    """

    PARAM_NAMES = tuple(
        f"{kind}_{gate}" for gate in GATES for kind in ("w", "u", "b")
    ) + ("w_out", "b_out")

    def __init__(self, input_dim: int, hidden_dim: int, params: dict[str, np.ndarray]):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        for name in self.PARAM_NAMES:
            setattr(self, name, np.asarray(params[name], dtype=float))
        self.validate_shapes()

    @classmethod
    def initialize(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        """Uniform(-r, r) matrices with r = 1/sqrt(hidden_dim); zero biases."""
        r = 1.0 / np.sqrt(hidden_dim)
        params: dict[str, np.ndarray] = {}
        for gate in GATES:
            params[f"w_{gate}"] = rng.uniform(-r, r, size=(hidden_dim, input_dim))
            params[f"u_{gate}"] = rng.uniform(-r, r, size=(hidden_dim, hidden_dim))
            params[f"b_{gate}"] = np.zeros(hidden_dim)
        params["w_out"] = rng.uniform(-r, r, size=hidden_dim)
        params["b_out"] = np.zeros(1)
        return cls(input_dim, hidden_dim, params)

    def validate_shapes(self) -> None:
        h, n = self.hidden_dim, self.input_dim
        expected = {"w": (h, n), "u": (h, h), "b": (h,)}
        for gate in GATES:
            for kind, shape in expected.items():
                name = f"{kind}_{gate}"
                actual = getattr(self, name).shape
                if actual != shape:
                    raise ValueError(f"{name} must have shape {shape}, got {actual}")
        if self.w_out.shape != (h,):
            raise ValueError(f"w_out must have shape {(h,)}, got {self.w_out.shape}")
        if self.b_out.shape != (1,):
            raise ValueError(f"b_out must have shape (1,), got {self.b_out.shape}")
        for name in self.PARAM_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.PARAM_NAMES}

    def copy(self) -> "LstmNetwork":
        return LstmNetwork(
            self.input_dim,
            self.hidden_dim,
            {name: arr.copy() for name, arr in self.params().items()},
        )


@dataclass
class GateRecord:
    """Per-step activations retained for backpropagation through time."""

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray  # tanh candidate
    c: np.ndarray
    h: np.ndarray


def cell_step(
    net: LstmNetwork,
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    step: int | None = None,
) -> tuple[np.ndarray, np.ndarray, GateRecord]:
    """One LSTM cell update on a batch: x (B, n), states (B, h)."""
    i = expit(x @ net.w_i.T + h_prev @ net.u_i.T + net.b_i)
    f = expit(x @ net.w_f.T + h_prev @ net.u_f.T + net.b_f)
    o = expit(x @ net.w_o.T + h_prev @ net.u_o.T + net.b_o)
    g = np.tanh(x @ net.w_c.T + h_prev @ net.u_c.T + net.b_c)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
        raise NumericError("non-finite cell state", step=step)
    return h, c, GateRecord(x, h_prev, c_prev, i, f, o, g, c, h)


def _stacked_weights(net: LstmNetwork, dtype=float):
    """Per-gate weights fused into (4h, .) blocks: one matmul per step."""
    w = np.vstack([getattr(net, f"w_{g}") for g in GATES]).astype(dtype, copy=False)
    u = np.vstack([getattr(net, f"u_{g}") for g in GATES]).astype(dtype, copy=False)
    b = np.concatenate([getattr(net, f"b_{g}") for g in GATES]).astype(dtype, copy=False)
    return w, u, b


def _forward_batch(
    net: LstmNetwork, windows: np.ndarray
) -> tuple[np.ndarray, list[GateRecord]]:
    """Run the cell over every step of (B, L) windows; returns head outputs."""
    b, length = windows.shape
    dtype = windows.dtype
    hd = net.hidden_dim
    w_stack, u_stack, b_stack = _stacked_weights(net, dtype)
    h = np.zeros((b, hd), dtype=dtype)
    c = np.zeros((b, hd), dtype=dtype)
    caches = []
    for t in range(length):
        x = windows[:, t : t + 1]
        pre = x @ w_stack.T + h @ u_stack.T + b_stack
        ifo = expit(pre[:, : 3 * hd])
        i = ifo[:, :hd]
        f = ifo[:, hd : 2 * hd]
        o = ifo[:, 2 * hd :]
        g = np.tanh(pre[:, 3 * hd :])
        c_new = f * c + i * g
        # gates and tanh are bounded, so finiteness of c implies it for h
        if not np.all(np.isfinite(c_new)):
            raise NumericError("non-finite cell state", step=t)
        h_new = o * np.tanh(c_new)
        caches.append(GateRecord(x, h, c, i, f, o, g, c_new, h_new))
        h, c = h_new, c_new
    preds = h @ net.w_out + net.b_out[0]
    return preds, caches


def forward(net: LstmNetwork, window) -> float:
    """Head output for one window: len(window) cell steps from zero state."""
    w = check_series(window, "window", min_length=1)
    preds, _ = _forward_batch(net, w[None, :])
    return float(preds[0])


def loss_and_gradients(
    net: LstmNetwork, windows: np.ndarray, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch MSE and its gradient for every weight, by BPTT.

    ``windows`` is (B, L), ``targets`` (B,). Gradients are averaged over
    the batch, so duplicating every window leaves them unchanged.
    """
    windows = np.asarray(windows, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if windows.ndim != 2 or windows.shape[0] == 0:
        raise ValueError("batch must be a non-empty (B, L) array")
    b = windows.shape[0]
    hd = net.hidden_dim
    preds, caches = _forward_batch(net, windows)
    diff = preds - targets
    loss = float(diff @ diff) / b

    _, u_stack, _ = _stacked_weights(net)
    gw_stack = np.zeros((4 * hd, net.input_dim))
    gu_stack = np.zeros((4 * hd, hd))
    gb_stack = np.zeros(4 * hd)
    dpred = 2.0 * diff / b
    grads = {"w_out": caches[-1].h.T @ dpred, "b_out": np.array([dpred.sum()])}
    dh = dpred[:, None] * net.w_out[None, :]
    dc = np.zeros_like(dh)

    d_pre = np.empty((b, 4 * hd))
    for rec in reversed(caches):
        tanh_c = np.tanh(rec.c)
        do = dh * tanh_c
        dc = dc + dh * rec.o * (1.0 - tanh_c**2)
        # pre-activation gradients of the four gates, in stacked layout
        d_pre[:, :hd] = dc * rec.g * rec.i * (1.0 - rec.i)
        d_pre[:, hd : 2 * hd] = dc * rec.c_prev * rec.f * (1.0 - rec.f)
        d_pre[:, 2 * hd : 3 * hd] = do * rec.o * (1.0 - rec.o)
        d_pre[:, 3 * hd :] = dc * rec.i * (1.0 - rec.g**2)
        gw_stack += d_pre.T @ rec.x
        gu_stack += d_pre.T @ rec.h_prev
        gb_stack += d_pre.sum(axis=0)
        dh = d_pre @ u_stack
        dc = dc * rec.f

    for gi, gate in enumerate(GATES):
        grads[f"w_{gate}"] = gw_stack[gi * hd : (gi + 1) * hd]
        grads[f"u_{gate}"] = gu_stack[gi * hd : (gi + 1) * hd]
        grads[f"b_{gate}"] = gb_stack[gi * hd : (gi + 1) * hd]

    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
    return loss, grads


def forecast_recursive(
    net: LstmNetwork,
    standardizer: Standardizer,
    history,
    horizon: int,
    unroll: int = 16,
) -> np.ndarray:
    """Recursive multi-step forecast in raw log space.

    Standardizes the history, repeatedly predicts the next value from the
    last ``unroll`` standardized values (feeding predictions back), and
    de-standardizes the appended values. Only the final ``unroll`` history
    values can influence the output.
    """
    series = np.asarray(history, dtype=float)
    if series.ndim != 1 or len(series) < unroll:
        raise InsufficientDataError(
            f"recursive forecasting needs at least {unroll} history values"
        )
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    buffer = list(standardizer.transform(series[-unroll:]))
    out = []
    for _ in range(horizon):
        window = np.asarray(buffer[-unroll:])
        pred, _ = _forward_batch(net, window[None, :])
        buffer.append(float(pred[0]))
        out.append(float(pred[0]))
    return standardizer.inverse_transform(np.asarray(out))


def forecast_recursive_batch(
    net: LstmNetwork,
    standardizer: Standardizer,
    histories: np.ndarray,
    horizon: int,
    unroll: int = 16,
) -> np.ndarray:
    """Vectorized forecast_recursive for several series sharing one model.

    ``histories`` is (S, >= unroll) in raw log space; returns (S, horizon).
    """
    histories = np.asarray(histories, dtype=float)
    if histories.ndim != 2 or histories.shape[1] < unroll:
        raise InsufficientDataError(
            f"recursive forecasting needs at least {unroll} history values per series"
        )
    buffer = standardizer.transform(histories[:, -unroll:])
    outs = []
    for _ in range(horizon):
        preds, _ = _forward_batch(net, buffer)
        buffer = np.concatenate([buffer[:, 1:], preds[:, None]], axis=1)
        outs.append(preds)
    if horizon == 0:
        return np.empty((histories.shape[0], 0))
    return standardizer.inverse_transform(np.stack(outs, axis=1))


@dataclass(frozen=True)
class WindowOrigin:
    country: str
    sex: Sex
    age: int
    end_year: int


@dataclass
class SequenceDataset:
    """Pooled (window, target) pairs in log-rate space, with provenance."""

    inputs: np.ndarray  # (n_windows, unroll)
    targets: np.ndarray  # (n_windows,)
    origins: list[WindowOrigin]
    unroll: int

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def all_values(self) -> np.ndarray:
        return np.concatenate([self.inputs.ravel(), self.targets])


def build_dataset(
    registry: DatasetRegistry,
    regime: str,
    train_end_year: int | None = None,
    country: str | None = None,
    unroll: int = 16,
    floor: float = DEFAULT_RATE_FLOOR,
) -> SequenceDataset:
    """Pool training windows from the registry under one training regime.

    "country" uses the named country's total-sex series, "world" every
    country's total series, and "coed" every country crossed with female,
    male and total. Each (country, sex, age) series is log-transformed and
    cut into every contiguous (unroll-input, 1-target) window whose target
    year is at or before ``train_end_year`` (no restriction when None).
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}, expected one of {REGIMES}")
    if regime == "country":
        if country is None:
            raise ValueError("regime 'country' requires a country code")
        matrices = [registry.get(country, Sex.TOTAL)]
    else:
        sexes = [Sex.TOTAL] if regime == "world" else [Sex.FEMALE, Sex.MALE, Sex.TOTAL]
        matrices = [
            registry.entries[(c, sex)]
            for c in registry.countries()
            for sex in sexes
            if (c, sex) in registry.entries
        ]
    if not matrices:
        raise EmptyDatasetError("registry holds no matrices for this regime")

    inputs, targets, origins = [], [], []
    for matrix in matrices:
        if train_end_year is not None:
            if matrix.years[-1] < train_end_year:
                raise ValueError(
                    f"{matrix.country}/{matrix.sex}: series ends {matrix.years[-1]}, "
                    f"before train_end_year {train_end_year}"
                )
            n_cols = sum(1 for y in matrix.years if y <= train_end_year)
        else:
            n_cols = matrix.n_years
        log_rates = np.log(np.maximum(matrix.rates[:, :n_cols], floor))
        for age in range(log_rates.shape[0]):
            series = log_rates[age]
            for end in range(unroll, n_cols):
                inputs.append(series[end - unroll : end])
                targets.append(series[end])
                origins.append(
                    WindowOrigin(matrix.country, matrix.sex, age, matrix.years[end])
                )
    if not inputs:
        raise EmptyDatasetError("no training windows could be produced")
    return SequenceDataset(
        inputs=np.asarray(inputs),
        targets=np.asarray(targets),
        origins=origins,
        unroll=unroll,
    )


class LstmForecaster(BaseEstimator):
    """Sequence forecaster: one-layer LSTM plus a linear single-unit head.

    Parameters mirror the training recipe: 8 hidden units, windows of 16
    steps, 128-item batches, Adam at learning rate 0.001 for 300 epochs.
    Fitting standardizes all training values by their joint mean/std,
    shuffles windows each epoch with the seeded generator, and applies
    bias-corrected Adam updates per batch (the final short batch
    included). Everything downstream of the seed is deterministic.
    """

    def __init__(
        self,
        hidden_dim: int = 8,
        unroll: int = 16,
        batch_size: int = 128,
        learning_rate: float = 0.001,
        epochs: int = 300,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        seed: int = 0,
    ):
        self.hidden_dim = hidden_dim
        self.unroll = unroll
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.seed = seed

    def _check_config(self) -> None:
        if min(self.hidden_dim, self.unroll, self.batch_size, self.epochs) < 1:
            raise ValueError("hidden_dim, unroll, batch_size and epochs must be >= 1")
        if min(self.learning_rate, self.beta1, self.beta2, self.eps) <= 0:
            raise ValueError("learning_rate, beta1, beta2 and eps must be positive")

    def fit(self, X, y=None) -> "LstmForecaster":
        """Train on a SequenceDataset or on (windows, targets) arrays."""
        self._check_config()
        if isinstance(X, SequenceDataset):
            if X.unroll != self.unroll:
                raise ValueError(
                    f"dataset windows have {X.unroll} steps, estimator expects {self.unroll}"
                )
            windows, targets = X.inputs, X.targets
        else:
            windows = np.asarray(X, dtype=float)
            targets = np.asarray(y, dtype=float)
        if windows.ndim != 2 or windows.shape[0] == 0:
            raise ValueError("training windows must form a non-empty (n, unroll) array")
        if windows.shape[1] != self.unroll:
            raise ValueError(
                f"windows have {windows.shape[1]} steps, estimator expects {self.unroll}"
            )
        if targets.shape != (windows.shape[0],):
            raise ValueError("targets must be one scalar per window")

        values = np.concatenate([windows.ravel(), targets])
        std = float(np.std(values))
        if not std > 0:
            raise ValueError("training values are constant; standardizer is undefined")
        self.standardizer_ = Standardizer(mean=float(np.mean(values)), std=std)
        xs = self.standardizer_.transform(windows)
        ys = self.standardizer_.transform(targets)

        rng = np.random.default_rng(self.seed)
        net = LstmNetwork.initialize(1, self.hidden_dim, rng)
        moment1 = {name: np.zeros_like(arr) for name, arr in net.params().items()}
        moment2 = {name: np.zeros_like(arr) for name, arr in net.params().items()}
        step = 0
        n = xs.shape[0]
        history = []
        for _ in range(self.epochs):
            order = rng.permutation(n)
            epoch_sse = 0.0
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                loss, grads = loss_and_gradients(net, xs[idx], ys[idx])
                step += 1
                scale1 = 1.0 - self.beta1**step
                scale2 = 1.0 - self.beta2**step
                for name, grad in grads.items():
                    m = moment1[name]
                    v = moment2[name]
                    m *= self.beta1
                    m += (1.0 - self.beta1) * grad
                    v *= self.beta2
                    v += (1.0 - self.beta2) * grad**2
                    param = getattr(net, name)
                    param -= self.learning_rate * (m / scale1) / (
                        np.sqrt(v / scale2) + self.eps
                    )
                epoch_sse += loss * len(idx)
            history.append(epoch_sse / n)
        self.network_ = net
        self.loss_history_ = history
        return self

    def predict(self, X) -> np.ndarray:
        """One-step predictions (raw log space) for (n, unroll) windows."""
        check_fitted(self, "network_")
        windows = np.asarray(X, dtype=float)
        if windows.ndim == 1:
            windows = windows[None, :]
        if windows.shape[1] != self.unroll:
            raise ValueError(
                f"windows have {windows.shape[1]} steps, estimator expects {self.unroll}"
            )
        preds, _ = _forward_batch(self.network_, self.standardizer_.transform(windows))
        return self.standardizer_.inverse_transform(preds)

    def forecast(self, history, horizon: int) -> np.ndarray:
        """Recursive multi-step forecast from a raw log-rate history."""
        check_fitted(self, "network_")
        return forecast_recursive(
            self.network_, self.standardizer_, history, horizon, unroll=self.unroll
        )

    def forecast_matrix(self, histories, horizon: int) -> np.ndarray:
        """Recursive forecasts for (S, >= unroll) histories in one batch."""
        check_fitted(self, "network_")
        return forecast_recursive_batch(
            self.network_, self.standardizer_, histories, horizon, unroll=self.unroll
        )

    def to_json(self) -> str:
        check_fitted(self, "network_")
        return json.dumps(
            {
                "config": self.get_params(),
                "input_dim": self.network_.input_dim,
                "hidden_dim": self.network_.hidden_dim,
                "weights": {
                    name: arr.tolist() for name, arr in self.network_.params().items()
                },
                "standardizer": {
                    "mean": self.standardizer_.mean,
                    "std": self.standardizer_.std,
                },
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "LstmForecaster":
        payload = json.loads(text)
        est = cls(**payload["config"])
        weights = {
            name: np.asarray(arr, dtype=float)
            for name, arr in payload["weights"].items()
        }
        est.network_ = LstmNetwork(
            payload["input_dim"], payload["hidden_dim"], weights
        )
        est.standardizer_ = Standardizer(**payload["standardizer"])
        est.loss_history_ = []
        return est
