"""Small input-validation helpers used by the estimators and the ARIMA layer."""

import numpy as np


def check_series(y, name: str = "y", min_length: int = 1) -> np.ndarray:
    """Coerce ``y`` to a finite 1-D float array of at least ``min_length``."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise ValueError(
            f"{name} must have at least {min_length} observations, got {arr.shape[0]}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_matrix(x, name: str = "X") -> np.ndarray:
    """Coerce ``x`` to a finite 2-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_fitted(estimator, attribute: str) -> None:
    """Raise if ``estimator`` has not been fitted (missing trailing-underscore attr)."""
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} instance is not fitted yet; call fit() first"
        )
