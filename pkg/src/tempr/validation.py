"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def check_video_array(X) -> np.ndarray:
    """Coerce to (N, T, H, W, C) float; grayscale (N, T, H, W) gets a channel axis."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 4:
        X = X[..., None]
    if X.ndim != 5:
        raise ConfigError(f"expected videos shaped (N, T, H, W[, C]), got ndim={X.ndim}")
    if min(X.shape) < 1:
        raise ConfigError(f"degenerate video array shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ConfigError("video array contains NaN/Inf")
    return X


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n:
        raise ConfigError(f"labels must be a length-{n} 1-D array")
    return y


def check_ratio(rho: float) -> float:
    if not (0.0 < rho < 1.0):
        raise ConfigError(f"observation ratio must lie in (0, 1), got {rho}")
    return float(rho)
