"""Input checks shared by the estimator facade."""

import numpy as np

from .errors import ConfigurationError, InsufficientDataError


def check_windows(X, n_features: int = None):
    """Coerce X into a list of float64 (l_i, F) arrays with a common F.

    Accepts a single window, a list of ragged windows, or a 3D array of
    equal-length windows.
    """
    if isinstance(X, np.ndarray) and X.ndim == 3:
        windows = [X[i] for i in range(X.shape[0])]
    elif isinstance(X, np.ndarray) and X.ndim == 2:
        windows = [X]
    else:
        windows = list(X)
    if not windows:
        raise InsufficientDataError("no input windows")

    out = []
    width = n_features
    for i, w in enumerate(windows):
        arr = np.asarray(w, dtype=np.float64)
        if arr.ndim != 2:
            raise ConfigurationError(f"window {i} is not 2-dimensional")
        if arr.shape[0] < 1:
            raise InsufficientDataError(f"window {i} is empty")
        if not np.isfinite(arr).all():
            raise ConfigurationError(f"window {i} contains non-finite values")
        if width is None:
            width = arr.shape[1]
        elif arr.shape[1] != width:
            raise ConfigurationError(
                f"window {i} has {arr.shape[1]} features, expected {width}"
            )
        out.append(arr)
    return out


def check_labels(y, n_samples: int):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2:
        raise ConfigurationError("labels must be (n_samples, n_outputs)")
    if y.shape[0] != n_samples:
        raise ConfigurationError(
            f"{y.shape[0]} labels for {n_samples} windows"
        )
    if not np.isfinite(y).all():
        raise ConfigurationError("labels contain non-finite values")
    return y
