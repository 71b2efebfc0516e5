"""Parameter checks shared by the estimators, experiments and the CLI."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_probability(value, name, *, open_interval=False):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if open_interval:
        if not 0.0 < value < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {value}")
    elif not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_int(value, name, *, minimum=0, maximum=None):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ValueError(f"{name} must be <= {maximum}, got {value}")
    return value


def check_p_values(X):
    """Coerce a p-grid (1-D sequence or single-column array) to a float vector in [0, 1]."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 1:
        raise ValueError(f"expected a single column of p values, got shape {X.shape}")
    p = X[:, 0]
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("p values must lie in [0, 1]")
    return p
