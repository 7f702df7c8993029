"""Input validation helpers shared by the model, estimator and bound layers."""

import numbers

import numpy as np
from sklearn.utils import check_array

PRIOR_SUM_TOL = 1e-12
POSTERIOR_SUM_TOL = 1e-10
REGION_TOL = 1e-9


class DegenerateInputError(ValueError):
    """Raised when the inputs admit no well-defined result (e.g. all weights -inf)."""


class InvalidStatisticsError(ValueError):
    """Raised when Monte Carlo statistics are mutually inconsistent for a bound."""


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_probability(value, name, tol=0.0):
    """Validate a scalar probability, clipping values within ``tol`` of [0, 1]."""
    value = float(value)
    if not np.isfinite(value) or value < -tol or value > 1.0 + tol:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return min(max(value, 0.0), 1.0)


def check_pmf(p, name="prior", tol=PRIOR_SUM_TOL, min_size=2):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {p.shape}")
    if p.size < min_size:
        raise ValueError(f"{name} needs at least {min_size} entries, got {p.size}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError(f"{name} entries must be finite and non-negative")
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1 (got {total!r})")
    return p


def check_posterior_matrix(P, tol=POSTERIOR_SUM_TOL):
    """Validate an (n_draws, M) matrix whose rows are posterior PMFs."""
    P = check_array(P, dtype=np.float64, ensure_min_samples=1, ensure_min_features=2)
    if np.any(P < 0):
        raise ValueError("posterior entries must be non-negative")
    err = np.abs(P.sum(axis=1) - 1.0)
    if np.any(err > tol):
        raise ValueError(
            f"posterior rows must sum to 1 within {tol:g}; worst deviation {err.max():.3g}"
        )
    return P


def frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a
