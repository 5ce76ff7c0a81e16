"""Input validation helpers shared by the estimator layer and the CLI."""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError


def as_complex_vector(x, n: int | None = None, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a finite 1-D complex128 vector, optionally of length ``n``."""
    v = np.asarray(x, dtype=complex).ravel()
    if n is not None and v.shape[0] != n:
        raise ConfigError(f"{name} must have length {n}, got {v.shape[0]}")
    if v.size and not np.all(np.isfinite(v.view(float))):
        raise ConfigError(f"{name} contains non-finite values")
    return v


def as_complex_matrix(x, shape=None, name: str = "A") -> np.ndarray:
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2:
        raise ConfigError(f"{name} must be 2-D, got ndim={m.ndim}")
    if shape is not None and m.shape != tuple(shape):
        raise ConfigError(f"{name} must have shape {tuple(shape)}, got {m.shape}")
    if m.size and not np.all(np.isfinite(m.view(float))):
        raise ConfigError(f"{name} contains non-finite values")
    return m


def check_time_series(y, name: str = "y") -> np.ndarray:
    """Validate a measurement sequence: nonempty, finite, 1-D; returns complex128."""
    v = np.asarray(y)
    if v.ndim != 1:
        raise ConfigError(f"{name} must be a 1-D sequence, got ndim={v.ndim}")
    if v.shape[0] < 1:
        raise ConfigError(f"{name} must be nonempty")
    return as_complex_vector(v, name=name)


def check_forgetting(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta <= 1.0:
        raise ConfigError(f"forgetting factor must be in (0, 1], got {delta}")
    return delta


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not value > 0.0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value
