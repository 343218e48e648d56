"""Input validation shared by the functional API and the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigurationError, DomainError


def check_points(points, name="points", positive_radius=False):
    """(n, 2) float array of finite (r, z) pairs with r >= 0 (or > 0)."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros((0, 2))
    pts = check_array(pts, dtype=np.float64, ensure_2d=True, input_name=name)
    if pts.shape[1] != 2:
        raise DomainError(f"{name} must have two columns (r, z), got {pts.shape[1]}")
    r = pts[:, 0]
    if positive_radius and np.any(r <= 0.0):
        raise DomainError(f"{name}: ring radii must be positive")
    if np.any(r < 0.0):
        raise DomainError(f"{name}: radial coordinates must be non-negative")
    return np.ascontiguousarray(pts)


def check_amplitudes(amplitudes, n_sources, n_modes=None):
    """Complex (n_sources, n_modes) amplitude array; 1-D input means one mode."""
    amps = np.asarray(amplitudes)
    if amps.ndim == 1:
        amps = amps[:, None]
    if amps.ndim != 2 or amps.shape[0] != n_sources:
        raise DomainError(f"amplitudes must have shape ({n_sources}, n_modes), got {amps.shape}")
    amps = amps.astype(complex)
    if n_modes is not None:
        n_modes = int(n_modes)
        if n_modes < 1 or n_modes > amps.shape[1]:
            raise ConfigurationError(f"n_modes={n_modes} but amplitudes carry {amps.shape[1]} modes")
        amps = amps[:, :n_modes]
    if amps.shape[1] < 1:
        raise DomainError("at least one Fourier mode is required")
    if not np.all(np.isfinite(amps)):
        raise DomainError("amplitudes must be finite")
    return np.ascontiguousarray(amps)


def check_problem(source_points, amplitudes, field_points, n_modes=None):
    src = check_points(source_points, "source_points", positive_radius=True)
    amps = check_amplitudes(amplitudes, len(src), n_modes)
    fld = check_points(field_points, "field_points")
    return src, amps, fld
