"""Reference evaluations: adaptive quadrature of G^(n) and direct summation.

``greens_quadrature`` never touches the Legendre recursions. It integrates
either the defining azimuthal integral

    G^(n) = (1 / 2 pi) int_0^pi cos(n t) / R(t) dt

or, when that integral cancels too strongly (large n, chi far from 1),
the positive toroidal representation

    Q_{n-1/2}(cosh eta) = int_eta^inf exp(-n t) / sqrt(2 cosh t - 2 cosh eta) dt

after the substitution t = eta + s^2, which removes the endpoint singularity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _kernels
from .exceptions import ConvergenceError, DomainError, SingularityError
from .greens import RingGeometry, greens_table
from .specfun import SINGULAR_TOL

# QUADPACK refuses relative tolerances below 50 machine epsilons
_QUAD_MIN_REL = 50.0 * np.finfo(float).eps * 1.001


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-14
    abs_tol: float = 0.0
    max_subdivisions: int = 500

    def __post_init__(self):
        if self.rel_tol < 1e-15:
            raise ValueError("rel_tol below 1e-15 cannot be met in double precision")
        if not 1 <= self.max_subdivisions <= 100_000:
            raise ValueError("max_subdivisions must lie in [1, 100000]")


@dataclass(frozen=True)
class ModalRingSource:
    """A ring at (r, z) carrying Fourier amplitudes S^(n), n = 0..N."""

    r: float
    z: float
    amplitudes: np.ndarray

    def __post_init__(self):
        if not self.r > 0.0:
            raise DomainError("ring source radius must be positive")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(amps)):
            raise DomainError("ring source amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)


def _quad(f, a, b, spec, points=None):
    if points is not None and len(points) >= spec.max_subdivisions:
        points = None  # QUADPACK needs more subintervals than break points
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(f, a, b, epsabs=spec.abs_tol, epsrel=max(spec.rel_tol, _QUAD_MIN_REL),
                                        limit=spec.max_subdivisions, points=points, full_output=1)[:3]
    return val, err, info


def _check(val, err, spec, what, scale=None):
    # quad reports roundoff-limited estimates at ~1e-14; allow a factor of 100
    size = abs(val) if scale is None else max(abs(val), scale)
    if not np.isfinite(val) or err > max(spec.abs_tol, 100.0 * max(spec.rel_tol, _QUAD_MIN_REL) * size):
        raise ConvergenceError(f"{what}: quadrature error estimate {err:.3g} for value {val:.17g}")


def _definition_integral(r, r1, x, n, spec):
    rho_m2 = (r - r1) ** 2 + x * x
    four_rr1 = 4.0 * r * r1

    def f(t):
        return math.cos(n * t) / math.sqrt(rho_m2 + four_rr1 * math.sin(0.5 * t) ** 2)

    width = math.sqrt(rho_m2 / four_rr1)
    points = [p for p in (width, 10.0 * width) if 0.0 < p < math.pi] or None
    val, err, _ = _quad(f, 0.0, math.pi, spec, points)
    scale = None
    if n and err > 100.0 * max(spec.rel_tol, _QUAD_MIN_REL) * abs(val):
        # oscillation cancels: judge the error against the integral of |f|
        zeros = [(k + 0.5) * math.pi / n for k in range(n)]
        scale, _, _ = _quad(lambda t: abs(f(t)), 0.0, math.pi, spec, sorted(set(zeros + (points or []))))
    what = f"G^({n}) definition integral at r={r}, r1={r1}, x={x}"
    _check(val, err, spec, what, scale)
    return val / (2.0 * math.pi)


def _toroidal_integral(r, r1, x, n, spec):
    cm1 = ((r - r1) ** 2 + x * x) / (2.0 * r * r1)
    eta = math.log1p(cm1 + math.sqrt(cm1 * (2.0 + cm1)))
    nu = n + 0.5

    def f(s):
        s2 = s * s
        den = (-math.expm1(-2.0 * eta - s2)) * (-math.expm1(-s2))
        if s == 0.0:
            return 2.0 / math.sqrt(-math.expm1(-2.0 * eta))
        return 2.0 * s * math.exp(-nu * s2) / math.sqrt(den)

    root = math.sqrt(eta)
    split = max(4.0, 2.0 * root)
    points = [p for p in (root, 3.0 * root) if p < split] or None
    v1, e1, _ = _quad(f, 0.0, split, spec, points)
    v2, e2, _ = _quad(f, split, math.inf, spec)
    val, err = v1 + v2, e1 + e2
    _check(val, err, spec, f"Q_({n}-1/2) toroidal integral at r={r}, r1={r1}, x={x}")
    scale = math.exp(-nu * eta) / (2.0 * math.pi * math.sqrt(r * r1))
    return val * scale


def greens_quadrature(geometry, n, spec=None, method="auto"):
    """G^(n)(r, r1, x) by adaptive quadrature.

    method: "definition", "toroidal" or "auto" (the definition integral
    unless its oscillation would cost more than a factor e in cancellation).
    """
    spec = QuadratureSpec() if spec is None else spec
    r, r1, x = (float(v) for v in (geometry.r, geometry.r1, geometry.x))
    if not (r > 0.0 and r1 > 0.0):
        raise DomainError("ring radii must be positive")
    cm1 = ((r - r1) ** 2 + x * x) / (2.0 * r * r1)
    if not cm1 > SINGULAR_TOL:
        raise SingularityError(f"coincident rings r={r}, r1={r1}, x={x}")
    n = abs(int(n))
    if method == "auto":
        log_lam = math.log1p(cm1 + math.sqrt(cm1 * (2.0 + cm1)))
        method = "definition" if n * log_lam <= 1.0 else "toroidal"
    if method == "definition":
        return _definition_integral(r, r1, x, n, spec)
    if method == "toroidal":
        return _toroidal_integral(r, r1, x, n, spec)
    raise ValueError(f"unknown quadrature method {method!r}")


def _pack_sources(sources):
    if isinstance(sources, ModalRingSource):
        sources = [sources]
    pts = np.array([[s.r, s.z] for s in sources], dtype=float).reshape(-1, 2)
    amps = np.array([s.amplitudes for s in sources], dtype=complex)
    return pts, amps


def direct_pair(src, fld, n_modes=None):
    """Modal potential at field point ``fld = (r, z)`` due to one ring source."""
    amps = src.amplitudes if n_modes is None else src.amplitudes[:n_modes]
    r, z = (float(v) for v in fld)
    if r < 0.0:
        raise DomainError("field radius must be non-negative")
    if r == 0.0:
        g = np.zeros(len(amps))
        g[0] = 0.5 / math.hypot(src.r, z - src.z)
    else:
        g = greens_table(RingGeometry(r, src.r, z - src.z), len(amps) - 1).g
    return amps * g


def direct_evaluate(source_points, amplitudes, field_points, n_modes=None):
    """O(N_s N_f) modal summation; returns complex array (n_field, n_modes).

    ``source_points`` may also be a list of ModalRingSource, in which case
    ``amplitudes`` is ignored.
    """
    from .validation import check_problem

    if len(source_points) and isinstance(source_points[0], ModalRingSource):
        source_points, amplitudes = _pack_sources(source_points)
    src, amps, fld = check_problem(source_points, amplitudes, field_points, n_modes)
    out = np.zeros((len(fld), amps.shape[1]), dtype=complex)
    if len(src) == 0 or len(fld) == 0:
        return out
    status = np.full(len(fld), -1, dtype=np.int64)
    _kernels.kernel("_direct_sum")(src[:, 0].copy(), src[:, 1].copy(), amps, fld[:, 0].copy(),
                                   fld[:, 1].copy(), -1, out, status)
    bad = np.flatnonzero(status >= 0)
    if bad.size:
        p = int(bad[0])
        s = int(status[p])
        raise SingularityError(
            f"field point {p} at {tuple(fld[p])} coincides with source ring {s} at {tuple(src[s])}",
            pair=(s, p))
    return out


def modal_errors(approx, reference):
    """Per-mode max-norm relative error max|a - b| / max|b|."""
    approx = np.asarray(approx)
    reference = np.asarray(reference)
    num = np.max(np.abs(approx - reference), axis=0)
    den = np.max(np.abs(reference), axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / den, np.where(num > 0, np.inf, 0.0))


__all__ = ["QuadratureSpec", "ModalRingSource", "greens_quadrature", "direct_pair",
           "direct_evaluate", "modal_errors"]
