"""Complete elliptic integrals and the sequence Q_{n-1/2}(chi), chi > 1.

The scalar kernels are compiled with numba so the direct-summation and
near-field loops can call them per ring pair. Public wrappers validate
arguments and turn status codes into exceptions.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from .exceptions import DomainError, PrecisionLossError

#: forward recursion below this argument, Miller backward recursion above
SWITCH_CHI = 1.008
#: minimum number of extra terms for the backward recursion start index
BACKWARD_HEADROOM = 80
#: chi - 1 at or below this value is treated as coincident rings
SINGULAR_TOL = 1e-14

# Carlson duplication stopping constants, (3r)^(-1/6) and (r/4)^(-1/6), r = 1e-16
_RF_STOP = (3.0e-16) ** (-1.0 / 6.0)
_RD_STOP = (0.25e-16) ** (-1.0 / 6.0)
# target relative contamination of the Miller recursion, ln(1e17) / 2
_MILLER_LOG_TARGET = 0.5 * math.log(1e17)
_RESCALE_AT = 1e250
_RESCALE_BY = 1e-250

OK = 0
SINGULAR = 1
PRECISION_LOSS = 2


class EllipticPair(NamedTuple):
    k_complete: float
    e_complete: float


class LegendreQSequence(NamedTuple):
    chi: float
    values: np.ndarray


@njit(cache=True)
def carlson_rf(x, y, z):
    """Carlson's symmetric integral R_F(x, y, z) by duplication."""
    x0, y0 = x, y
    a0 = (x + y + z) / 3.0
    q = _RF_STOP * max(abs(a0 - x), abs(a0 - y), abs(a0 - z))
    a = a0
    fac = 1.0
    while q * fac >= abs(a):
        sx = math.sqrt(x)
        sy = math.sqrt(y)
        sz = math.sqrt(z)
        lam = sx * sy + sy * sz + sz * sx
        x = 0.25 * (x + lam)
        y = 0.25 * (y + lam)
        z = 0.25 * (z + lam)
        a = 0.25 * (a + lam)
        fac *= 0.25
    X = (a0 - x0) * fac / a
    Y = (a0 - y0) * fac / a
    Z = -(X + Y)
    e2 = X * Y - Z * Z
    e3 = X * Y * Z
    return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / math.sqrt(a)


@njit(cache=True)
def carlson_rd(x, y, z):
    """Carlson's symmetric integral R_D(x, y, z) by duplication."""
    x0, y0 = x, y
    a0 = (x + y + 3.0 * z) / 5.0
    q = _RD_STOP * max(abs(a0 - x), abs(a0 - y), abs(a0 - z))
    a = a0
    fac = 1.0
    s = 0.0
    while q * fac >= abs(a):
        sx = math.sqrt(x)
        sy = math.sqrt(y)
        sz = math.sqrt(z)
        lam = sx * sy + sy * sz + sz * sx
        s += fac / (sz * (z + lam))
        x = 0.25 * (x + lam)
        y = 0.25 * (y + lam)
        z = 0.25 * (z + lam)
        a = 0.25 * (a + lam)
        fac *= 0.25
    X = (a0 - x0) * fac / a
    Y = (a0 - y0) * fac / a
    Z = -(X + Y) / 3.0
    xy = X * Y
    z2 = Z * Z
    e2 = xy - 6.0 * z2
    e3 = (3.0 * xy - 8.0 * z2) * Z
    e4 = 3.0 * (xy - z2) * z2
    e5 = xy * z2 * Z
    series = (1.0 - 3.0 * e2 / 14.0 + e3 / 6.0 + 9.0 * e2 * e2 / 88.0
              - 3.0 * e4 / 22.0 - 9.0 * e2 * e3 / 52.0 + 3.0 * e5 / 26.0)
    return fac * series / (a * math.sqrt(a)) + 3.0 * s


@njit(cache=True)
def _ke_complementary(mc):
    # K and E from the complementary parameter mc = 1 - k^2
    k = carlson_rf(0.0, mc, 1.0)
    e = k - (1.0 - mc) / 3.0 * carlson_rd(0.0, mc, 1.0)
    return k, e


@njit(cache=True)
def _q_seeds(cm1):
    """Q_{-1/2} and Q_{1/2} at chi = 1 + cm1."""
    chi = 1.0 + cm1
    mu = math.sqrt(2.0 / (2.0 + cm1))
    k, e = _ke_complementary(cm1 / (2.0 + cm1))
    q_m = mu * k
    if chi < 1.5:
        q_p = mu * (chi * k - (1.0 + chi) * e)
    else:
        # Landen form, free of the cancellation in chi*K - (1+chi)*E
        root = math.sqrt(cm1 * (2.0 + cm1))
        t = 1.0 / (chi + root)
        t2 = t * t
        q_p = 2.0 / math.sqrt(t) * t2 / 3.0 * carlson_rd(0.0, 1.0 - t2, 1.0)
    return q_m, q_p


@njit(cache=True)
def miller_headroom(cm1, minimum):
    """Start offset for the backward recursion at chi = 1 + cm1."""
    log_lam = math.log1p(cm1 + math.sqrt(cm1 * (2.0 + cm1)))
    need = int(math.ceil(_MILLER_LOG_TARGET / log_lam)) + 2
    return max(minimum, need)


@njit(cache=True)
def q_sequence_into(cm1, n_max, headroom, out, force_branch):
    """Fill out[0..n_max] with Q_{n-1/2}(1 + cm1); return a status code.

    force_branch: 0 automatic, 1 forward, 2 backward. headroom < 0 selects
    the adaptive start offset (never below BACKWARD_HEADROOM).
    """
    if not cm1 > SINGULAR_TOL:
        return SINGULAR
    chi = 1.0 + cm1
    forward = chi < SWITCH_CHI
    if force_branch == 1:
        forward = True
    elif force_branch == 2:
        forward = False
    if forward:
        q_m, q_p = _q_seeds(cm1)
        out[0] = q_m
        if n_max >= 1:
            out[1] = q_p
        for n in range(2, n_max + 1):
            out[n] = (4.0 * (n - 1) * chi * out[n - 1] - (2.0 * n - 3.0) * out[n - 2]) * (1.0 / (2.0 * n - 1.0))
    else:
        if headroom < 0:
            start = n_max + miller_headroom(cm1, BACKWARD_HEADROOM)
        else:
            start = n_max + headroom
        hi = 0.0
        lo = 1.0
        # above n_max + 1 nothing is stored; values grow by ~lambda per step
        for n in range(start, n_max + 2, -1):
            nxt = (4.0 * (n - 1) * chi * lo - (2.0 * n - 1.0) * hi) * (1.0 / (2.0 * n - 3.0))
            hi = lo
            lo = nxt
            if lo > _RESCALE_AT:
                hi *= _RESCALE_BY
                lo *= _RESCALE_BY
        for n in range(min(start, n_max + 2), 1, -1):
            nxt = (4.0 * (n - 1) * chi * lo - (2.0 * n - 1.0) * hi) * (1.0 / (2.0 * n - 3.0))
            hi = lo
            lo = nxt
            out[n - 2] = lo
            if lo > _RESCALE_AT:
                hi *= _RESCALE_BY
                lo *= _RESCALE_BY
                for m in range(n - 2, n_max + 1):
                    out[m] *= _RESCALE_BY
        # only Q_{-1/2} = mu K is needed to normalise the minimal solution
        q_m = math.sqrt(2.0 / (2.0 + cm1)) * carlson_rf(0.0, cm1 / (2.0 + cm1), 1.0)
        scale = q_m / out[0]
        for n in range(n_max + 1):
            out[n] *= scale
    for n in range(n_max + 1):
        v = out[n]
        if not (v > 0.0 and v < np.inf) or v < 2.2250738585072014e-308:
            return PRECISION_LOSS
    return OK


@njit(cache=True)
def _q_sequence_batch(cm1, n_max, headroom, force_branch, out):
    buf = np.empty(n_max + 1)
    for p in range(cm1.size):
        status = q_sequence_into(cm1[p], n_max, headroom, buf, force_branch)
        if status != OK:
            return p, status
        for n in range(n_max + 1):
            out[p, n] = buf[n]
    return -1, OK


def raise_for_status(status, where=""):
    if status == SINGULAR:
        raise DomainError(f"chi must exceed 1 + {SINGULAR_TOL:g} (coincident rings){where}")
    if status == PRECISION_LOSS:
        raise PrecisionLossError(f"Q_(n-1/2) underflowed or became non-finite{where}")


def elliptic_ke(modulus):
    """Complete elliptic integrals K(k) and E(k) for modulus 0 <= k < 1."""
    k = float(modulus)
    if not 0.0 <= k < 1.0:
        raise DomainError(f"elliptic modulus must lie in [0, 1), got {modulus!r}")
    kk, ee = _ke_complementary((1.0 - k) * (1.0 + k))
    return EllipticPair(kk, ee)


def _check_chi(chi):
    chi = float(chi)
    if not np.isfinite(chi) or not chi - 1.0 > SINGULAR_TOL:
        raise DomainError(f"chi must be finite and exceed 1 + {SINGULAR_TOL:g}, got {chi!r}")
    return chi


def legendre_q_seed(chi):
    """Return (Q_{-1/2}(chi), Q_{1/2}(chi))."""
    chi = _check_chi(chi)
    q_m, q_p = _q_seeds(chi - 1.0)
    if not (np.isfinite(q_m) and np.isfinite(q_p)):
        raise PrecisionLossError(f"non-finite Legendre seed at chi={chi!r}")
    return q_m, q_p


def legendre_q_sequence(chi, n_max, headroom=None, branch="auto"):
    """Q_{n-1/2}(chi) for n = 0..n_max.

    Uses forward recursion from the elliptic-integral seeds for chi below
    ``SWITCH_CHI`` and Miller's backward recursion otherwise. ``headroom``
    fixes the backward start index at ``n_max + headroom``; by default it
    is at least ``BACKWARD_HEADROOM`` and grows as chi approaches the
    switch point so the minimal solution is resolved to full precision.
    """
    chi = _check_chi(chi)
    n_max = int(n_max)
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    if headroom is not None and int(headroom) < 2:
        raise DomainError("headroom must be at least 2")
    force = {"auto": 0, "forward": 1, "backward": 2}[branch]
    out = np.empty(n_max + 1)
    status = q_sequence_into(chi - 1.0, n_max, -1 if headroom is None else int(headroom), out, force)
    raise_for_status(status, f" at chi={chi!r}")
    return LegendreQSequence(chi, out)


def legendre_q_batch(cm1, n_max, headroom=None):
    """Vectorised Q_{n-1/2}(1 + cm1) for an array of chi - 1 values."""
    cm1 = np.asarray(cm1, dtype=float)
    flat = np.ascontiguousarray(cm1.reshape(-1))
    out = np.empty((flat.size, int(n_max) + 1))
    bad, status = _q_sequence_batch(flat, int(n_max), -1 if headroom is None else int(headroom), 0, out)
    if bad >= 0:
        raise_for_status(status, f" at chi-1={flat[bad]!r}")
    return out.reshape(cm1.shape + (int(n_max) + 1,))
