"""Independent reference computations used only by the tests."""

from __future__ import annotations

import warnings
from math import comb, factorial

import numpy as np
from scipy import integrate

from cylfmm.greens import RingGeometry, greens_table

# (reach, ratio, levels, jittered copies) per total derivative order. Low
# orders want small steps; high orders are limited by rounding in the table
# values, so they use wider steps and average several anisotropic stencils.
FD_SCHEDULE = {1: (0.2, 1.5, 6, 1), 2: (0.2, 1.5, 6, 1), 3: (0.2, 1.5, 6, 1),
               4: (0.3, 1.3, 6, 4), 5: (0.3, 1.3, 6, 4)}
FD_HIGH = (0.5, 1.2, 6, 16)


def central_weights(p):
    """Offsets (in units of h/2) and weights of the p-th central difference."""
    return [(p - 2 * q, (-1) ** q * comb(p, q)) for q in range(p + 1)]


def well_separated_geometries(count, seed):
    """Ring pairs with r, r1 in [0.5, 2], 0.2 <= |x| <= 1 and rho_minus <= 0.8 min(r, r1)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        r, r1 = rng.uniform(0.5, 2.0, 2)
        x = rng.uniform(0.2, 1.0) * rng.choice([-1.0, 1.0])
        if np.hypot(r - r1, x) <= 0.8 * min(r, r1):
            out.append(RingGeometry(float(r), float(r1), float(x)))
    return out


def fd_key(geometry, n_max, key, h, stretch=(1.0, 1.0, 1.0)):
    """One central-difference estimate of Gbar[key] for n = 0..n_max with step h (per-axis stretch)."""
    i, j, k = key
    offs, wts = [], []
    for a, wa in central_weights(i):
        for b, wb in central_weights(j):
            for c, wc in central_weights(k):
                offs.append((a * stretch[0], b * stretch[1], c * stretch[2]))
                wts.append(wa * wb * wc)
    offs = np.array(offs) * (h / 2)
    g = greens_table(RingGeometry(geometry.r + offs[:, 0], geometry.r1 + offs[:, 1],
                                  geometry.x + offs[:, 2]), n_max).g
    step = h ** (i + j + k) * stretch[0] ** i * stretch[1] ** j * stretch[2] ** k
    return (np.array(wts, dtype=float) @ g) / step / (factorial(i) * factorial(j) * factorial(k))


def _neville_zero(hs, vals):
    # polynomial extrapolation in h^2 to h = 0
    h2 = [h * h for h in hs]
    col = list(vals)
    for lev in range(1, len(col)):
        col = [(h2[a] * col[a + 1] - h2[a + lev] * col[a]) / (h2[a] - h2[a + lev])
               for a in range(len(col) - 1)]
    return col[0]


def richardson_key(geometry, n_max, key, rng=None):
    """Richardson-extrapolated central differences of greens_table for one (i, j, k)."""
    i, j, k = key
    reach, ratio, levels, copies = FD_SCHEDULE.get(i + j + k, FD_HIGH)
    rho = np.hypot(geometry.r - geometry.r1, geometry.x)
    h0 = reach * rho / max(0.5 * np.hypot(i + j, k), 0.5)
    # keep every stencil point at positive radius
    if i:
        h0 = min(h0, 0.8 * geometry.r / (i / 2))
    if j:
        h0 = min(h0, 0.8 * geometry.r1 / (j / 2))
    hs = [h0 / ratio ** s for s in range(levels)]
    rng = np.random.default_rng(0) if rng is None else rng
    total = 0.0
    for c in range(copies):
        stretch = (1.0, 1.0, 1.0) if copies == 1 else rng.uniform(0.85, 1.0, 3)
        total = total + _neville_zero(hs, [fd_key(geometry, n_max, key, h, stretch) for h in hs])
    return total / copies


def richardson_tensor(geometry, n_max, order, seed=0):
    """Dict (i, j, k) -> Gbar for all 1 <= i+j+k <= order."""
    rng = np.random.default_rng(seed)
    return {(i, j, m - i - j): richardson_key(geometry, n_max, (i, j, m - i - j), rng)
            for m in range(1, order + 1) for i in range(m + 1) for j in range(m + 1 - i)}


def quadrature_first_derivatives(geometry, n):
    """(dG/dr, dG/dr1, dG/dx) by differentiating under the ring integral and integrating numerically."""
    r, r1, x = geometry.r, geometry.r1, geometry.x

    def integrand(t, which):
        c = np.cos(t)
        big_r = np.sqrt(r * r + r1 * r1 - 2 * r * r1 * c + x * x)
        num = {0: -(r - r1 * c), 1: -(r1 - r * c), 2: -x}[which]
        return num * np.cos(n * t) / big_r ** 3

    pts = [(q + 0.5) * np.pi / n for q in range(n)] if n else None
    out = []
    for which in range(3):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(integrand, 0.0, np.pi, args=(which,), epsabs=0.0, epsrel=2e-14,
                                    limit=400, points=pts)
        out.append(val / (2 * np.pi))
    return np.array(out)
