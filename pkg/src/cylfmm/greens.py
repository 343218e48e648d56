"""Modal Green's function G^(n)(r, r1, x) and its scaled derivative tensor.

The tensor stores Taylor coefficients

    Gbar[n, i, j, k] = d^(i+j+k) G^(n) / (dr^i dr1^j dx^k) / (i! j! k!)

for i + j + k <= order, flattened over (i, j, k) with ``tensor_index``.
Geometry arguments broadcast, so a whole level of box-pair geometries is
evaluated in one call.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, PrecisionLossError, SingularityError
from .specfun import SINGULAR_TOL, legendre_q_batch

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RingGeometry:
    """Field radius r, source radius r1 and axial separation x = z - z1."""

    r: np.ndarray | float
    r1: np.ndarray | float
    x: np.ndarray | float

    @property
    def rho_plus_sq(self):
        return (np.asarray(self.r) + self.r1) ** 2 + np.asarray(self.x) ** 2

    @property
    def rho_minus_sq(self):
        return (np.asarray(self.r) - self.r1) ** 2 + np.asarray(self.x) ** 2

    @property
    def chi_minus_one(self):
        return self.rho_minus_sq / (2.0 * np.asarray(self.r) * self.r1)

    @property
    def chi(self):
        return 1.0 + self.chi_minus_one

    def swapped(self):
        return RingGeometry(self.r1, self.r, self.x)

    def scaled(self, sigma):
        return RingGeometry(sigma * np.asarray(self.r), sigma * np.asarray(self.r1), sigma * np.asarray(self.x))


@dataclass(frozen=True)
class GreensTable:
    geometry: RingGeometry
    n_max: int
    g: np.ndarray


@dataclass(frozen=True)
class GreensDerivativeTensor:
    geometry: RingGeometry
    n_max: int
    order: int
    coeffs: np.ndarray

    def coeff(self, n, i, j, k):
        lin = tensor_index(self.order)[1][i, j, k]
        if lin < 0:
            raise IndexError(f"({i}, {j}, {k}) exceeds total order {self.order}")
        return self.coeffs[..., n, lin]


@dataclass(frozen=True)
class RationalKernels:
    """Scaled x-derivatives (1/q!) d^q/dx^q of the rational kernels.

    Each array has shape (2, q_max + 1, *batch); the leading axis selects
    rho_+ (0) or rho_- (1).

    x_over_rho  : x / rho^2
    l_over_rho  : (r^2 - r1^2 - x^2) / rho^2
    dl_dr1      : d/dr1 of l_over_rho
    """

    x_over_rho: np.ndarray
    l_over_rho: np.ndarray
    dl_dr1: np.ndarray


@functools.lru_cache(maxsize=None)
def tensor_index(order):
    """Multi-indices (i, j, k) with i + j + k <= order and their lookup table.

    Returns ``(triples, lookup)`` where ``triples[lin] = (i, j, k)`` and
    ``lookup[i, j, k] = lin`` (or -1 outside the simplex).
    """
    triples = [(i, j, m - i - j) for m in range(order + 1)
               for i in range(m, -1, -1) for j in range(m - i, -1, -1)]
    lookup = np.full((order + 1,) * 3, -1, dtype=np.intp)
    for lin, t in enumerate(triples):
        lookup[t] = lin
    triples = np.array(triples, dtype=np.intp).reshape(-1, 3)
    triples.setflags(write=False)
    lookup.setflags(write=False)
    return triples, lookup


def _broadcast_geometry(geometry):
    r, r1, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (geometry.r, geometry.r1, geometry.x)))
    if np.any(~np.isfinite(r)) or np.any(~np.isfinite(r1)) or np.any(~np.isfinite(x)):
        raise DomainError("ring geometry must be finite")
    if np.any(r <= 0.0) or np.any(r1 <= 0.0):
        raise DomainError("ring radii r and r1 must be positive")
    cm1 = ((r - r1) ** 2 + x ** 2) / (2.0 * r * r1)
    if np.any(cm1 <= SINGULAR_TOL):
        bad = np.flatnonzero(cm1.reshape(-1) <= SINGULAR_TOL)[0]
        raise SingularityError(
            f"coincident rings: r={r.reshape(-1)[bad]!r}, r1={r1.reshape(-1)[bad]!r}, x={x.reshape(-1)[bad]!r}",
            pair=int(bad))
    return r, r1, x, cm1


def _table_values(r, r1, cm1, n_hi):
    q = legendre_q_batch(cm1, n_hi)
    return q / (TWO_PI * np.sqrt(r * r1))[..., None]


def greens_table(geometry, n_max):
    """G^(n)(r, r1, x) for n = 0..n_max; shape (*batch, n_max + 1)."""
    n_max = int(n_max)
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    r, r1, _, cm1 = _broadcast_geometry(geometry)
    g = _table_values(r, r1, cm1, n_max + 1)[..., : n_max + 1]
    return GreensTable(geometry, n_max, g)


def _kernels(r, r1, x, q_max):
    # 1/(x - i a) with a = r +/- r1 gives all three kernels in closed form
    a = np.stack([r + r1, r - r1])
    w = 1.0 / (x - 1j * a)
    q = np.arange(q_max + 1).reshape((-1,) + (1,) * a.ndim)
    powers = w[None] * (-w[None]) ** q          # (-1)^q w^(q+1)
    x_over = powers.real.swapaxes(0, 1)
    l_over = (2.0 * r * powers.imag).swapaxes(0, 1)
    l_over[:, 0] -= 1.0
    sign = np.array([1.0, -1.0]).reshape((2,) + (1,) * a.ndim)
    dl = (2.0 * r * (q + 1) * (powers * w[None]).real).swapaxes(0, 1) * sign
    return x_over, l_over, dl


def rational_kernel_derivs(geometry, q_max):
    """Scaled x-derivatives of x/rho_pm^2, (r^2-r1^2-x^2)/rho_pm^2 and its r1-derivative."""
    r, r1, x, _ = _broadcast_geometry(geometry)
    x_over, l_over, dl = _kernels(r, r1, x, int(q_max))
    return RationalKernels(x_over, l_over, dl)


def greens_derivatives(geometry, n_max, order):
    """Scaled derivative tensor of G^(n) up to total order ``order``.

    Build order: pure x-derivatives from the Legendre derivative identity,
    first r and r1 derivatives and the mixed r r1 derivative from the
    same identity, then everything else from the cylindrical Laplace
    equation applied in r1 (for i <= 1) and in r.
    """
    n_max = int(n_max)
    order = int(order)
    if n_max < 0 or order < 0:
        raise DomainError("n_max and order must be non-negative")
    r, r1, x, cm1 = _broadcast_geometry(geometry)
    batch = r.shape
    r, r1, x, cm1 = (v.reshape(-1)[:, None] for v in (r, r1, x, cm1))
    n_ext = max(n_max, 1) + 1
    n = np.arange(n_ext, dtype=float)
    nh = n - 0.5
    n2 = n * n
    prev = np.r_[1, np.arange(n_ext - 1)]     # G^(-1) = G^(1)

    g0 = _table_values(r[:, 0], r1[:, 0], cm1[:, 0], n_ext - 1)
    kx, kl, kd = _kernels(r, r1, x, order)
    _, kl_s, _ = _kernels(r1, r, x, order)

    triples, lookup = tensor_index(order)
    out = np.zeros((r.shape[0], n_ext, len(triples)))

    def put(i, j, k, val):
        out[:, :, lookup[i, j, k]] = val

    def get(i, j, k):
        return out[:, :, lookup[i, j, k]]

    put(0, 0, 0, g0)
    # pure x derivatives
    for k in range(order):
        acc = 0.0
        for q in range(k + 1):
            a = get(0, 0, k - q)
            b = a[:, prev]
            acc = acc + (a + b) * kx[0, q] + (a - b) * kx[1, q]
        put(0, 0, k + 1, nh * acc / (k + 1))

    def first_radial(rr, kern, jdx):
        for k in range(order):
            acc = 0.0
            for q in range(k + 1):
                a = get(0, 0, k - q)
                b = a[:, prev]
                acc = acc + (a + b) * kern[0, q] + (a - b) * kern[1, q]
            put(*jdx(k), (nh * acc - get(0, 0, k)) / (2.0 * rr))

    if order >= 1:
        first_radial(r, kl, lambda k: (1, 0, k))
        first_radial(r1, kl_s, lambda k: (0, 1, k))
    # mixed r r1
    for k in range(order - 1):
        acc = 0.0
        for q in range(k + 1):
            a = get(0, 0, k - q)
            b = a[:, prev]
            c = get(0, 1, k - q)
            d = c[:, prev]
            acc = (acc + (a + b) * kd[0, q] + (c + d) * kl[0, q]
                   + (a - b) * kd[1, q] + (c - d) * kl[1, q])
        put(1, 1, k, (nh * acc - get(0, 1, k)) / (2.0 * r))

    def laplace_step(rad):
        # value at radial index a from indices a-1, a-2 and x-index k+2
        def step(a, k, idx):
            lo1 = get(*idx(a - 1, k))
            lo2 = get(*idx(a - 2, k))
            rhs = (2 * a - 3) * (a - 1) * rad * lo1 + ((a - 2) ** 2 - n2) * lo2
            kk = (k + 1) * (k + 2)
            xs = rad * rad * get(*idx(a - 2, k + 2))
            if a >= 3:
                xs = xs + 2.0 * rad * get(*idx(a - 3, k + 2))
            if a >= 4:
                xs = xs + get(*idx(a - 4, k + 2))
            put(*idx(a, k), -(rhs + kk * xs) / (rad * rad * a * (a - 1)))
        return step

    step_r1 = laplace_step(r1)
    for i in (0, 1):
        for j in range(2, order - i + 1):
            for k in range(order - i - j + 1):
                step_r1(j, k, lambda jj, kk, i=i: (i, jj, kk))
    step_r = laplace_step(r)
    for i in range(2, order + 1):
        for j in range(order - i + 1):
            for k in range(order - i - j + 1):
                step_r(i, k, lambda ii, kk, j=j: (ii, j, kk))

    coeffs = out[:, : n_max + 1, :]
    if not np.all(np.isfinite(coeffs)):
        raise PrecisionLossError("non-finite Green's function derivative; order too large for this geometry")
    coeffs = coeffs.reshape(batch + coeffs.shape[1:])
    return GreensDerivativeTensor(geometry, n_max, order, coeffs)


def laplace_residual(tensor):
    """Largest relative residual of the r- and r1-Laplace identities.

    For every (i, j, k) with i + j + k <= order - 2 the differentiated
    Laplace equation is assembled from stored coefficients; the residual
    is divided by the sum of magnitudes of its terms. Returns an array of
    shape (*batch, n_modes).
    """
    order = tensor.order
    if order < 2:
        return np.zeros(tensor.coeffs.shape[:-1])
    _, lookup = tensor_index(order)
    c = tensor.coeffs
    n2 = np.arange(tensor.n_max + 1, dtype=float) ** 2
    r = np.asarray(tensor.geometry.r, dtype=float)[..., None]
    r1 = np.asarray(tensor.geometry.r1, dtype=float)[..., None]
    worst = np.zeros(c.shape[:-1])

    def g(i, j, k):
        if i < 0 or j < 0:
            return 0.0
        return c[..., lookup[i, j, k]]

    for i in range(order - 1):
        for j in range(order - 1 - i):
            for k in range(order - 1 - i - j):
                kk = (k + 1) * (k + 2)
                for rad, idx in ((r, lambda a, b: (a, j, b)), (r1, lambda a, b: (i, a, b))):
                    a = i if rad is r else j
                    terms = [
                        rad * rad * (a + 2) * (a + 1) * g(*idx(a + 2, k)),
                        (2 * a + 1) * (a + 1) * rad * g(*idx(a + 1, k)),
                        (a * a - n2) * g(*idx(a, k)),
                        kk * rad * rad * g(*idx(a, k + 2)),
                        kk * 2.0 * rad * g(*idx(a - 1, k + 2)),
                        kk * g(*idx(a - 2, k + 2)),
                    ]
                    total = sum(terms)
                    scale = sum(np.abs(t) for t in terms)
                    with np.errstate(invalid="ignore", divide="ignore"):
                        rel = np.where(scale > 0, np.abs(total) / scale, 0.0)
                    worst = np.maximum(worst, rel)
    return worst


def taylor_eval(tensor, dr, dr1, dx, n):
    """Truncated Taylor sum of mode n about the tensor's expansion point."""
    triples, _ = tensor_index(tensor.order)
    mono = (np.power(dr, triples[:, 0]) * np.power(dr1, triples[:, 1]) * np.power(dx, triples[:, 2]))
    return tensor.coeffs[..., n, :] @ mono
