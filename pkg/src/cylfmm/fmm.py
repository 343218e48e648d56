"""Uniform-tree fast multipole method for modal ring sources.

Moments S[n, i, j] are taken about box centres with source offsets
(dr, dz); local expansions Phi[n, k, l] are Taylor coefficients in the
field offsets. Both are stored flat over the pairs (i, j), i + j <= order,
in the order given by ``moment_index``.
"""

from __future__ import annotations

import functools
import time
from math import comb

import numpy as np

from . import _kernels
from .exceptions import ConfigurationError, SingularityError
from .greens import RingGeometry, greens_derivatives, tensor_index
from .tree import (BI, BO, FI, FO, VARIANT_CODE, VARIANTS, build, classify, domain_for, level_interactions,
                   morton_decode, morton_encode)
from .validation import check_problem

MIN_DEPTH, MAX_DEPTH = 2, 12
MIN_ORDER, MAX_ORDER = 1, 24
TRUNCATIONS = ("combined", "product")
PHASES = ("sort", "moments", "upward", "downward", "local_direct")
# tensors evaluated per batch in the downward pass (bounds memory)
_TENSOR_CHUNK = 256


def check_config(order, depth, truncation="product"):
    if not MIN_ORDER <= int(order) <= MAX_ORDER:
        raise ConfigurationError(f"expansion order must lie in [{MIN_ORDER}, {MAX_ORDER}], got {order}")
    if not MIN_DEPTH <= int(depth) <= MAX_DEPTH:
        raise ConfigurationError(f"tree depth must lie in [{MIN_DEPTH}, {MAX_DEPTH}], got {depth}")
    if truncation not in TRUNCATIONS:
        raise ConfigurationError(f"truncation must be one of {TRUNCATIONS}, got {truncation!r}")
    return int(order), int(depth)


def tensor_order(order, truncation="product"):
    """Total derivative order needed by S2L under a truncation convention.

    "combined" keeps i + j + k + l <= order (one truncated Taylor series);
    "product" keeps i + j <= order and k + l <= order separately.
    """
    return order if truncation == "combined" else 2 * order


@functools.lru_cache(maxsize=None)
def moment_index(order):
    pairs = np.array([(i, m - i) for m in range(order + 1) for i in range(m, -1, -1)], dtype=np.intp)
    lookup = np.full((order + 1, order + 1), -1, dtype=np.intp)
    lookup[pairs[:, 0], pairs[:, 1]] = np.arange(len(pairs))
    pairs.setflags(write=False)
    lookup.setflags(write=False)
    return pairs, lookup


@functools.lru_cache(maxsize=None)
def _pascal(n):
    table = np.array([[comb(a, b) for b in range(n + 1)] for a in range(n + 1)], dtype=float)
    table.setflags(write=False)
    return table


def _binomial_shift(order, dr, dz, upward):
    pairs, _ = moment_index(order)
    i, j = pairs[:, 0], pairs[:, 1]
    # row index a, column index b; p, q are the powers of dr and dz
    p = (i[:, None] - i[None, :]) if upward else (i[None, :] - i[:, None])
    q = (j[:, None] - j[None, :]) if upward else (j[None, :] - j[:, None])
    mask = (p >= 0) & (q >= 0)
    top_i = np.maximum(i[:, None], i[None, :])
    top_j = np.maximum(j[:, None], j[None, :])
    pp, qq = np.where(mask, p, 0), np.where(mask, q, 0)
    binom = _pascal(order)
    vals = binom[top_i, pp] * binom[top_j, qq] * np.power(float(dr), pp) * np.power(float(dz), qq)
    return np.where(mask, vals, 0.0)


def m2m_matrix(order, dr, dz):
    """Matrix taking child moments to parent moments; (dr, dz) = child - parent centre."""
    return _binomial_shift(order, dr, dz, upward=True)


def l2l_matrix(order, dr, dz):
    """Matrix taking a parent local expansion to a child; (dr, dz) = child - parent centre."""
    return _binomial_shift(order, dr, dz, upward=False)


def _right_apply(x, mat):
    # x @ mat.T for complex x and real mat, as two real products
    flat = x.reshape(-1, x.shape[-1])
    out = (flat.real @ mat.T) + 1j * (flat.imag @ mat.T)
    return out.reshape(x.shape[:-1] + (mat.shape[0],))


def m2m_shift(moments, dr, dz):
    """Re-centre moments (..., n_coeff) by the child-minus-parent offset (dr, dz). Exact."""
    moments = np.asarray(moments)
    order = _order_from_size(moments.shape[-1])
    return _right_apply(moments.astype(complex), m2m_matrix(order, dr, dz))


def l2l_shift(local, dr, dz):
    """Re-centre a local expansion at a child box offset (dr, dz) from the parent."""
    local = np.asarray(local)
    order = _order_from_size(local.shape[-1])
    return _right_apply(local.astype(complex), l2l_matrix(order, dr, dz))


def _order_from_size(nc):
    order = int(round((np.sqrt(8 * nc + 1) - 3) / 2))
    if (order + 1) * (order + 2) // 2 != nc:
        raise ValueError(f"{nc} is not a triangular coefficient count")
    return order


@functools.lru_cache(maxsize=None)
def s2l_plan(order, variant, t_order):
    """Gather indices and weights turning a derivative tensor into an S2L matrix.

    Row (k, l) of the matrix, column (i, j):
      outward (FO, BO): weight * Gbar[k, i, j + l]
      inward  (FI, BI): weight * Gbar[i, k, j + l]
      weight = C(j + l, j) * (-1)^j forward, (-1)^l backward
    Entries whose tensor index exceeds ``t_order`` are zero.
    """
    pairs, _ = moment_index(order)
    _, lookup = tensor_index(t_order)
    nc = len(pairs)
    idx = np.zeros((nc, nc), dtype=np.intp)
    wt = np.zeros((nc, nc))
    outward = variant in (FO, BO)
    forward = variant in (FO, FI)
    for a, (k, l) in enumerate(pairs):
        for b, (i, j) in enumerate(pairs):
            p, q = (k, i) if outward else (i, k)
            m = j + l
            if p + q + m > t_order:
                continue
            idx[a, b] = lookup[p, q, m]
            sign = (-1) ** j if forward else (-1) ** l
            wt[a, b] = sign * comb(j + l, j)
    idx.setflags(write=False)
    wt.setflags(write=False)
    return idx, wt


def s2l_matrix(coeffs, order, variant, truncation="product"):
    """S2L matrices (..., n_modes, n_coeff, n_coeff) from tensor coefficients (..., n_modes, n_lin)."""
    t_order = tensor_order(order, truncation)
    idx, wt = s2l_plan(order, variant, t_order)
    return np.multiply(coeffs[..., idx], wt, order="C")


def s2l_apply(source_moments, tensor, variant, truncation="product", source_center=None, field_center=None):
    """Local-expansion contribution of one source box.

    ``tensor`` must be evaluated at (r_outer, r_inner, |dz|) between the two
    box centres. When both centres are given the variant is checked
    against their relative position.
    """
    source_moments = np.asarray(source_moments)
    order = _order_from_size(source_moments.shape[-1])
    if tensor.order < tensor_order(order, truncation):
        raise ConfigurationError("derivative tensor order too low for this truncation")
    if source_center is not None and field_center is not None:
        (sr, sz), (fr, fz) = source_center, field_center
        expected = VARIANTS[int(classify(fr, fz, sr, sz))]
        assert expected == variant, f"variant {variant} does not match box placement ({expected})"
        outer, inner = (fr, sr) if variant in (FO, BO) else (sr, fr)
        geo = tensor.geometry
        assert np.allclose([geo.r, geo.r1, geo.x], [outer, inner, abs(fz - sz)]), "tensor geometry mismatch"
    coeffs = tensor.coeffs
    if tensor.order != tensor_order(order, truncation):
        triples, _ = tensor_index(tensor.order)
        keep = triples.sum(axis=1) <= tensor_order(order, truncation)
        coeffs = coeffs[..., keep]
    mat = s2l_matrix(coeffs, order, variant, truncation)
    return np.einsum("...nab,...nb->...na", mat, source_moments)


def _leaf_centres(depth, length, z0):
    codes = np.arange(1 << (2 * depth), dtype=np.int64)
    i, j = morton_decode(codes)
    h = length / (1 << depth)
    return (i + 0.5) * h, z0 + (j + 0.5) * h


def leaf_moments(tree, amplitudes, order):
    """Moments about every leaf centre; ``amplitudes`` in original source order.

    Returns complex array (4**depth, n_modes, n_coeff) indexed by Morton code.
    """
    amps = np.asarray(amplitudes, dtype=complex)
    if amps.ndim == 1:
        amps = amps[:, None]
    amps = np.ascontiguousarray(amps[tree.src_order])
    return _leaf_moments_sorted(tree.src_points, amps, tree.src_offsets, tree.depth, tree.length, tree.z0, order)


def _leaf_moments_sorted(src, amps, offsets, depth, length, z0, order):
    pairs, _ = moment_index(order)
    cr, cz = _leaf_centres(depth, length, z0)
    out = np.zeros((len(offsets) - 1, amps.shape[1], len(pairs)), dtype=complex)
    _kernels.kernel("_leaf_moments")(np.ascontiguousarray(src[:, 0]), np.ascontiguousarray(src[:, 1]), amps,
                                     offsets.astype(np.int64), cr, cz, np.ascontiguousarray(pairs[:, 0]),
                                     np.ascontiguousarray(pairs[:, 1]), out)
    return out


def _child_offsets(level, length):
    # child - parent centre for the four children in Morton order
    hc = length / (1 << (level + 1))
    return [((a - 0.5) * hc, (b - 0.5) * hc) for b in (0, 1) for a in (0, 1)]


def upward_pass(leaf, depth, length, order):
    """Moments at levels 2..depth, each (4**level, n_modes, n_coeff)."""
    moments = {depth: leaf}
    for level in range(depth - 1, 1, -1):
        child = moments[level + 1]
        nparent = 1 << (2 * level)
        child = child.reshape(nparent, 4, *child.shape[1:])
        parent = np.zeros((nparent,) + child.shape[2:], dtype=complex)
        for c, (dr, dz) in enumerate(_child_offsets(level, length)):
            parent += _right_apply(child[:, c], m2m_matrix(order, dr, dz))
        moments[level] = parent
    return moments


def _apply_group(mat, src_mom, out, fld_idx):
    # mat (nm, nc, nc) real; src_mom (np, nm, nc) complex
    npair, nm, nc = src_mom.shape
    re = np.ascontiguousarray(src_mom.real.transpose(1, 2, 0))
    im = np.ascontiguousarray(src_mom.imag.transpose(1, 2, 0))
    res = np.matmul(mat, np.concatenate([re, im], axis=2))
    out[fld_idx] += (res[:, :, :npair] + 1j * res[:, :, npair:]).transpose(2, 0, 1)


def downward_pass(moments, depth, length, z0, order, n_modes, truncation="product", occupied=None):
    """Local expansions at the leaf level via S2L and L2L, levels 2..depth."""
    t_order = tensor_order(order, truncation)
    pairs, _ = moment_index(order)
    nc = len(pairs)
    local = None
    for level in range(2, depth + 1):
        nbox = 1 << (2 * level)
        if local is None:
            local = np.zeros((nbox, n_modes, nc), dtype=complex)
        else:
            parent = local
            local = np.empty((nbox // 4, 4, n_modes, nc), dtype=complex)
            for c, (dr, dz) in enumerate(_child_offsets(level - 1, length)):
                local[:, c] = _right_apply(parent, l2l_matrix(order, dr, dz))
            local = local.reshape(nbox, n_modes, nc)
        inter = level_interactions(level)
        si, sj, fi, fj = inter["si"], inter["sj"], inter["fi"], inter["fj"]
        src_box = morton_encode(si, sj)
        fld_box = morton_encode(fi, fj)
        if occupied is not None:
            keep = occupied[level][src_box]
            src_box, fld_box = src_box[keep], fld_box[keep]
            inter = {k: v[keep] for k, v in inter.items()}
        if len(src_box) == 0:
            continue
        h = length / (1 << level)
        classes, cls_of = np.unique(np.stack([inter["station"], inter["di"], inter["dj"]], axis=1),
                                    axis=0, return_inverse=True)
        cls_of = cls_of.reshape(-1)
        key = cls_of * 4 + inter["variant"]
        order_idx = np.argsort(key, kind="stable")
        key_sorted = key[order_idx]
        bounds = np.flatnonzero(np.diff(key_sorted)) + 1
        starts = np.r_[0, bounds]
        ends = np.r_[bounds, len(key_sorted)]
        mom = moments[level]
        for c0 in range(0, len(classes), _TENSOR_CHUNK):
            chunk = classes[c0:c0 + _TENSOR_CHUNK]
            station, di, dj = chunk[:, 0], chunk[:, 1], chunk[:, 2]
            geo = RingGeometry((station + di + 0.5) * h, (station + 0.5) * h, dj * h)
            coeffs = greens_derivatives(geo, n_modes - 1, t_order).coeffs
            lo = np.searchsorted(key_sorted[starts], c0 * 4)
            hi = np.searchsorted(key_sorted[starts], (c0 + len(chunk)) * 4)
            for g in range(lo, hi):
                sel = order_idx[starts[g]:ends[g]]
                k = int(key_sorted[starts[g]])
                cls, var = divmod(k, 4)
                mat = s2l_matrix(coeffs[cls - c0], order, VARIANTS[var], truncation)
                _apply_group(mat, mom[src_box[sel]], local, fld_box[sel])
    return local


class SourceExpansion:
    """Everything the evaluation phase needs from the source side."""

    def __init__(self, src_sorted, amps_sorted, src_order, src_offsets, local, depth, length, z0, order):
        self.src_sorted = src_sorted
        self.amps_sorted = amps_sorted
        self.src_order = src_order
        self.src_offsets = src_offsets
        self.local = local
        self.depth = depth
        self.length = length
        self.z0 = z0
        self.order = order

    def covers(self, points):
        if len(points) == 0:
            return True
        h = self.length
        return bool(np.all(points[:, 0] < h) and np.all(points[:, 1] >= self.z0)
                    and np.all(points[:, 1] - self.z0 < h))


def expand_sources(src, amps, order, depth, length, z0, truncation="product", timings=None):
    """Sort sources, form moments, run the upward and downward passes."""
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    tree = build(src, np.zeros((0, 2)), depth, length=length, z0=z0)
    amps_sorted = np.ascontiguousarray(amps[tree.src_order])
    t1 = time.perf_counter()
    leaf = _leaf_moments_sorted(tree.src_points, amps_sorted, tree.src_offsets, depth, length, z0, order)
    t2 = time.perf_counter()
    moments = upward_pass(leaf, depth, length, order)
    counts = np.diff(tree.src_offsets)
    occupied = {}
    for level in range(depth, 1, -1):
        occupied[level] = counts > 0
        counts = counts.reshape(-1, 4).sum(axis=1)
    t3 = time.perf_counter()
    local = downward_pass(moments, depth, length, z0, order, amps.shape[1], truncation, occupied)
    t4 = time.perf_counter()
    timings["sort"] = timings.get("sort", 0.0) + (t1 - t0)
    timings["moments"] = t2 - t1
    timings["upward"] = t3 - t2
    timings["downward"] = t4 - t3
    return SourceExpansion(tree.src_points, amps_sorted, tree.src_order, tree.src_offsets.astype(np.int64),
                           local, depth, length, z0, order), moments


def evaluate_expansion(expansion, fld, timings=None):
    """Local expansion plus near-field direct sums at field points (original order)."""
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    tree = build(np.zeros((0, 2)), fld, expansion.depth, length=expansion.length, z0=expansion.z0)
    f_sorted = tree.fld_points
    f_off = tree.fld_offsets.astype(np.int64)
    t1 = time.perf_counter()
    nm = expansion.amps_sorted.shape[1]
    out = np.zeros((len(fld), nm), dtype=complex)
    if len(fld):
        pairs, _ = moment_index(expansion.order)
        cr, cz = _leaf_centres(expansion.depth, expansion.length, expansion.z0)
        fr = np.ascontiguousarray(f_sorted[:, 0])
        fz = np.ascontiguousarray(f_sorted[:, 1])
        _kernels.kernel("_local_eval")(fr, fz, f_off, cr, cz, np.ascontiguousarray(pairs[:, 0]),
                                       np.ascontiguousarray(pairs[:, 1]), expansion.local, out)
        # on the axis only the axisymmetric mode survives; drop truncation residue
        out[fr == 0.0, 1:] = 0.0
        status = np.full(len(fld), -1, dtype=np.int64)
        src = expansion.src_sorted
        _kernels.kernel("_near_field")(fr, fz, f_off, np.ascontiguousarray(src[:, 0]),
                                       np.ascontiguousarray(src[:, 1]), expansion.amps_sorted,
                                       expansion.src_offsets, expansion.depth, -1, out, status)
        bad = np.flatnonzero(status >= 0)
        if bad.size:
            p = int(bad[0])
            s = int(status[p])
            fp, sp = int(tree.fld_order[p]), int(expansion.src_order[s])
            raise SingularityError(
                f"field point {fp} at {tuple(f_sorted[p])} coincides with source ring {sp} at {tuple(src[s])}",
                pair=(sp, fp))
    result = np.empty_like(out)
    result[tree.fld_order] = out
    t2 = time.perf_counter()
    timings["sort"] = timings.get("sort", 0.0) + (t1 - t0)
    timings["local_direct"] = t2 - t1
    return result


def evaluate(source_points, amplitudes, field_points, order=10, depth=4, n_modes=None,
             truncation="product", return_timings=False):
    """Modal potentials at field points by the FMM.

    Parameters
    ----------
    source_points : (n_sources, 2) array of ring positions (r > 0, z)
    amplitudes : (n_sources, n_modes) complex Fourier amplitudes S^(n)
    field_points : (n_field, 2) array of (r >= 0, z)
    order, depth : expansion order M and uniform tree depth d
    n_modes : use only the first n_modes amplitude columns
    truncation : "combined" or "product", see ``tensor_order``

    Returns
    -------
    (n_field, n_modes) complex array of Phi^(n), in input order, and a
    dict of phase wall-clock times when ``return_timings`` is set.
    """
    order, depth = check_config(order, depth, truncation)
    src, amps, fld = check_problem(source_points, amplitudes, field_points, n_modes)
    length, z0 = domain_for(src, fld)
    timings = {}
    expansion, _ = expand_sources(src, amps, order, depth, length, z0, truncation, timings)
    phi = evaluate_expansion(expansion, fld, timings)
    if return_timings:
        return phi, {k: timings.get(k, 0.0) for k in PHASES}
    return phi


__all__ = ["FO", "BO", "FI", "BI", "VARIANT_CODE", "check_config", "tensor_order", "moment_index",
           "m2m_matrix", "l2l_matrix", "m2m_shift", "l2l_shift", "s2l_plan", "s2l_matrix", "s2l_apply",
           "leaf_moments", "upward_pass", "downward_pass", "expand_sources", "evaluate_expansion",
           "evaluate", "SourceExpansion", "PHASES"]
