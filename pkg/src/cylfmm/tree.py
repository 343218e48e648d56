"""Uniform quadtree over the (r, z) square with Morton ordering.

Boxes at level ``l`` tile the square into 2^l x 2^l cells of side L / 2^l;
``i`` is the radial column and ``j`` the axial row. Morton codes put the
radial index in the even bits and the axial index in the odd bits, so the
children of (i, j) are ``4 * morton(i, j) + (a | b << 1)`` for a, b in {0, 1}.
Points are binned on half-open intervals [lo, hi).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import ConfigurationError, DomainError

MAX_DEPTH = 30
DOMAIN_PAD = 1e-12

FO, BO, FI, BI = "FO", "BO", "FI", "BI"
VARIANTS = (FO, BO, FI, BI)
VARIANT_CODE = {v: c for c, v in enumerate(VARIANTS)}
REFLECTED = {FO: BI, BI: FO, BO: FI, FI: BO}


def _spread(v):
    v = np.asarray(v, dtype=np.int64) & 0xFFFFFFFF
    v = (v | (v << 16)) & 0x0000FFFF0000FFFF
    v = (v | (v << 8)) & 0x00FF00FF00FF00FF
    v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0F
    v = (v | (v << 2)) & 0x3333333333333333
    v = (v | (v << 1)) & 0x5555555555555555
    return v


def _compact(v):
    v = np.asarray(v, dtype=np.int64) & 0x5555555555555555
    v = (v | (v >> 1)) & 0x3333333333333333
    v = (v | (v >> 2)) & 0x0F0F0F0F0F0F0F0F
    v = (v | (v >> 4)) & 0x00FF00FF00FF00FF
    v = (v | (v >> 8)) & 0x0000FFFF0000FFFF
    v = (v | (v >> 16)) & 0x00000000FFFFFFFF
    return v


def morton_encode(i, j):
    """Interleave radial index i (even bits) with axial index j (odd bits)."""
    out = _spread(i) | (_spread(j) << 1)
    return int(out) if np.ndim(out) == 0 else out


def morton_decode(m):
    i, j = _compact(m), _compact(np.asarray(m, dtype=np.int64) >> 1)
    if np.ndim(i) == 0:
        return int(i), int(j)
    return i, j


class BoxId(NamedTuple):
    level: int
    i: int
    j: int

    @property
    def morton(self):
        return morton_encode(self.i, self.j)

    def parent(self):
        if self.level == 0:
            raise ValueError("the root box has no parent")
        return BoxId(self.level - 1, self.i // 2, self.j // 2)

    def children(self):
        return [BoxId(self.level + 1, 2 * self.i + a, 2 * self.j + b) for b in (0, 1) for a in (0, 1)]


class S2LEntry(NamedTuple):
    box: BoxId
    variant: str
    station: int      # radial index of the inner box of the pair
    di: int           # |delta i|
    dj: int           # |delta j|


@dataclass(frozen=True)
class InteractionLists:
    box: BoxId
    d_list: list = field(default_factory=list)
    s2l_list: list = field(default_factory=list)


@dataclass(frozen=True)
class Quadtree:
    """Morton-sorted points with per-leaf contiguous ranges.

    ``src_order[k]`` is the original index of the k-th sorted source, and
    the sources of leaf ``m`` (Morton code) are ``src_offsets[m]:src_offsets[m+1]``
    of the sorted arrays; likewise for field points.
    """

    depth: int
    length: float
    z0: float
    src_points: np.ndarray
    src_order: np.ndarray
    src_offsets: np.ndarray
    fld_points: np.ndarray
    fld_order: np.ndarray
    fld_offsets: np.ndarray

    def box_size(self, level):
        return self.length / (1 << level)

    def box_center(self, level, i, j):
        h = self.box_size(level)
        return (np.asarray(i) + 0.5) * h, self.z0 + (np.asarray(j) + 0.5) * h

    def leaf_of(self, points):
        return _leaf_codes(np.asarray(points, dtype=float), self.depth, self.length, self.z0)

    def src_range(self, morton):
        return slice(int(self.src_offsets[morton]), int(self.src_offsets[morton + 1]))

    def fld_range(self, morton):
        return slice(int(self.fld_offsets[morton]), int(self.fld_offsets[morton + 1]))


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros((0, 2))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError(f"points must have shape (n, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DomainError("point coordinates must be finite")
    if np.any(pts[:, 0] < 0.0):
        raise DomainError("radial coordinates must be non-negative")
    return pts


def domain_for(*point_sets):
    """Square domain [0, L] x [z0, z0 + L] covering every point set.

    z0 is 0 unless some axial coordinate is negative. L is padded by a
    relative 1e-12 so points on the far edges fall inside the last box.
    """
    pts = [p for p in (_as_points(p) for p in point_sets) if len(p)]
    if not pts:
        return 1.0, 0.0
    allp = np.vstack(pts)
    z0 = min(0.0, float(allp[:, 1].min()))
    extent = max(float(allp[:, 0].max()), float(allp[:, 1].max()) - z0)
    if extent <= 0.0:
        extent = 1.0
    return extent * (1.0 + DOMAIN_PAD), z0


def _leaf_codes(pts, depth, length, z0):
    if len(pts) == 0:
        return np.zeros(0, dtype=np.int64)
    nb = 1 << depth
    h = length / nb
    gi = np.floor(pts[:, 0] / h).astype(np.int64)
    gj = np.floor((pts[:, 1] - z0) / h).astype(np.int64)
    if np.any(gi < 0) or np.any(gj < 0) or np.any(gi >= nb) or np.any(gj >= nb):
        raise DomainError("point lies outside the tree domain")
    return morton_encode(gi, gj)


def _sort_points(pts, depth, length, z0):
    codes = _leaf_codes(pts, depth, length, z0)
    order = np.argsort(codes, kind="stable")
    offsets = np.searchsorted(codes[order], np.arange((1 << (2 * depth)) + 1), side="left")
    return pts[order], order, offsets


def check_depth(depth):
    depth = int(depth)
    if depth < 0:
        raise ConfigurationError("tree depth must be non-negative")
    if depth > MAX_DEPTH:
        raise ConfigurationError(f"tree depth {depth} exceeds the {MAX_DEPTH}-level index width")
    return depth


def build(points_src, points_fld, depth, length=None, z0=None):
    """Sort source and field points into the leaves of a uniform quadtree."""
    depth = check_depth(depth)
    src = _as_points(points_src)
    fld = _as_points(points_fld)
    if length is None:
        length, z_lo = domain_for(src, fld)
        z0 = z_lo if z0 is None else z0
    z0 = 0.0 if z0 is None else float(z0)
    src_sorted, src_order, src_offsets = _sort_points(src, depth, length, z0)
    fld_sorted, fld_order, fld_offsets = _sort_points(fld, depth, length, z0)
    return Quadtree(depth, float(length), z0, src_sorted, src_order, src_offsets,
                    fld_sorted, fld_order, fld_offsets)


# offsets (di, dj) of a same-level box that can sit in an S2L list
_CANDIDATES = np.array([(di, dj) for di in range(-3, 4) for dj in range(-3, 4)
                        if max(abs(di), abs(dj)) >= 2], dtype=np.int64)


def classify(fi, fj, si, sj):
    """S2L variant for a source box (si, sj) acting on a field box (fi, fj).

    Outward when the source radius is not larger than the field radius,
    forward when the source is not above the field box.
    """
    outward = np.asarray(si) <= np.asarray(fi)
    forward = np.asarray(sj) <= np.asarray(fj)
    code = np.where(outward, np.where(forward, 0, 1), np.where(forward, 2, 3))
    return code


def level_interactions(level):
    """All S2L pairs at a level as parallel integer arrays.

    Returns a dict with keys fi, fj, si, sj, variant (code into VARIANTS),
    station (radial index of the inner box), di, dj (absolute offsets).
    """
    nb = 1 << level
    if level < 2:
        empty = np.zeros(0, dtype=np.int64)
        return dict(fi=empty, fj=empty, si=empty, sj=empty, variant=empty, station=empty, di=empty, dj=empty)
    fi, fj = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
    fi = fi.reshape(-1, 1)
    fj = fj.reshape(-1, 1)
    si = fi + _CANDIDATES[:, 0]
    sj = fj + _CANDIDATES[:, 1]
    ok = (si >= 0) & (si < nb) & (sj >= 0) & (sj < nb)
    ok &= (np.abs(si // 2 - fi // 2) <= 1) & (np.abs(sj // 2 - fj // 2) <= 1)
    fi, fj = np.broadcast_to(fi, si.shape)[ok], np.broadcast_to(fj, sj.shape)[ok]
    si, sj = si[ok], sj[ok]
    return dict(fi=fi, fj=fj, si=si, sj=sj, variant=classify(fi, fj, si, sj),
                station=np.minimum(fi, si), di=np.abs(si - fi), dj=np.abs(sj - fj))


def neighbors(box):
    nb = 1 << box.level
    return [BoxId(box.level, box.i + di, box.j + dj)
            for di in (-1, 0, 1) for dj in (-1, 0, 1)
            if 0 <= box.i + di < nb and 0 <= box.j + dj < nb]


def interaction_lists(box, depth):
    """D list (same-level neighbours incl. self) and S2L list of a box."""
    box = BoxId(*box)
    if box.level > depth:
        raise ConfigurationError(f"box level {box.level} exceeds tree depth {depth}")
    if box.level < 2:
        return InteractionLists(box)
    nb = 1 << box.level
    s2l = []
    for di, dj in _CANDIDATES:
        si, sj = box.i + int(di), box.j + int(dj)
        if not (0 <= si < nb and 0 <= sj < nb):
            continue
        if abs(si // 2 - box.i // 2) > 1 or abs(sj // 2 - box.j // 2) > 1:
            continue
        variant = VARIANTS[int(classify(box.i, box.j, si, sj))]
        s2l.append(S2LEntry(BoxId(box.level, si, sj), variant, min(si, box.i), abs(int(di)), abs(int(dj))))
    return InteractionLists(box, neighbors(box), s2l)
