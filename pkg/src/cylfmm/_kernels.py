"""Compiled inner loops: pairwise modal kernel, near field, moments, local sums.

Each loop exists in a serial and a threaded build; the threaded one
parallelises over field points (or leaves) so every output row is written
by exactly one thread, which keeps results bit-identical to serial runs.
"""

from __future__ import annotations

import math
import os

import numba
import numpy as np
from numba import njit, prange

from .specfun import OK, SINGULAR, q_sequence_into

_INV_TWO_PI = 1.0 / (2.0 * math.pi)


@njit(cache=True)
def greens_row(r, r1, x, n_max, headroom, q, out):
    """G^(n)(r, r1, x), n = 0..n_max, into out; q is scratch of length n_max + 1."""
    if r == 0.0 or r1 == 0.0:
        # ring on the axis: only the axisymmetric mode survives
        out[0] = 0.5 / math.sqrt(r * r + r1 * r1 + x * x)
        for n in range(1, n_max + 1):
            out[n] = 0.0
        return OK
    cm1 = ((r - r1) * (r - r1) + x * x) / (2.0 * r * r1)
    status = q_sequence_into(cm1, n_max, headroom, q, 0)
    if status != OK:
        return status
    scale = _INV_TWO_PI / math.sqrt(r * r1)
    for n in range(n_max + 1):
        out[n] = q[n] * scale
    return OK


def _direct_sum(sr, sz, samp, fr, fz, headroom, out, status):
    nf = fr.size
    ns = sr.size
    n_max = samp.shape[1] - 1
    for p in prange(nf):
        q = np.empty(n_max + 1)
        g = np.empty(n_max + 1)
        for s in range(ns):
            st = greens_row(fr[p], sr[s], fz[p] - sz[s], n_max, headroom, q, g)
            if st != OK:
                status[p] = s
                break
            for n in range(n_max + 1):
                out[p, n] += samp[s, n] * g[n]


def _near_field(fr, fz, f_off, sr, sz, samp, s_off, depth, headroom, out, status):
    nb = 1 << depth
    n_max = samp.shape[1] - 1
    n_leaf = f_off.size - 1
    for m in prange(n_leaf):
        f0 = f_off[m]
        f1 = f_off[m + 1]
        if f1 == f0:
            continue
        q = np.empty(n_max + 1)
        g = np.empty(n_max + 1)
        # decode Morton code m into (i, j)
        i = 0
        j = 0
        for b in range(depth):
            i |= ((m >> (2 * b)) & 1) << b
            j |= ((m >> (2 * b + 1)) & 1) << b
        for di in range(-1, 2):
            ii = i + di
            if ii < 0 or ii >= nb:
                continue
            for dj in range(-1, 2):
                jj = j + dj
                if jj < 0 or jj >= nb:
                    continue
                mm = 0
                for b in range(depth):
                    mm |= ((ii >> b) & 1) << (2 * b)
                    mm |= ((jj >> b) & 1) << (2 * b + 1)
                for p in range(f0, f1):
                    if status[p] >= 0:
                        continue
                    for s in range(s_off[mm], s_off[mm + 1]):
                        st = greens_row(fr[p], sr[s], fz[p] - sz[s], n_max, headroom, q, g)
                        if st != OK:
                            status[p] = s
                            break
                        for n in range(n_max + 1):
                            out[p, n] += samp[s, n] * g[n]


def _leaf_moments(sr, sz, samp, s_off, cr, cz, pi, pj, out):
    n_leaf = s_off.size - 1
    nm = samp.shape[1]
    nc = pi.size
    for m in prange(n_leaf):
        mono = np.empty(nc)
        for s in range(s_off[m], s_off[m + 1]):
            dr = sr[s] - cr[m]
            dz = sz[s] - cz[m]
            for c in range(nc):
                mono[c] = dr ** pi[c] * dz ** pj[c]
            for n in range(nm):
                a = samp[s, n]
                for c in range(nc):
                    out[m, n, c] += a * mono[c]


def _local_eval(fr, fz, f_off, cr, cz, pi, pj, local, out):
    n_leaf = f_off.size - 1
    nm = local.shape[1]
    nc = pi.size
    for m in prange(n_leaf):
        mono = np.empty(nc)
        for p in range(f_off[m], f_off[m + 1]):
            dr = fr[p] - cr[m]
            dz = fz[p] - cz[m]
            for c in range(nc):
                mono[c] = dr ** pi[c] * dz ** pj[c]
            for n in range(nm):
                acc = 0.0 + 0.0j
                for c in range(nc):
                    acc += local[m, n, c] * mono[c]
                out[p, n] += acc


_SERIAL = {f.__name__: njit(cache=True)(f) for f in (_direct_sum, _near_field, _leaf_moments, _local_eval)}
_PARALLEL = {f.__name__: njit(cache=True, parallel=True)(f)
             for f in (_direct_sum, _near_field, _leaf_moments, _local_eval)}


def thread_count():
    """Worker cap from CYLFMM_THREADS; 0 means sequential, unset means numba default."""
    raw = os.environ.get("CYLFMM_THREADS", "").strip()
    if raw == "":
        return numba.config.NUMBA_NUM_THREADS
    n = int(raw)
    if n < 0:
        raise ValueError("CYLFMM_THREADS must be >= 0")
    return min(n, numba.config.NUMBA_NUM_THREADS)


def kernel(name):
    n = thread_count()
    if n <= 1:
        return _SERIAL[name]
    numba.set_num_threads(n)
    return _PARALLEL[name]
