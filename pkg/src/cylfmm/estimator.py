"""scikit-learn style front end: fit on ring sources, predict at field points."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .fmm import PHASES, check_config, evaluate_expansion, expand_sources
from .oracle import direct_evaluate
from .tree import domain_for
from .validation import check_amplitudes, check_points


class CylindricalFMM(BaseEstimator):
    """Fast multipole evaluation of modal ring-source potentials.

    ``fit(X, y)`` takes ring positions X = (r, z) and complex amplitudes
    y[s, n] = S^(n); it builds the tree, moments and local expansions.
    ``predict(X)`` returns Phi^(n) at field points as (n_points, n_modes).

    Parameters
    ----------
    order : int
        Expansion order M, 1..24.
    depth : int
        Uniform tree depth d, 2..12.
    n_modes : int or None
        Number of Fourier modes used; None keeps every column of y.
    truncation : {"product", "combined"}
        "product" keeps source and local terms each to order M; "combined"
        keeps only terms of total order <= M.
    domain : (length, z0) or None
        Tree square [0, length] x [z0, z0 + length]. None fits it to the
        sources; field points outside it trigger a one-off expansion over
        an enlarged square at predict time.
    """

    def __init__(self, order=10, depth=4, n_modes=None, truncation="product", domain=None):
        self.order = order
        self.depth = depth
        self.n_modes = n_modes
        self.truncation = truncation
        self.domain = domain

    def _expand(self, length, z0):
        timings = {}
        expansion, _ = expand_sources(self.sources_, self.amplitudes_, self.order, self.depth, length, z0,
                                      self.truncation, timings)
        return expansion, timings

    def fit(self, X, y):
        check_config(self.order, self.depth, self.truncation)
        self.sources_ = check_points(X, "source_points", positive_radius=True)
        self.amplitudes_ = check_amplitudes(y, len(self.sources_), self.n_modes)
        self.n_modes_ = self.amplitudes_.shape[1]
        if self.domain is None:
            length, z0 = domain_for(self.sources_)
        else:
            length, z0 = (float(v) for v in self.domain)
        self.expansion_, self.fit_timings_ = self._expand(length, z0)
        return self

    def predict(self, X):
        check_is_fitted(self, "expansion_")
        fld = check_points(X, "field_points")
        timings = {}
        expansion = self.expansion_
        if not expansion.covers(fld):
            length, z0 = domain_for(self.sources_, fld)
            expansion, timings = self._expand(length, z0)
        phi = evaluate_expansion(expansion, fld, timings)
        base = dict(self.fit_timings_) if expansion is self.expansion_ else {}
        base.update({k: v for k, v in timings.items() if k != "sort"})
        base["sort"] = base.get("sort", 0.0) + timings.get("sort", 0.0)
        self.predict_timings_ = {k: base.get(k, 0.0) for k in PHASES}
        return phi


class DirectSummation(BaseEstimator):
    """O(N_s N_f) reference with the same fit/predict interface."""

    def __init__(self, n_modes=None):
        self.n_modes = n_modes

    def fit(self, X, y):
        self.sources_ = check_points(X, "source_points", positive_radius=True)
        self.amplitudes_ = check_amplitudes(y, len(self.sources_), self.n_modes)
        self.n_modes_ = self.amplitudes_.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "amplitudes_")
        return direct_evaluate(self.sources_, self.amplitudes_, X)
