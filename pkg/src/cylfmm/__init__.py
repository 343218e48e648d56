"""Fast multipole summation of modal ring sources in axisymmetric domains."""

from .estimator import CylindricalFMM, DirectSummation
from .exceptions import (ConfigurationError, ConvergenceError, CylFMMError, DomainError, PrecisionLossError,
                         SingularityError)
from .fmm import evaluate, l2l_shift, leaf_moments, m2m_shift, s2l_apply
from .greens import (GreensDerivativeTensor, GreensTable, RingGeometry, greens_derivatives, greens_table,
                     laplace_residual, taylor_eval)
from .oracle import ModalRingSource, QuadratureSpec, direct_evaluate, direct_pair, greens_quadrature, modal_errors
from .specfun import elliptic_ke, legendre_q_seed, legendre_q_sequence
from .tree import BoxId, Quadtree, build, interaction_lists

__version__ = "0.1.0"

__all__ = [
    "CylindricalFMM", "DirectSummation", "evaluate", "direct_evaluate", "direct_pair", "modal_errors",
    "greens_quadrature", "QuadratureSpec", "ModalRingSource", "RingGeometry", "GreensTable",
    "GreensDerivativeTensor", "greens_table", "greens_derivatives", "laplace_residual", "taylor_eval",
    "elliptic_ke", "legendre_q_seed", "legendre_q_sequence", "BoxId", "Quadtree", "build",
    "interaction_lists", "leaf_moments", "m2m_shift", "l2l_shift", "s2l_apply", "CylFMMError",
    "DomainError", "SingularityError", "PrecisionLossError", "ConfigurationError", "ConvergenceError",
]
