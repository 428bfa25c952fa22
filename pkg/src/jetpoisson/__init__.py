"""Exact symbolic engine for Hamiltonian structures of dispersive hierarchies.

Core layers: a graded differential polynomial algebra with odd variables and
a single Laurent direction; local functionals with the graded bracket; near-
identity coordinate changes; correlator tables and their series; jet
reconstruction from series; and the two bracket-construction routes with
their verification suites.
"""

from .algebra import DiffExpr, GradeSignature, JetAlgebra
from .cohft import ConformalData, CorrelatorTable, gen_trivial
from .functionals import (
    DiffOperator,
    LocalFunctional,
    bivector_to_operator,
    compatibility_residual,
    integrate,
    normalize,
    operator_to_bivector,
    poisson_residual,
    schouten,
)
from .jetform import JetBounds, JetData, SeriesData, jetify
from .transform import (
    MiuraTransform,
    compose,
    conjugate_operator,
    invert,
    push_theta,
    pushforward,
    substitute,
)

__all__ = [
    "DiffExpr",
    "GradeSignature",
    "JetAlgebra",
    "ConformalData",
    "CorrelatorTable",
    "gen_trivial",
    "DiffOperator",
    "LocalFunctional",
    "bivector_to_operator",
    "compatibility_residual",
    "integrate",
    "normalize",
    "operator_to_bivector",
    "poisson_residual",
    "schouten",
    "JetBounds",
    "JetData",
    "SeriesData",
    "jetify",
    "MiuraTransform",
    "compose",
    "conjugate_operator",
    "invert",
    "push_theta",
    "pushforward",
    "substitute",
]

__version__ = "0.1.0"
