"""Congruence lattice pairs in indefinite rational quaternion algebras.

The package builds pairs of arithmetic lattices attached to a compact
open level group and its conjugate by a finite-adelic element, checks
the hypotheses that make the pair spectrally indistinguishable, compares
trace spectra at desk scale, certifies non-isometry through a
reduced-norm obstruction, and exhaustively verifies the L-packet
multiplicity identity that underlies the construction.
"""

from .localarith import (
    INF,
    Mat2Padic,
    PadicApprox,
    PrecisionError,
    hilbert_symbol,
    hilbert_symbol_by_search,
    square_class,
    square_class_group,
    SquareClass,
    valuation,
)
from .quaternion import (
    QuaternionAlgebra,
    QuatElement,
    RamificationData,
    check_h1_h2,
    ramification,
    split_padic,
    split_real,
)

__version__ = "0.1.0"

__all__ = [
    "INF",
    "Mat2Padic",
    "PadicApprox",
    "PrecisionError",
    "QuaternionAlgebra",
    "QuatElement",
    "RamificationData",
    "SquareClass",
    "check_h1_h2",
    "hilbert_symbol",
    "hilbert_symbol_by_search",
    "ramification",
    "split_padic",
    "split_real",
    "square_class",
    "square_class_group",
    "valuation",
]
