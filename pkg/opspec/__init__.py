"""
opspec: spectral analysis of self-adjoint operator functions.

Locates eigenvalues of matrix-valued families T(lambda) through the
counting function, evaluates generalized Rayleigh functionals and the
triple variational principle over maximal non-negative subspaces, and
issues resolvent, Virozub-Matsaev and spectral-gap certificates.

The commonly used entry points are re-exported here so callers can keep
stable imports while the implementation stays split by concern.
"""

from .corpus import builtin, load_family
from .errors import OpspecError
from .families import (
    OperatorFamily,
    PiecewiseLinearDiagonal,
    Polynomial,
    SchurComplement,
    ShiftedLinear,
    parse_family,
    serialize_family,
    validate_A3,
)
from .models import Certificate, ExtendedReal, Interval, SpectrumReport, Verdict
from .perturb import certify_gap
from .rayleigh import rayleigh_p
from .spectra import counting, decomposition_check, resolvent_certify, spectrum_in, vm_certify
from .varbounds import triple_lower_bound, verify_equality

__version__ = "1.0.0"
__all__ = [
    "OpspecError",
    "OperatorFamily",
    "ShiftedLinear",
    "Polynomial",
    "SchurComplement",
    "PiecewiseLinearDiagonal",
    "parse_family",
    "serialize_family",
    "validate_A3",
    "builtin",
    "load_family",
    "Interval",
    "ExtendedReal",
    "Certificate",
    "Verdict",
    "SpectrumReport",
    "rayleigh_p",
    "counting",
    "spectrum_in",
    "vm_certify",
    "resolvent_certify",
    "decomposition_check",
    "triple_lower_bound",
    "verify_equality",
    "certify_gap",
]
