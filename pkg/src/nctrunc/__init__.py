"""Truncated noncommutative integrals on concrete spectral triples."""

from .errors import (
    AssertionFailure,
    InvalidArgument,
    NCTruncError,
    ParseError,
    ResourceLimit,
    UnsupportedOperator,
)
from .models import (
    almost_commutative_model,
    circle_model,
    commutator_norm_check,
    model_from_descriptor,
    nc_torus_model,
    toeplitz_model,
)
from .expr import parse_operator

__version__ = "0.1.0"

__all__ = [
    "AssertionFailure",
    "InvalidArgument",
    "NCTruncError",
    "ParseError",
    "ResourceLimit",
    "UnsupportedOperator",
    "almost_commutative_model",
    "circle_model",
    "commutator_norm_check",
    "model_from_descriptor",
    "nc_torus_model",
    "parse_operator",
    "toeplitz_model",
]
