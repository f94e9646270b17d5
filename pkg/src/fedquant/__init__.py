"""Exact Fedosov deformation quantization on truncated Taylor jets.

Submodules:

``jetring``
    Multivariate jets with exact rational coefficients.
``weyl``
    Weyl algebra bundle elements, the Moyal product and the homotopy operators.
``geometry``
    Symplectic forms, connections, symplectization and their Weyl lifts.
``fedosov``
    The flat connection, flat sections and the star product.
``expr``, ``cli``
    Polynomial expression parsing and the command-line driver.
"""
from .expr import ParseError, parse_expression, parse_jet
from .fedosov import (CocycleError, CoefficientSeries, CurvatureReport,
                      FedosovConnection, FlatSection, InsufficientJetOrderError,
                      UnsupportedError, apply_D, build_fedosov, check_flatness,
                      evaluate, iterate_rho, moyal_reference, omega_form,
                      quantize, star_product)
from .geometry import (Connection, InvalidConnectionError, SymplecticStructure,
                       SymplecticValidationError, WeylCurvature, curvature_tensor,
                       darboux, lift_nabla, musical_flat, musical_sharp,
                       nabla_omega, poisson_bracket, symplectize, torsion,
                       validate_symplectic, weyl_curvature)
from .jetring import (DegenerateFormError, DimensionMismatchError, Jet, JetError,
                      NonUnitError, jet_diff, jet_invert, jet_matrix_inverse)
from .weyl import (TermKey, WeylContext, WeylElement, ad, central_part,
                   commutator, delta, delta_inverse, delta_star, grade,
                   moyal_product)

__version__ = "0.1.0"

__all__ = [
    "ParseError", "parse_expression", "parse_jet", "CocycleError", "CoefficientSeries",
    "CurvatureReport", "FedosovConnection", "FlatSection", "InsufficientJetOrderError",
    "UnsupportedError", "apply_D", "build_fedosov", "check_flatness", "evaluate",
    "iterate_rho", "moyal_reference", "omega_form", "quantize", "star_product",
    "Connection", "InvalidConnectionError", "SymplecticStructure",
    "SymplecticValidationError", "WeylCurvature", "curvature_tensor", "darboux",
    "lift_nabla", "musical_flat", "musical_sharp", "nabla_omega", "poisson_bracket",
    "symplectize", "torsion", "validate_symplectic", "weyl_curvature",
    "DegenerateFormError", "DimensionMismatchError", "Jet", "JetError", "NonUnitError",
    "jet_diff", "jet_invert", "jet_matrix_inverse", "TermKey", "WeylContext",
    "WeylElement", "ad", "central_part", "commutator", "delta", "delta_inverse",
    "delta_star", "grade", "moyal_product",
]
