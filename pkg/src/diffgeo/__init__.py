"""Diffusion geometry on point clouds.

Estimate a diffusion generator from samples, then build differential
forms, Hodge Laplacians, connections and curvature in its eigenbasis.
"""

from .algebra import SpectralAlgebra, build_algebra, carre, evaluate, expand, multiply
from .errors import (
    DegenerateSpace,
    DiffGeoError,
    InvalidArgument,
    MissingArtifact,
    NumericError,
    ParseError,
    ResourceError,
)
from .frames import FormCalculus, FormCoeffs, FormSpace, TruncationConfig
from .hodge import GapRule, betti, cup_norm, harmonic_forms, hodge_decompose, hodge_spectrum
from .kernel import KernelConfig, SpectralBasis, build_markov, estimate_basis, spectral_basis
from .synth import PointCloud, from_spec, load_csv, save_csv

__version__ = "0.1.0"

__all__ = [
    "DegenerateSpace",
    "DiffGeoError",
    "FormCalculus",
    "FormCoeffs",
    "FormSpace",
    "GapRule",
    "InvalidArgument",
    "KernelConfig",
    "MissingArtifact",
    "NumericError",
    "ParseError",
    "PointCloud",
    "ResourceError",
    "SpectralAlgebra",
    "SpectralBasis",
    "TruncationConfig",
    "betti",
    "build_algebra",
    "build_markov",
    "carre",
    "cup_norm",
    "estimate_basis",
    "evaluate",
    "expand",
    "from_spec",
    "harmonic_forms",
    "hodge_decompose",
    "hodge_spectrum",
    "load_csv",
    "multiply",
    "save_csv",
    "spectral_basis",
]
