"""Orbit closures on tori, ordering densities of trigonometric races, and
Chebotarev races over F_q(t)."""

__version__ = "0.1.0"

from .angles import (AngleSystem, ClosureDescription, Mode, RelationLattice, closure_from_system,
                     detect_relations, extract_closure)
from .density import DensityReport, RaceFunctions, densities, density_continuous, density_discrete
from .errors import CertificationError, InputError, KwraceError
from .laurent import LaurentPoly
from .sampler import EstimateWithCI, SamplerConfig, expectation, orbit_average

__all__ = [
    "AngleSystem", "ClosureDescription", "Mode", "RelationLattice", "closure_from_system",
    "detect_relations", "extract_closure", "DensityReport", "RaceFunctions", "densities",
    "density_continuous", "density_discrete", "CertificationError", "InputError", "KwraceError",
    "LaurentPoly", "EstimateWithCI", "SamplerConfig", "expectation", "orbit_average",
]
