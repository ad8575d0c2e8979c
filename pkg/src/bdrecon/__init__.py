"""Numerical boundary determination from oscillatory probes for Maxwell and isotropic elastic media."""
from .errors import *  # noqa: F401,F403
from .geometry import AdmissiblePoint, BoundaryPatch, certify_admissible, make_patch
from .fields import EMParameters, LameFields, ScalarField
from .probes import make_elastic_probe, make_maxwell_frame, maxwell_boundary_input, elastic_boundary_input
from .estimators import EstimatorConfig, averaged_estimate, coverage_and_N0, direct_estimate, fit_rate

__version__ = "0.1.0"
