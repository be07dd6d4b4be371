"""Identification of nonlinear heat conduction laws from boundary traces."""

__version__ = "0.1.0"

from .elliptic import Gauge, solve_elliptic, stationary_trace
from .grid import BoundaryCurve, StructuredGrid, TraceMeasurement, tangential_derivative, trace_extract
from .inverse import (EmptyIdentifiableInterval, ReconstructionResult, error_sup, reconstruct_elliptic,
                      reconstruct_parabolic, recover_principal)
from .kirchhoff import ConductionLaw, KirchhoffTransform, builtin_law, check_admissible
from .parabolic import Ramp, Schedule, simulate, step, ut_norm
from .poisson import CompatibilityViolation, FluxData, solve_neumann
