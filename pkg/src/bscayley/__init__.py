"""Bryant-Salamon Spin(7) metrics on the negative spinor bundle of S^4 and their Cayley fibrations.

Modules
-------
forms      exterior algebra and calculus on R^8 (wedge, Hodge star, d)
geometry   explicit charts, coframes, the Cayley form and metric, torsion checks
cayley     the Cayley test for 4-planes and the projection onto Lambda^2_7
so3        SO(3) x Id_2 fibres: first integrals, level sets, cones, local models
sp1        Sp(1) x Id_1 fibres: phase portrait, integration, classification
suites     verification suites shared by the command line and the tests
cli        command-line entry point
"""

from . import cayley, forms, geometry, so3, sp1, suites
from .cayley import CayleyReport, FourPlane, eta, eta_residual, is_calibrated, is_cayley, pi7, pi7_matrix
from .errors import DomainError
from .forms import KForm, MetricAtPoint, exterior_derivative, hodge_star, wedge
from .geometry import (
    ChartPointSO3,
    ChartPointSp1,
    StructurePack,
    build_pack,
    flat_pack,
    multi_moment_fibre,
    verify_torsion_free,
)
from .so3 import FibreCurveSO3, SO3FibreParams, classify_so3, trace_level_set
from .sp1 import FibreCurveSp1, Sp1PhaseState, classify_sp1, integrate_fibre

__version__ = "0.1.0"

__all__ = [
    "CayleyReport", "ChartPointSO3", "ChartPointSp1", "DomainError", "FibreCurveSO3", "FibreCurveSp1",
    "FourPlane", "KForm", "MetricAtPoint", "SO3FibreParams", "Sp1PhaseState", "StructurePack",
    "build_pack", "cayley", "classify_so3", "classify_sp1", "eta", "eta_residual", "exterior_derivative",
    "flat_pack", "forms", "geometry", "hodge_star", "integrate_fibre", "is_calibrated", "is_cayley",
    "multi_moment_fibre", "pi7", "pi7_matrix", "so3", "sp1", "suites", "trace_level_set",
    "verify_torsion_free", "wedge",
]
