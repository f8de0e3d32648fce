"""Hybrid WKB solver for 1D stationary scattering in the semiclassical limit.

Evanescent zones use a WKB finite-element method, oscillatory zones a
second-order WKB marching scheme; a final complex scaling enforces the
open boundary condition at x = 1.
"""

from .config import ExperimentConfig, load_config, parse_config
from .coupling import (
    ScatteringSolution,
    ZoneResult,
    current,
    reflection_transmission,
    solve,
    solve_one_zone,
    solve_three_zone,
    solve_two_zone,
)
from .errors import (
    AdmissibilityError,
    AssemblyError,
    ConfigError,
    DegenerateError,
    DomainError,
    HypothesisViolation,
    NumericalFailure,
    SingularityError,
    SolverError,
    WkbError,
)
from .fem import EvanescentMesh, FemSystem, assemble, build_basis, condition_number, solve_bvp
from .field import (
    CoefficientField,
    HypothesisReport,
    PotentialSegment,
    Zone,
    ZoneLayout,
    compute_eps1,
    validate,
)
from .marching import OscGrid, march, step_matrices
from .oracle import (
    ErrorReport,
    TransferMatrixModel,
    compare,
    compare_exact,
    fine_grid_reference,
    slope_fit,
    transfer_matrix_solve,
)
from .presets import PRESETS

__version__ = "0.1.0"
