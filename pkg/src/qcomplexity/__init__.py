"""Statistical complexity (LMC and SDL) of quantum many-body densities."""

from .densities import (
    CLOSED_SHELL_ATOMS,
    HO_MAGIC_NUMBERS,
    DensityPair,
    GPConvergenceError,
    gaussian_pair,
    gp_ground_state_pair,
    ho_shell_pair,
    hydrogenic_atom_pair,
    load_tabulated_pair,
)
from .measures import (
    EUR_BOUND,
    BoundViolation,
    MeasureRecord,
    Sweep,
    build_sweep,
    log_fit,
    measure_pair,
)
from .podi import (
    BoundaryLines,
    PodiResult,
    RegionMap,
    Trend,
    TrendError,
    boundary_lines,
    classify_trend,
    closed_shell_filter,
    fit_podi,
    region_map,
)
from .transforms import (
    RadialFunction,
    RadialGrid,
    Space,
    TransformPlan,
    hankel_transform,
    integrate_radial,
    roundtrip_residual,
)

__version__ = "0.1.0"

__all__ = [
    "CLOSED_SHELL_ATOMS",
    "HO_MAGIC_NUMBERS",
    "DensityPair",
    "GPConvergenceError",
    "gaussian_pair",
    "gp_ground_state_pair",
    "ho_shell_pair",
    "hydrogenic_atom_pair",
    "load_tabulated_pair",
    "EUR_BOUND",
    "BoundViolation",
    "MeasureRecord",
    "Sweep",
    "build_sweep",
    "log_fit",
    "measure_pair",
    "BoundaryLines",
    "PodiResult",
    "RegionMap",
    "Trend",
    "TrendError",
    "boundary_lines",
    "classify_trend",
    "closed_shell_filter",
    "fit_podi",
    "region_map",
    "RadialFunction",
    "RadialGrid",
    "Space",
    "TransformPlan",
    "hankel_transform",
    "integrate_radial",
    "roundtrip_residual",
    "__version__",
]
