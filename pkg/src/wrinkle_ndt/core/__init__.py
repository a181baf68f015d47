"""Core models, algorithms and file I/O."""

from wrinkle_ndt.core.comparison import (
    Denominator,
    ErrorTable,
    compare_series,
)
from wrinkle_ndt.core.errors import (
    ConfigError,
    DataIOError,
    MathError,
    WrinkleNDTError,
)
from wrinkle_ndt.core.fpp import (
    GridSpec,
    HeightGrid,
    PointCloud,
    displacement_extract,
    extract_phase_3step,
    phase_to_height,
    regrid,
)
from wrinkle_ndt.core.geometry import (
    WrinkleDescriptor,
    max_misalignment,
    misalignment_angle,
    wrinkle_height,
)
from wrinkle_ndt.core.homogenization import (
    Discretization,
    homogenize_strip,
    homogenize_wrinkle,
    oracle_fine_average,
)
from wrinkle_ndt.core.laminate import (
    EngineeringConstants,
    Layup,
    Ply,
    StiffnessMatrix,
    compliance,
    effective_engineering_constants,
    stiffness_from_engineering,
)
from wrinkle_ndt.core.rotation import rotate_stiffness, t_phi, t_theta
from wrinkle_ndt.core.shearography import (
    PhaseMap,
    ShearConfig,
    integrate_displacement,
    simulate_shear_phase,
    unwrap_1d,
    wrap_phase,
)

__all__ = [
    "ConfigError",
    "DataIOError",
    "Denominator",
    "Discretization",
    "EngineeringConstants",
    "ErrorTable",
    "GridSpec",
    "HeightGrid",
    "Layup",
    "MathError",
    "PhaseMap",
    "Ply",
    "PointCloud",
    "ShearConfig",
    "StiffnessMatrix",
    "WrinkleDescriptor",
    "WrinkleNDTError",
    "compare_series",
    "compliance",
    "displacement_extract",
    "effective_engineering_constants",
    "extract_phase_3step",
    "homogenize_strip",
    "homogenize_wrinkle",
    "integrate_displacement",
    "max_misalignment",
    "misalignment_angle",
    "oracle_fine_average",
    "phase_to_height",
    "regrid",
    "rotate_stiffness",
    "simulate_shear_phase",
    "stiffness_from_engineering",
    "t_phi",
    "t_theta",
    "unwrap_1d",
    "wrap_phase",
    "wrinkle_height",
]
