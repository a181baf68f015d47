"""
wrinkle-ndt: effective stiffness of wrinkled laminates and optical displacement processing.
"""

__version__ = "0.1.0"

from wrinkle_ndt.core.geometry import WrinkleDescriptor
from wrinkle_ndt.core.homogenization import Discretization, homogenize_wrinkle
from wrinkle_ndt.core.laminate import (
    EngineeringConstants,
    Layup,
    Ply,
    StiffnessMatrix,
    stiffness_from_engineering,
)

__all__ = [
    "Discretization",
    "EngineeringConstants",
    "Layup",
    "Ply",
    "StiffnessMatrix",
    "WrinkleDescriptor",
    "homogenize_wrinkle",
    "stiffness_from_engineering",
]
