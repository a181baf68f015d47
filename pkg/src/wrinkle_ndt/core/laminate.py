"""
Laminate material data model.

Engineering constants, Voigt stiffness/compliance matrices, plies and layups.
Voigt order is (xx, yy, zz, yz, zx, xy) with engineering shear strains, units
GPa and mm throughout.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np

from wrinkle_ndt.core.errors import (
    InadmissibleMaterialError,
    InvalidMaterialError,
    SingularMatrixError,
)

logger = logging.getLogger(__name__)

VOIGT_ORDER = ("xx", "yy", "zz", "yz", "zx", "xy")

SYMMETRY_RTOL = 1e-12


class PoissonConvention(Enum):
    """How the two indices of a Poisson ratio nu_ij are read.

    LOAD_SECOND: nu_ij = -eps_i / eps_j under uniaxial stress in j
                 (nu21 is the major ratio of a unidirectional ply).
    LOAD_FIRST:  nu_ij = -eps_j / eps_i under uniaxial stress in i.
    """
    LOAD_SECOND = "load-second"
    LOAD_FIRST = "load-first"


@dataclass(frozen=True)
class EngineeringConstants:
    """Orthotropic engineering constants of a ply (GPa, dimensionless ratios)."""
    E11: float
    E22: float
    E33: float
    G23: float
    G31: float
    G12: float
    nu21: float
    nu32: float
    nu31: float
    convention: PoissonConvention = PoissonConvention.LOAD_SECOND

    def __post_init__(self):
        for name in ("E11", "E22", "E33", "G23", "G31", "G12"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise InvalidMaterialError(f"{name} must be a positive modulus, got {value}")
        for name in ("nu21", "nu32", "nu31"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidMaterialError(f"{name} must be finite")

    @property
    def moduli(self) -> tuple[float, float, float, float, float, float]:
        return (self.E11, self.E22, self.E33, self.G23, self.G31, self.G12)

    def to_dict(self) -> dict[str, float | str]:
        return {
            "E11": self.E11,
            "E22": self.E22,
            "E33": self.E33,
            "G23": self.G23,
            "G31": self.G31,
            "G12": self.G12,
            "nu21": self.nu21,
            "nu32": self.nu32,
            "nu31": self.nu31,
            "convention": self.convention.value,
        }


def _as_symmetric(values: np.ndarray, kind: str) -> np.ndarray:
    """Validate shape, finiteness and symmetry; return a read-only copy."""
    matrix = np.array(values, dtype=float)
    if matrix.shape != (6, 6):
        raise SingularMatrixError(f"{kind} must be 6x6, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise SingularMatrixError(f"{kind} has non-finite entries")
    scale = np.max(np.abs(matrix))
    if scale == 0.0:
        raise SingularMatrixError(f"{kind} is identically zero")
    asymmetry = np.max(np.abs(matrix - matrix.T))
    if asymmetry > SYMMETRY_RTOL * scale:
        raise SingularMatrixError(
            f"{kind} is not symmetric (max |M - M^T| = {asymmetry:.3e})"
        )
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(f"{kind} is not positive definite") from None
    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True, eq=False)
class VoigtMatrix:
    """A symmetric positive definite 6x6 matrix in Voigt notation."""
    values: np.ndarray

    kind = "matrix"

    def __post_init__(self):
        object.__setattr__(self, "values", _as_symmetric(self.values, self.kind))

    @classmethod
    def from_array(cls, values: np.ndarray, symmetrize: bool = True):
        """Build from a raw array, removing round-off asymmetry first."""
        matrix = np.asarray(values, dtype=float)
        if symmetrize and matrix.shape == (6, 6):
            matrix = 0.5 * (matrix + matrix.T)
        return cls(matrix)

    def __getitem__(self, index):
        return self.values[index]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.values, dtype=dtype)

    def allclose(self, other: "VoigtMatrix", rtol: float = 1e-9) -> bool:
        """Relative Frobenius-norm comparison."""
        diff = np.linalg.norm(self.values - np.asarray(other))
        return bool(diff <= rtol * np.linalg.norm(self.values))

    def to_list(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self.values]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(diag={np.round(np.diag(self.values), 4).tolist()})"


class StiffnessMatrix(VoigtMatrix):
    """Stiffness [C] acting on {eps_xx, eps_yy, eps_zz, gamma_yz, gamma_zx, gamma_xy} (GPa)."""

    kind = "stiffness matrix"


class ComplianceMatrix(VoigtMatrix):
    """Compliance [S] = [C]^-1 (1/GPa)."""

    kind = "compliance matrix"


@dataclass(frozen=True)
class Ply:
    """A single ply: in-plane fiber angle (degrees), thickness (mm), material."""
    theta: float
    thickness: float
    material: EngineeringConstants

    def __post_init__(self):
        if not self.thickness > 0.0:
            raise InvalidMaterialError(f"ply thickness must be positive, got {self.thickness}")


@dataclass(frozen=True)
class Layup:
    """Plies ordered bottom to top."""
    plies: tuple[Ply, ...]
    notation: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "plies", tuple(self.plies))
        if not self.plies:
            raise InvalidMaterialError("a layup needs at least one ply")

    @property
    def height(self) -> float:
        """Total laminate height h (mm)."""
        return float(sum(ply.thickness for ply in self.plies))

    @property
    def ply_count(self) -> int:
        return len(self.plies)

    @property
    def angles(self) -> list[float]:
        return [ply.theta for ply in self.plies]

    def interfaces(self) -> np.ndarray:
        """Flat ply interface coordinates z^0..z^n measured from the midsurface."""
        thicknesses = np.array([ply.thickness for ply in self.plies])
        z = np.concatenate(([0.0], np.cumsum(thicknesses)))
        return z - 0.5 * z[-1]

    def __repr__(self) -> str:
        label = self.notation or "/".join(f"{p.theta:g}" for p in self.plies)
        return f"Layup({label}, h={self.height:g} mm)"


def _compliance_array(ec: EngineeringConstants) -> np.ndarray:
    """Assemble the orthotropic compliance from engineering constants."""
    s = np.zeros((6, 6))
    s[0, 0] = 1.0 / ec.E11
    s[1, 1] = 1.0 / ec.E22
    s[2, 2] = 1.0 / ec.E33
    s[3, 3] = 1.0 / ec.G23
    s[4, 4] = 1.0 / ec.G31
    s[5, 5] = 1.0 / ec.G12

    if ec.convention is PoissonConvention.LOAD_SECOND:
        s[1, 0] = -ec.nu21 / ec.E11
        s[2, 1] = -ec.nu32 / ec.E22
        s[2, 0] = -ec.nu31 / ec.E11
    else:
        s[1, 0] = -ec.nu21 / ec.E22
        s[2, 1] = -ec.nu32 / ec.E33
        s[2, 0] = -ec.nu31 / ec.E33

    lower = np.tril(s, -1)
    s = s + lower.T
    return 0.5 * (s + s.T)


@lru_cache(maxsize=64)
def stiffness_from_engineering(ec: EngineeringConstants) -> StiffnessMatrix:
    """
    Build the principal-axis stiffness [C-bar] of an orthotropic ply.

    Args:
        ec: Engineering constants (moduli already validated positive)

    Returns:
        StiffnessMatrix in GPa

    Raises:
        InadmissibleMaterialError: if the Poisson ratios make the compliance
            indefinite
    """
    s = _compliance_array(ec)
    eigenvalues = np.linalg.eigvalsh(s)
    if eigenvalues[0] <= 0.0:
        raise InadmissibleMaterialError(
            f"compliance is not positive definite (min eigenvalue {eigenvalues[0]:.3e}); "
            f"check the Poisson ratios and the {ec.convention.value} convention"
        )
    c = np.linalg.inv(s)
    logger.debug(f"Built stiffness from constants, C11={c[0, 0]:.6g} GPa")
    return StiffnessMatrix.from_array(c)


def compliance(c: VoigtMatrix) -> ComplianceMatrix:
    """Invert an SPD stiffness into its compliance."""
    values = np.asarray(c, dtype=float)
    try:
        np.linalg.cholesky(values)
        inverse = np.linalg.inv(values)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("cannot invert a non-SPD stiffness matrix") from None
    return ComplianceMatrix.from_array(inverse)


def effective_engineering_constants(
    c: VoigtMatrix,
    convention: PoissonConvention = PoissonConvention.LOAD_SECOND,
) -> EngineeringConstants:
    """
    Read apparent engineering constants from the inverse of a stiffness.

    For orthotropic matrices this is the exact inverse of
    stiffness_from_engineering; for anisotropic matrices the coupling terms
    are ignored and the returned values are apparent moduli.
    """
    s = np.asarray(compliance(c))
    e11, e22, e33 = 1.0 / s[0, 0], 1.0 / s[1, 1], 1.0 / s[2, 2]

    if convention is PoissonConvention.LOAD_SECOND:
        nu21 = -s[1, 0] * e11
        nu32 = -s[2, 1] * e22
        nu31 = -s[2, 0] * e11
    else:
        nu21 = -s[1, 0] * e22
        nu32 = -s[2, 1] * e33
        nu31 = -s[2, 0] * e33

    return EngineeringConstants(
        E11=float(e11),
        E22=float(e22),
        E33=float(e33),
        G23=float(1.0 / s[3, 3]),
        G31=float(1.0 / s[4, 4]),
        G12=float(1.0 / s[5, 5]),
        nu21=float(nu21),
        nu32=float(nu32),
        nu31=float(nu31),
        convention=convention,
    )


# Carbon/epoxy prepreg used throughout the wrinkle study
CARBON_EPOXY = EngineeringConstants(
    E11=133.3,
    E22=9.09,
    E33=9.09,
    G23=3.16,
    G31=7.24,
    G12=7.23,
    nu21=0.261,
    nu32=0.436,
    nu31=0.261,
)

BUILTIN_MATERIALS: dict[str, EngineeringConstants] = {
    "carbon-epoxy-table4": CARBON_EPOXY,
    "carbon-epoxy": CARBON_EPOXY,  # alias
}


def get_material(name: str) -> EngineeringConstants:
    """Look up a built-in material by name."""
    try:
        return BUILTIN_MATERIALS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_MATERIALS))
        raise InvalidMaterialError(f"unknown material {name!r} (known: {known})") from None
