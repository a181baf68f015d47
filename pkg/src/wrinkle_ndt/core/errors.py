"""
Exception hierarchy for wrinkle-ndt.

Every error carries a short machine-parsable ``code`` and the process exit
code the CLI returns for it.
"""

from typing import Optional


class WrinkleNDTError(Exception):
    """Base class for all wrinkle-ndt errors."""

    code = "error"
    exit_code = 1


# === Configuration / input errors (exit 2) ===

class ConfigError(WrinkleNDTError):
    """Invalid configuration, schema violation or inconsistent input."""

    code = "config"
    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = []
        if path:
            location.append(path)
        if line is not None:
            location.append(f"line {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class InvalidMaterialError(ConfigError):
    """Material constants violate basic positivity."""

    code = "invalid-material"


class InadmissibleMaterialError(ConfigError):
    """Material constants give a compliance that is not positive definite."""

    code = "inadmissible-material"


# === Numerical errors (exit 3) ===

class MathError(WrinkleNDTError):
    """A numerical operation cannot produce a well-defined result."""

    code = "math"
    exit_code = 3


class SingularMatrixError(MathError):
    """Matrix is singular or not symmetric positive definite."""

    code = "singular-matrix"


class DomainError(MathError):
    """Coordinates outside the wrinkle domain."""

    code = "domain"


class HomogenizationSingularityError(MathError):
    """A block that must be inverted during homogenization is singular."""

    code = "homogenization-singularity"

    def __init__(self, message: str, x: Optional[float] = None, ply: Optional[int] = None):
        self.x = x
        self.ply = ply
        details = []
        if x is not None:
            details.append(f"x={x:.6g} mm")
        if ply is not None:
            details.append(f"ply={ply}")
        if details:
            message = f"{message} at {', '.join(details)}"
        super().__init__(message)


class DegenerateInputError(MathError):
    """Input data carries no usable information (zero modulation, collinear cloud)."""

    code = "degenerate-input"


class NoOverlapError(MathError):
    """Two height grids share no supported cell."""

    code = "no-overlap"


class ZeroDenominatorError(MathError):
    """Relative error requested against a zero value."""

    code = "zero-denominator"


# === File errors (exit 4) ===

class DataIOError(WrinkleNDTError):
    """A data file is missing, unreadable or malformed."""

    code = "io"
    exit_code = 4
