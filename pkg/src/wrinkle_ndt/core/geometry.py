"""
Graded wrinkle geometry.

The wrinkle is a cosine undulation in the x-z plane whose amplitude decays
linearly from the midsurface (z = 0) to zero at the outer surfaces:

    W(x, z) = A * (h - 2|z|) / h * cos(2 pi x / lambda),  |x| <= lambda/2, |z| <= h/2

Angles are radians internally; degrees appear only at I/O boundaries.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from wrinkle_ndt.core.errors import ConfigError, DomainError
from wrinkle_ndt.core.laminate import Layup

logger = logging.getLogger(__name__)

# Relative slack on the domain bounds so that x = lambda/2 computed in floating point is accepted
_DOMAIN_RTOL = 1e-12

# Severity ratios of the design study
STUDY_RATIOS = (0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50)


@dataclass(frozen=True)
class WrinkleDescriptor:
    """Amplitude A, wavelength lambda and laminate height h, all in mm."""
    A: float
    wavelength: float
    h: float

    def __post_init__(self):
        if not np.isfinite(self.A) or self.A < 0.0:
            raise ConfigError(f"wrinkle amplitude must be >= 0, got {self.A}")
        if not np.isfinite(self.wavelength) or self.wavelength <= 0.0:
            raise ConfigError(f"wrinkle wavelength must be > 0, got {self.wavelength}")
        if not np.isfinite(self.h) or self.h <= 0.0:
            raise ConfigError(f"laminate height must be > 0, got {self.h}")

    @property
    def ratio(self) -> float:
        """Severity ratio A/lambda."""
        return self.A / self.wavelength

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def is_flat(self) -> bool:
        return self.A == 0.0

    def to_dict(self) -> dict[str, float]:
        return {
            "A_mm": self.A,
            "lambda_mm": self.wavelength,
            "h_mm": self.h,
            "ratio": self.ratio,
            "phi_max_deg": max_misalignment(self.ratio),
        }


def _check_domain(x: np.ndarray, z: np.ndarray, w: WrinkleDescriptor) -> None:
    half_length = 0.5 * w.wavelength * (1.0 + _DOMAIN_RTOL)
    half_height = 0.5 * w.h * (1.0 + _DOMAIN_RTOL)
    if np.any(~np.isfinite(x)) or np.any(np.abs(x) > half_length):
        raise DomainError(f"x outside [-{w.wavelength / 2:g}, {w.wavelength / 2:g}] mm")
    if np.any(~np.isfinite(z)) or np.any(np.abs(z) > half_height):
        raise DomainError(f"z outside [-{w.h / 2:g}, {w.h / 2:g}] mm")


def decay_factor(z: ArrayLike, w: WrinkleDescriptor) -> np.ndarray:
    """Linear amplitude decay (h - 2|z|) / h, 1 at the midsurface and 0 at the surfaces."""
    z = np.asarray(z, dtype=float)
    return np.clip((w.h - 2.0 * np.abs(z)) / w.h, 0.0, 1.0)


def wrinkle_height(x: ArrayLike, z: ArrayLike, w: WrinkleDescriptor) -> np.ndarray | float:
    """
    Out-of-plane fiber displacement W(x, z) in mm.

    Raises:
        DomainError: if (x, z) lies outside the wrinkle domain
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_domain(x, z, w)
    result = w.A * decay_factor(z, w) * np.cos(w.wavenumber * x)
    return float(result) if result.ndim == 0 else result


def slope(x: ArrayLike, z: ArrayLike, w: WrinkleDescriptor) -> np.ndarray:
    """dW/dx without domain checking."""
    x = np.asarray(x, dtype=float)
    return -w.A * w.wavenumber * decay_factor(z, w) * np.sin(w.wavenumber * x)


def misalignment_angle(x: ArrayLike, z: ArrayLike, w: WrinkleDescriptor) -> np.ndarray | float:
    """
    Fiber misalignment angle phi = arctan(dW/dx) in radians.

    Odd in x, even in z; positive phi tilts the fiber toward +z.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_domain(x, z, w)
    result = np.arctan(slope(x, z, w))
    return float(result) if result.ndim == 0 else result


def max_misalignment(ratio: float) -> float:
    """Maximum misalignment angle in degrees, reached at x = +-lambda/4 on the midsurface."""
    if ratio < 0.0:
        raise DomainError(f"severity ratio must be >= 0, got {ratio}")
    return float(np.degrees(np.arctan(2.0 * np.pi * ratio)))


def misalignment_table(ratios: tuple[float, ...] = STUDY_RATIOS) -> list[tuple[float, float]]:
    """(A/lambda, phi_max in degrees) pairs."""
    return [(ratio, max_misalignment(ratio)) for ratio in ratios]


def ply_interface_heights(layup: Layup, w: WrinkleDescriptor, x: float) -> np.ndarray:
    """
    Ply interface z-coordinates at position x.

    Interfaces stay at their flat nominal positions; the wrinkle enters the
    model only through the misalignment angle.
    """
    _check_domain(np.asarray(x, dtype=float), np.asarray(0.0), w)
    return layup.interfaces()
