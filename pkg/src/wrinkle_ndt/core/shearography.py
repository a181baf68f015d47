"""
Shearography phase processing.

A shearogram measures the phase difference

    dPhi_y = (4 pi / lambda_L) * (dw/dy) * delta_y

for an observation direction aligned with the illumination. The pipeline
here is wrapped phase -> column-wise Itoh unwrapping along y -> slope ->
cumulative trapezoid integration -> out-of-plane displacement w (nm)
referenced to zero at a chosen pixel.

Rows of a map run along y, columns along x.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import cumulative_trapezoid

from wrinkle_ndt.core.errors import ConfigError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

# He-Ne laser line (nm)
HE_NE_WAVELENGTH_NM = 632.8


def wrap(values: ArrayLike) -> np.ndarray:
    """Reduce angles into (-pi, pi]."""
    values = np.asarray(values, dtype=float)
    return values - TWO_PI * np.ceil((values - np.pi) / TWO_PI)


@dataclass(frozen=True, eq=False)
class PhaseMap:
    """2D phase field in radians; rows along y, columns along x."""
    values: np.ndarray
    pixel_pitch: float = 1.0
    wrapped: bool = False
    mask: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ConfigError(f"phase map must be 2D, got {values.ndim}D")
        if not self.pixel_pitch > 0.0:
            raise ConfigError(f"pixel pitch must be positive, got {self.pixel_pitch}")
        mask = None
        if self.mask is not None:
            mask = np.array(self.mask, dtype=bool)
            if mask.shape != values.shape:
                raise ConfigError("phase mask shape does not match the phase map")
            mask.setflags(write=False)
        valid = values if mask is None else values[mask]
        if not np.all(np.isfinite(valid)):
            raise ConfigError("phase map contains non-finite values")
        if self.wrapped and np.any((valid <= -np.pi) | (valid > np.pi)):
            raise ConfigError("wrapped phase map has values outside (-pi, pi]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class ShearConfig:
    """Laser wavelength (nm), shear amount (mm) and zero-displacement pixel (row, col)."""
    delta_y: float
    lambda_L: float = HE_NE_WAVELENGTH_NM
    reference_point: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if not self.lambda_L > 0.0:
            raise ConfigError(f"laser wavelength must be positive, got {self.lambda_L}")
        if not np.isfinite(self.delta_y) or self.delta_y == 0.0:
            raise ConfigError("shear amount delta_y must be finite and non-zero")
        object.__setattr__(self, "reference_point", tuple(int(v) for v in self.reference_point))

    @property
    def sensitivity(self) -> float:
        """Phase per unit slope, 4 pi delta_y / lambda_L (rad per nm/mm)."""
        return 4.0 * np.pi * self.delta_y / self.lambda_L


@dataclass(frozen=True, eq=False)
class UnwrapResult:
    """Unwrapped phase plus the residue count of the wrapped input."""
    phase: PhaseMap
    residues: int


@dataclass(frozen=True, eq=False)
class DisplacementField:
    """Out-of-plane displacement (nm) on the phase-map pixels; masked pixels hold NaN."""
    values: np.ndarray
    pixel_pitch: float
    reference_point: tuple[int, int]
    residues: int = 0
    mask: Optional[np.ndarray] = None

    @property
    def peak(self) -> float:
        """Supported value with the largest magnitude."""
        magnitude = np.where(np.isfinite(self.values), np.abs(self.values), -1.0)
        return float(self.values.flat[np.argmax(magnitude)])


def wrap_phase(p: PhaseMap) -> PhaseMap:
    """Wrap an unwrapped phase map into (-pi, pi]."""
    return PhaseMap(wrap(p.values), pixel_pitch=p.pixel_pitch, wrapped=True, mask=p.mask)


def unwrap_1d(column: ArrayLike, valid: Optional[ArrayLike] = None) -> np.ndarray:
    """
    Itoh unwrapping: integrate the wrapped differences of a 1D signal.

    The first sample is kept; every output step lies in (-pi, pi]. With a
    valid mask, differences are taken between consecutive valid samples only
    and masked samples come back as NaN.
    """
    column = np.asarray(column, dtype=float)
    if column.size == 0:
        return column.copy()
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        result = np.full(column.shape, np.nan)
        if np.any(valid):
            result[valid] = unwrap_1d(column[valid])
        return result
    steps = wrap(np.diff(column))
    return np.concatenate(([column[0]], column[0] + np.cumsum(steps)))


def phase_residues(wrapped: ArrayLike, mask: Optional[ArrayLike] = None) -> int:
    """
    Number of 2x2 pixel loops whose wrapped differences do not sum to zero.

    Loops touching a masked pixel are not counted.
    """
    p = np.array(wrapped, dtype=float)
    if p.ndim != 2 or min(p.shape) < 2:
        return 0
    if mask is not None:
        p[~np.asarray(mask, dtype=bool)] = np.nan
    d_right_top = wrap(p[:-1, 1:] - p[:-1, :-1])
    d_down_right = wrap(p[1:, 1:] - p[:-1, 1:])
    d_left_bottom = wrap(p[1:, :-1] - p[1:, 1:])
    d_up_left = wrap(p[:-1, :-1] - p[1:, :-1])
    circulation = d_right_top + d_down_right + d_left_bottom + d_up_left
    return int(np.count_nonzero(np.abs(np.nan_to_num(circulation)) > np.pi))


def unwrap_phase_map(p: PhaseMap, axis: int = 0) -> UnwrapResult:
    """
    Unwrap every column (axis=0, along y) or row (axis=1) of a wrapped map.

    Masked pixels are skipped: each line is unwrapped across its valid
    pixels and masked pixels hold NaN in the result. Residues are counted on
    the wrapped input; a non-zero count means the 1D result depends on the
    integration path.
    """
    residues = phase_residues(p.values, p.mask)
    if residues:
        logger.warning(f"Wrapped phase has {residues} residues; 1D unwrapping may be path dependent")
    if p.mask is None:
        unwrapped = np.apply_along_axis(unwrap_1d, axis, p.values)
    else:
        lines = np.moveaxis(p.values, axis, -1)
        valid = np.moveaxis(p.mask, axis, -1)
        unwrapped = np.stack([unwrap_1d(line, ok) for line, ok in zip(lines, valid)])
        unwrapped = np.moveaxis(unwrapped, -1, axis)
    return UnwrapResult(
        phase=PhaseMap(unwrapped, pixel_pitch=p.pixel_pitch, wrapped=False, mask=p.mask),
        residues=residues,
    )


def _bridge_masked(slope: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Linear interpolation of masked slopes down each column; empty columns become NaN."""
    bridged = slope.copy()
    rows = np.arange(slope.shape[0])
    for col in range(slope.shape[1]):
        valid = mask[:, col]
        if valid.all():
            continue
        if not valid.any():
            bridged[:, col] = np.nan
            continue
        bridged[~valid, col] = np.interp(rows[~valid], rows[valid], slope[valid, col])
    return bridged


def integrate_displacement(p: PhaseMap, cfg: ShearConfig) -> np.ndarray:
    """
    Out-of-plane displacement w (nm) from an unwrapped shear phase.

    dw/dy = lambda_L / (4 pi delta_y) * dPhi_y, integrated down each column
    with the trapezoid rule and shifted so that w(reference_point) = 0.
    Masked pixels are bridged by interpolating the slope of their column and
    are NaN in the result.

    Raises:
        ConfigError: if the map is still wrapped or the reference point lies
            outside the map or on a masked pixel
    """
    if p.wrapped:
        raise ConfigError("integrate_displacement needs an unwrapped phase map")
    rows, cols = p.shape
    ref_row, ref_col = cfg.reference_point
    if not (0 <= ref_row < rows and 0 <= ref_col < cols):
        raise ConfigError(f"reference point {cfg.reference_point} outside the {rows}x{cols} map")
    if p.mask is not None and not p.mask[ref_row, ref_col]:
        raise ConfigError(f"reference point {cfg.reference_point} is a masked pixel")
    slope = np.asarray(p.values) / cfg.sensitivity
    if p.mask is not None:
        slope = _bridge_masked(slope, p.mask)
    w = cumulative_trapezoid(slope, dx=p.pixel_pitch, axis=0, initial=0.0)
    w = w - w[ref_row, ref_col]
    if p.mask is not None:
        w[~p.mask] = np.nan
    return w


def simulate_shear_phase(w: ArrayLike, cfg: ShearConfig, pixel_pitch: float = 1.0) -> PhaseMap:
    """Forward model: unwrapped shear phase of a displacement field w (nm)."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ConfigError("displacement field must be 2D")
    if w.shape[0] < 3:
        raise ConfigError("displacement field needs at least 3 rows along y")
    dw_dy = np.gradient(w, pixel_pitch, axis=0, edge_order=2)
    return PhaseMap(cfg.sensitivity * dw_dy, pixel_pitch=pixel_pitch, wrapped=False)


def recover_displacement(p: PhaseMap, cfg: ShearConfig) -> DisplacementField:
    """Unwrap if needed, then integrate."""
    residues = 0
    if p.wrapped:
        result = unwrap_phase_map(p, axis=0)
        p, residues = result.phase, result.residues
    w = integrate_displacement(p, cfg)
    logger.info(f"Recovered displacement, peak |w| = {np.nanmax(np.abs(w)):.4g} nm")
    return DisplacementField(w, p.pixel_pitch, cfg.reference_point, residues, mask=p.mask)
