"""
Fringe projection profilometry processing.

Three phase-shifted fringe images give a wrapped phase, Itoh unwrapping along
the fringe direction gives a continuous phase, and a linear reference-plane
model converts it to height. Two point clouds are compared by regridding
both onto one X-Y mesh and subtracting heights, which is valid when in-plane
motion is small compared with out-of-plane motion.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import RectBivariateSpline
from scipy.spatial import Delaunay, QhullError, cKDTree

from wrinkle_ndt.core.errors import ConfigError, DegenerateInputError, NoOverlapError
from wrinkle_ndt.core.shearography import PhaseMap, unwrap_phase_map, wrap

logger = logging.getLogger(__name__)

# Phase shifts of the three patterns
PHASE_SHIFTS = (-2.0 * np.pi / 3.0, 0.0, 2.0 * np.pi / 3.0)

# Neighbours used by the local patch fit of scattered clouds
PATCH_NEIGHBOURS = 20

# Drift above this fraction of the grid spacing triggers a warning
DRIFT_WARN_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class IntensityImage:
    """Captured fringe image (arbitrary intensity units)."""
    values: np.ndarray
    pixel_pitch: float = 1.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ConfigError("intensity image must be 2D")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ConfigError("intensity image must be finite and non-negative")
        if not self.pixel_pitch > 0.0:
            raise ConfigError(f"pixel pitch must be positive, got {self.pixel_pitch}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class GridSpec:
    """Regular X-Y mesh: origin (mm), spacing (mm) and node counts."""
    origin_x: float
    origin_y: float
    spacing_x: float
    spacing_y: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.spacing_x > 0.0 and self.spacing_y > 0.0):
            raise ConfigError("grid spacing must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("grid needs at least one node per axis")

    @property
    def x(self) -> np.ndarray:
        return self.origin_x + self.spacing_x * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin_y + self.spacing_y * np.arange(self.ny)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as (X, Y) arrays of shape (ny, nx)."""
        return np.meshgrid(self.x, self.y)

    def to_dict(self) -> dict:
        return {
            "origin": [self.origin_x, self.origin_y],
            "spacing": [self.spacing_x, self.spacing_y],
            "shape": [self.ny, self.nx],
        }


@dataclass(frozen=True, eq=False)
class HeightGrid:
    """Height (or displacement) values on a grid; masked cells hold NaN."""
    spec: GridSpec
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.shape != self.spec.shape or mask.shape != self.spec.shape:
            raise ConfigError(f"grid data must have shape {self.spec.shape}")
        values[~mask] = np.nan
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def supported(self) -> np.ndarray:
        """Values of the supported cells (flattened)."""
        return self.values[self.mask]


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Scattered 3D points (mm), one row per point."""
    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ConfigError("point cloud must have shape (n, 3)")
        if not np.all(np.isfinite(points)):
            raise ConfigError("point cloud has non-finite coordinates")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, :2]

    @property
    def z(self) -> np.ndarray:
        return self.points[:, 2]

    def __len__(self) -> int:
        return len(self.points)

    def shifted(self, dz: float) -> "PointCloud":
        return PointCloud(self.points + np.array([0.0, 0.0, dz]))


# === Phase extraction ===

def generate_fringes(
    phase: ArrayLike,
    background: float = 100.0,
    modulation: float = 50.0,
    pixel_pitch: float = 1.0,
) -> tuple[IntensityImage, IntensityImage, IntensityImage]:
    """Three fringe images a + b cos(phase + shift) for the shifts -2pi/3, 0, +2pi/3."""
    phase = np.asarray(phase, dtype=float)
    return tuple(
        IntensityImage(background + modulation * np.cos(phase + shift), pixel_pitch)
        for shift in PHASE_SHIFTS
    )


def extract_phase_3step(
    i1: IntensityImage,
    i2: IntensityImage,
    i3: IntensityImage,
    min_modulation: float = 1e-6,
) -> PhaseMap:
    """
    Wrapped phase from three images shifted by 2pi/3.

    phi = atan2(sqrt(3) (I1 - I3), 2 I2 - I1 - I3); pixels whose modulation
    amplitude is below min_modulation are masked.

    Raises:
        ConfigError: if the images differ in shape
        DegenerateInputError: if no pixel is modulated
    """
    a, b, c = i1.values, i2.values, i3.values
    if not (a.shape == b.shape == c.shape):
        raise ConfigError("fringe images must have the same shape")
    numerator = np.sqrt(3.0) * (a - c)
    denominator = 2.0 * b - a - c
    amplitude = np.sqrt(numerator ** 2 + denominator ** 2) / 3.0
    mask = amplitude >= min_modulation
    if not np.any(mask):
        raise DegenerateInputError("fringe images carry no modulation")
    masked = int(mask.size - np.count_nonzero(mask))
    if masked:
        logger.warning(f"{masked} pixels below modulation threshold {min_modulation:g} masked")
    phase = wrap(np.arctan2(numerator, denominator))
    phase[~mask] = 0.0
    return PhaseMap(phase, pixel_pitch=i1.pixel_pitch, wrapped=True, mask=mask)


def _combined_mask(*maps: PhaseMap) -> np.ndarray:
    mask = np.ones(maps[0].shape, dtype=bool)
    for p in maps:
        if p.mask is not None:
            mask &= p.mask
    return mask


def _with_mask(p: PhaseMap, mask: np.ndarray) -> PhaseMap:
    return PhaseMap(p.values, pixel_pitch=p.pixel_pitch, wrapped=p.wrapped, mask=mask)


def phase_to_height(p: PhaseMap, k_cal: float, reference_plane_phase: PhaseMap) -> HeightGrid:
    """
    Height z = k_cal * (phi - phi_ref) per pixel (mm), on the pixel grid.

    Raises:
        ConfigError: if shapes differ or a map is still wrapped
    """
    if p.shape != reference_plane_phase.shape:
        raise ConfigError(
            f"phase map {p.shape} and reference phase {reference_plane_phase.shape} differ in shape"
        )
    if p.wrapped or reference_plane_phase.wrapped:
        raise ConfigError("phase_to_height needs unwrapped phase maps")
    rows, cols = p.shape
    spec = GridSpec(0.0, 0.0, p.pixel_pitch, p.pixel_pitch, cols, rows)
    height = k_cal * (p.values - reference_plane_phase.values)
    return HeightGrid(spec, height, _combined_mask(p, reference_plane_phase))


def reconstruct_height(
    images: tuple[IntensityImage, IntensityImage, IntensityImage],
    reference_images: tuple[IntensityImage, IntensityImage, IntensityImage],
    k_cal: float,
    fringe_axis: int = 1,
    min_modulation: float = 1e-6,
) -> HeightGrid:
    """
    Fringe images of object and reference plane to a height map.

    Both phases are unwrapped over the pixels modulated in both image sets,
    so dead pixels never enter a phase difference and every line of the two
    maps starts from the same pixel. Unmodulated pixels are masked in the
    result.
    """
    wrapped = extract_phase_3step(*images, min_modulation=min_modulation)
    wrapped_reference = extract_phase_3step(*reference_images, min_modulation=min_modulation)
    if wrapped.shape != wrapped_reference.shape:
        raise ConfigError(
            f"object images {wrapped.shape} and reference images {wrapped_reference.shape} differ in shape"
        )
    mask = _combined_mask(wrapped, wrapped_reference)
    measured = unwrap_phase_map(_with_mask(wrapped, mask), axis=fringe_axis)
    reference = unwrap_phase_map(_with_mask(wrapped_reference, mask), axis=fringe_axis)
    return phase_to_height(measured.phase, k_cal, reference.phase)


# === Point-cloud regridding ===

def _check_cloud(cloud: PointCloud) -> None:
    if len(cloud) < 4:
        raise DegenerateInputError(f"point cloud needs at least 4 points, got {len(cloud)}")
    centered = cloud.xy - cloud.xy.mean(axis=0)
    singular_values = np.linalg.svd(centered, compute_uv=False)
    if singular_values[-1] <= 1e-12 * singular_values[0]:
        raise DegenerateInputError("point cloud is collinear in the X-Y plane")


def _rectilinear(cloud: PointCloud) -> Optional[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """(xs, ys, Z[ix, iy]) if the cloud is a complete rectilinear grid, else None."""
    xs = np.unique(cloud.xy[:, 0])
    ys = np.unique(cloud.xy[:, 1])
    if len(xs) < 4 or len(ys) < 4 or len(xs) * len(ys) != len(cloud):
        return None
    ix = np.searchsorted(xs, cloud.xy[:, 0])
    iy = np.searchsorted(ys, cloud.xy[:, 1])
    filled = np.zeros((len(xs), len(ys)), dtype=bool)
    filled[ix, iy] = True
    if not filled.all():
        return None
    z = np.empty((len(xs), len(ys)))
    z[ix, iy] = cloud.z
    return xs, ys, z


def _poly_terms(dx: np.ndarray, dy: np.ndarray, degree: int) -> np.ndarray:
    """Monomials dx^i dy^j with i + j <= degree; constant term first."""
    terms = [dx ** (total - j) * dy ** j for total in range(degree + 1) for j in range(total + 1)]
    return np.stack(terms, axis=-1)


def _patch_fit(cloud: PointCloud, nodes: np.ndarray) -> np.ndarray:
    """Local least-squares polynomial fit around each node, evaluated at the node."""
    n_points = len(cloud)
    degree = 3 if n_points >= 16 else (2 if n_points >= 8 else 1)
    k = min(PATCH_NEIGHBOURS, n_points)
    tree = cKDTree(cloud.xy)
    distances, neighbours = tree.query(nodes, k=k)
    radius = np.maximum(distances[:, -1], np.finfo(float).tiny)[:, None]
    dx = (cloud.xy[neighbours, 0] - nodes[:, None, 0]) / radius
    dy = (cloud.xy[neighbours, 1] - nodes[:, None, 1]) / radius
    design = _poly_terms(dx, dy, degree)
    # Row 0 of the pseudo-inverse maps neighbour heights to the constant term
    weights = np.linalg.pinv(design)[:, 0, :]
    return np.einsum("gk,gk->g", weights, cloud.z[neighbours])


def regrid(cloud: PointCloud, grid: GridSpec) -> HeightGrid:
    """
    Interpolate cloud heights onto the grid nodes inside the cloud's convex hull.

    Complete rectilinear clouds use an interpolating bicubic spline;
    unstructured clouds use a local cubic least-squares patch per node.
    Nodes outside the hull are masked, never extrapolated.

    Raises:
        DegenerateInputError: for fewer than 4 points or a collinear cloud
    """
    _check_cloud(cloud)
    gx, gy = grid.nodes()
    values = np.full(grid.shape, np.nan)

    structured = _rectilinear(cloud)
    if structured is not None:
        xs, ys, z = structured
        mask = (gx >= xs[0]) & (gx <= xs[-1]) & (gy >= ys[0]) & (gy <= ys[-1])
        if np.any(mask):
            spline = RectBivariateSpline(xs, ys, z, kx=3, ky=3, s=0)
            values[mask] = spline.ev(gx[mask], gy[mask])
        logger.debug(f"Regridded rectilinear cloud {len(xs)}x{len(ys)} with bicubic spline")
        return HeightGrid(grid, values, mask)

    try:
        hull = Delaunay(cloud.xy)
    except QhullError as e:
        raise DegenerateInputError(f"cannot triangulate point cloud: {e}") from None
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    inside = hull.find_simplex(nodes) >= 0
    if np.any(inside):
        flat = values.ravel()
        flat[inside] = _patch_fit(cloud, nodes[inside])
        values = flat.reshape(grid.shape)
    logger.debug(f"Regridded {len(cloud)} scattered points, {int(inside.sum())} nodes supported")
    return HeightGrid(grid, values, inside.reshape(grid.shape))


def in_plane_drift(before: PointCloud, after: PointCloud) -> float:
    """Distance between the X-Y centroids of two clouds (mm)."""
    return float(np.linalg.norm(after.xy.mean(axis=0) - before.xy.mean(axis=0)))


def displacement_extract(before: PointCloud, after: PointCloud, grid: GridSpec) -> HeightGrid:
    """
    Out-of-plane displacement between two clouds on a common grid.

    Raises:
        NoOverlapError: if no grid node is supported by both clouds
    """
    drift = in_plane_drift(before, after)
    limit = DRIFT_WARN_FRACTION * min(grid.spacing_x, grid.spacing_y)
    if drift > limit:
        logger.warning(
            f"In-plane centroid drift {drift:.4g} mm exceeds {limit:.4g} mm; "
            "out-of-plane displacement may be biased"
        )
    first = regrid(before, grid)
    second = regrid(after, grid)
    mask = first.mask & second.mask
    if not np.any(mask):
        raise NoOverlapError("the two point clouds share no supported grid cell")
    difference = np.where(mask, second.values - first.values, np.nan)
    logger.info(f"Extracted displacement on {int(mask.sum())} of {mask.size} grid cells")
    return HeightGrid(grid, difference, mask)
