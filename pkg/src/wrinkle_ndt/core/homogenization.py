"""
Two-stage homogenization of a wrinkled laminate RVE.

The RVE is cut into vertical strips over one wavelength. Within each strip
the plies are mixed through the thickness assuming uniform out-of-plane
stresses (zz, yz, zx) and uniform in-plane strains (xx, yy, xy). The strips
are then mixed along x assuming uniform stresses (xx, zx, xy) and uniform
strains (yy, zz, yz).

Both stages are the same partial inversion. Splitting the Voigt indices into
a uniform-stress group P and a uniform-strain group Q,

    eps_P = K_PP^-1 sig_P - K_PP^-1 K_PQ eps_Q
    sig_Q = K_QP K_PP^-1 sig_P + (K_QQ - K_QP K_PP^-1 K_PQ) eps_Q

the three coefficient blocks are averaged and the averaged relation is
inverted back into a stiffness.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from wrinkle_ndt.core.errors import ConfigError, HomogenizationSingularityError
from wrinkle_ndt.core.geometry import WrinkleDescriptor, slope
from wrinkle_ndt.core.laminate import Layup, StiffnessMatrix, VoigtMatrix, stiffness_from_engineering
from wrinkle_ndt.core.rotation import rotate_phi_batch, rotate_theta

logger = logging.getLogger(__name__)

# Voigt index groups (0-based; order xx, yy, zz, yz, zx, xy)
A_GROUP = (2, 3, 4)  # zz, yz, zx: uniform stress through the thickness
B_GROUP = (0, 1, 5)  # xx, yy, xy: uniform strain through the thickness
E_GROUP = (0, 4, 5)  # xx, zx, xy: uniform stress along the wavelength
F_GROUP = (1, 2, 3)  # yy, zz, yz: uniform strain along the wavelength

MIN_STRIPS_PER_WAVELENGTH = 16

# Strips evaluated per vectorized batch; fixed so results do not depend on worker count
STRIP_CHUNK = 64

# Smallest admissible eigenvalue of an inverted block relative to the largest
_SINGULAR_RTOL = 1e-13

# Stiffness entries below this fraction of the largest one are left out of the convergence check
NEGLIGIBLE_ENTRY = 1e-3

PlyStiffness = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Discretization:
    """Strip count over [-lambda/2, lambda/2] and Gauss points per ply."""
    n_strips: int = 256
    n_z_points: int = 4

    def __post_init__(self):
        if int(self.n_strips) != self.n_strips or self.n_strips < 1:
            raise ConfigError(f"n_strips must be an integer >= 1, got {self.n_strips}")
        if int(self.n_z_points) != self.n_z_points or self.n_z_points < 1:
            raise ConfigError(f"n_z_points must be an integer >= 1, got {self.n_z_points}")

    def refined(self) -> "Discretization":
        return Discretization(2 * self.n_strips, 2 * self.n_z_points)

    def to_dict(self) -> dict[str, int]:
        return {"n_strips": self.n_strips, "n_z_points": self.n_z_points}


@dataclass(frozen=True, eq=False)
class PartitionAB:
    """Through-thickness blocks: A = (zz, yz, zx), B = (xx, yy, xy)."""
    C_aa: np.ndarray
    C_ab: np.ndarray
    C_bb: np.ndarray

    def assemble(self) -> np.ndarray:
        return _assemble(self.C_aa, self.C_ab, self.C_bb, A_GROUP, B_GROUP)


@dataclass(frozen=True, eq=False)
class PartitionEF:
    """Along-wavelength blocks: E = (xx, zx, xy), F = (yy, zz, yz)."""
    C_ee: np.ndarray
    C_ef: np.ndarray
    C_ff: np.ndarray

    def assemble(self) -> np.ndarray:
        return _assemble(self.C_ee, self.C_ef, self.C_ff, E_GROUP, F_GROUP)


@dataclass(frozen=True)
class ConvergenceReport:
    """Outcome of re-running with doubled strips and z-points."""
    coarse: Discretization
    fine: Discretization
    max_entry_change: float
    frobenius_change: float
    tolerance: float

    @property
    def converged(self) -> bool:
        return self.max_entry_change <= self.tolerance and self.frobenius_change <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "coarse": self.coarse.to_dict(),
            "fine": self.fine.to_dict(),
            "max_entry_change": self.max_entry_change,
            "frobenius_change": self.frobenius_change,
            "tolerance": self.tolerance,
            "converged": self.converged,
        }


def _blocks(c: np.ndarray, first: tuple[int, ...], second: tuple[int, ...]):
    """Extract (K11, K12, K22) from (possibly batched) 6x6 matrices."""
    i, j = np.array(first), np.array(second)
    k11 = c[..., i[:, None], i[None, :]]
    k12 = c[..., i[:, None], j[None, :]]
    k22 = c[..., j[:, None], j[None, :]]
    return k11, k12, k22


def _assemble(k11, k12, k22, first: tuple[int, ...], second: tuple[int, ...]) -> np.ndarray:
    k11 = np.asarray(k11)
    c = np.zeros(k11.shape[:-2] + (6, 6))
    i, j = np.array(first), np.array(second)
    c[..., i[:, None], i[None, :]] = k11
    c[..., i[:, None], j[None, :]] = k12
    c[..., j[:, None], i[None, :]] = np.swapaxes(np.asarray(k12), -1, -2)
    c[..., j[:, None], j[None, :]] = k22
    return c


def partition_vertical(c: VoigtMatrix | np.ndarray) -> PartitionAB:
    """Split a stiffness into the through-thickness blocks."""
    return PartitionAB(*_blocks(np.asarray(c, dtype=float), A_GROUP, B_GROUP))


def partition_horizontal(cstar: VoigtMatrix | np.ndarray) -> PartitionEF:
    """Split a strip stiffness into the along-wavelength blocks."""
    return PartitionEF(*_blocks(np.asarray(cstar, dtype=float), E_GROUP, F_GROUP))


def _first_singular(k11: np.ndarray) -> Optional[tuple[int, ...]]:
    """Index of the first block whose smallest eigenvalue is not safely positive."""
    eigenvalues = np.linalg.eigvalsh(0.5 * (k11 + np.swapaxes(k11, -1, -2)))
    bad = eigenvalues[..., 0] <= _SINGULAR_RTOL * np.abs(eigenvalues[..., -1])
    if np.any(bad):
        return tuple(int(v) for v in np.argwhere(bad)[0])
    return None


def _condensed_terms(c: np.ndarray, stress_group, strain_group):
    """Per-point partial-inversion coefficients (K11^-1, K11^-1 K12, K22 - K21 K11^-1 K12)."""
    k11, k12, k22 = _blocks(c, stress_group, strain_group)
    inv11 = np.linalg.inv(k11)
    coupling = inv11 @ k12
    reduced = k22 - np.swapaxes(k12, -1, -2) @ coupling
    return inv11, coupling, reduced


def _recover(mean_inv, mean_coupling, mean_reduced, stress_group, strain_group) -> np.ndarray:
    """Invert averaged partial-inversion coefficients back to a stiffness."""
    k11 = np.linalg.inv(mean_inv)
    k12 = k11 @ mean_coupling
    k22 = np.swapaxes(mean_coupling, -1, -2) @ k12 + mean_reduced
    c = _assemble(k11, k12, k22, stress_group, strain_group)
    return 0.5 * (c + np.swapaxes(c, -1, -2))


def thickness_rule(layup: Layup, n_z_points: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gauss-Legendre rule through the thickness.

    A ply crossing the midsurface is split there, since the decay factor has
    a kink at z = 0.

    Returns:
        Tuple of (z nodes, weights summing to h, ply index of each node)
    """
    base_nodes, base_weights = np.polynomial.legendre.leggauss(n_z_points)
    interfaces = layup.interfaces()
    nodes, weights, owners = [], [], []
    for k in range(layup.ply_count):
        bottom, top = interfaces[k], interfaces[k + 1]
        segments = [(bottom, 0.0), (0.0, top)] if bottom < 0.0 < top else [(bottom, top)]
        for a, b in segments:
            half = 0.5 * (b - a)
            nodes.append(0.5 * (a + b) + half * base_nodes)
            weights.append(half * base_weights)
            owners.append(np.full(n_z_points, k))
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(owners)


def strip_centers(wavelength: float, n_strips: int) -> np.ndarray:
    """Midpoints of n equal strips over [-lambda/2, lambda/2]."""
    width = wavelength / n_strips
    return -0.5 * wavelength + width * (np.arange(n_strips) + 0.5)


def _vertical_average(
    c_points: np.ndarray,
    weights: np.ndarray,
    height: float,
    owners: np.ndarray,
    x: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Through-thickness mixing of point stiffnesses.

    Args:
        c_points: Stiffness at each quadrature point, shape (..., P, 6, 6)
        weights: Quadrature weights, shape (P,)
        height: Laminate height h
        owners: Ply index of each point (for error reporting)
        x: Strip positions matching the leading axis (for error reporting)

    Returns:
        Strip stiffness [C*], shape (..., 6, 6)
    """
    bad = _first_singular(_blocks(c_points, A_GROUP, B_GROUP)[0])
    if bad is not None:
        strip_x = float(x[bad[0]]) if x is not None and len(bad) > 1 else None
        raise HomogenizationSingularityError(
            "singular out-of-plane block C_aa", x=strip_x, ply=int(owners[bad[-1]])
        )
    inv11, coupling, reduced = _condensed_terms(c_points, A_GROUP, B_GROUP)
    scale = weights / height
    mean_inv = np.einsum("p,...pij->...ij", scale, inv11)
    mean_coupling = np.einsum("p,...pij->...ij", scale, coupling)
    mean_reduced = np.einsum("p,...pij->...ij", scale, reduced)
    return _recover(mean_inv, mean_coupling, mean_reduced, A_GROUP, B_GROUP)


def homogenize_strip(
    layup: Layup,
    material_stiffnesses: Sequence[VoigtMatrix | np.ndarray] | PlyStiffness,
    disc: Discretization = Discretization(),
    x: Optional[float] = None,
) -> StiffnessMatrix:
    """
    Vertical homogenization of one strip.

    Args:
        layup: Plies bottom to top
        material_stiffnesses: Either one laminate-frame stiffness per ply, or a
            callable (ply_index, z_nodes) -> array (len(z_nodes), 6, 6) for
            stiffness varying through the ply
        disc: Quadrature settings (n_z_points is used)
        x: Strip position, only used in error messages

    Returns:
        Strip stiffness [C*]

    Raises:
        HomogenizationSingularityError: if a ply's C_aa block is singular
    """
    z, weights, owners = thickness_rule(layup, disc.n_z_points)

    if callable(material_stiffnesses):
        c_points = np.empty((len(z), 6, 6))
        for k in range(layup.ply_count):
            selected = owners == k
            c_points[selected] = material_stiffnesses(k, z[selected])
    else:
        per_ply = [np.asarray(c, dtype=float) for c in material_stiffnesses]
        if len(per_ply) != layup.ply_count:
            raise ConfigError(
                f"expected {layup.ply_count} ply stiffnesses, got {len(per_ply)}"
            )
        c_points = np.stack(per_ply)[owners]

    try:
        cstar = _vertical_average(c_points, weights, layup.height, owners)
    except HomogenizationSingularityError as e:
        raise HomogenizationSingularityError("singular out-of-plane block C_aa", x=x, ply=e.ply) from None
    return StiffnessMatrix.from_array(cstar)


def _check_inputs(layup: Layup, wrinkle: WrinkleDescriptor, disc: Discretization) -> None:
    if abs(wrinkle.h - layup.height) > 1e-9 * layup.height:
        raise ConfigError(
            f"wrinkle height h={wrinkle.h:g} mm does not match layup height {layup.height:g} mm"
        )
    if not wrinkle.is_flat and disc.n_strips < MIN_STRIPS_PER_WAVELENGTH:
        raise ConfigError(
            f"n_strips={disc.n_strips} does not resolve the wrinkle "
            f"(need >= {MIN_STRIPS_PER_WAVELENGTH} strips per wavelength)"
        )


def _laminate_frame_plies(layup: Layup) -> np.ndarray:
    """Principal stiffness of each ply rotated by its in-plane angle, shape (n, 6, 6)."""
    return np.stack([
        rotate_theta(stiffness_from_engineering(ply.material), np.radians(ply.theta))
        for ply in layup.plies
    ])


def strip_stiffness_profile(
    layup: Layup,
    wrinkle: WrinkleDescriptor,
    disc: Discretization = Discretization(),
    workers: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Strip centers and the vertical-homogenized stiffness of every strip.

    Args:
        layup: Plies bottom to top
        wrinkle: Wrinkle geometry (h must equal the layup height)
        disc: Discretization
        workers: Threads used for strip batches (None or 1 runs serially)

    Returns:
        Tuple of (x centers, shape (S,); strip stiffnesses, shape (S, 6, 6))
    """
    _check_inputs(layup, wrinkle, disc)
    ctilde = _laminate_frame_plies(layup)
    z, weights, owners = thickness_rule(layup, disc.n_z_points)
    c_nodes = ctilde[owners]

    if wrinkle.is_flat:
        x = strip_centers(wrinkle.wavelength, disc.n_strips)
        cstar = _vertical_average(c_nodes, weights, layup.height, owners)
        return x, np.broadcast_to(cstar, (disc.n_strips, 6, 6)).copy()

    x = strip_centers(wrinkle.wavelength, disc.n_strips)

    def run_chunk(start: int) -> np.ndarray:
        xs = x[start:start + STRIP_CHUNK]
        phi = np.arctan(slope(xs[:, None], z[None, :], wrinkle))
        c_points = rotate_phi_batch(c_nodes, phi)
        return _vertical_average(c_points, weights, layup.height, owners, x=xs)

    starts = list(range(0, disc.n_strips, STRIP_CHUNK))
    if workers and workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            chunks = list(executor.map(run_chunk, starts))
    else:
        chunks = [run_chunk(start) for start in starts]

    logger.debug(f"Vertical homogenization done for {disc.n_strips} strips")
    return x, np.concatenate(chunks)


def horizontal_average(strips: np.ndarray, x: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Mix strip stiffnesses of equal width along x (composite midpoint rule).

    x holds the strip centers; when given, a singular strip is reported by
    its position.
    """
    bad = _first_singular(_blocks(strips, E_GROUP, F_GROUP)[0])
    if bad is not None:
        strip_x = float(x[bad[0]]) if x is not None else None
        raise HomogenizationSingularityError(f"singular block C_ee in strip {bad[0]}", x=strip_x)
    inv11, coupling, reduced = _condensed_terms(strips, E_GROUP, F_GROUP)
    return _recover(
        inv11.mean(axis=0), coupling.mean(axis=0), reduced.mean(axis=0), E_GROUP, F_GROUP
    )


def homogenize_wrinkle(
    layup: Layup,
    wrinkle: WrinkleDescriptor,
    disc: Discretization = Discretization(),
    workers: Optional[int] = None,
) -> StiffnessMatrix:
    """
    Effective stiffness [C**] of the RVE containing a graded wrinkle.

    Args:
        layup: Plies bottom to top
        wrinkle: Wrinkle geometry
        disc: Discretization (strip count and Gauss points per ply)
        workers: Threads for strip batches; the result does not depend on it

    Returns:
        Effective stiffness (GPa)
    """
    x, strips = strip_stiffness_profile(layup, wrinkle, disc, workers=workers)
    result = StiffnessMatrix.from_array(horizontal_average(strips, x))
    logger.info(
        f"Homogenized {layup!r} with A/lambda={wrinkle.ratio:.4g}: "
        f"C**11={result[0, 0]:.6g} GPa ({disc.n_strips} strips, {disc.n_z_points} z-points)"
    )
    return result


def entrywise_change(a: VoigtMatrix | np.ndarray, b: VoigtMatrix | np.ndarray) -> float:
    """
    Largest |a_ij - b_ij| / |a_ij| over the entries of a that are not negligible.

    Entries below NEGLIGIBLE_ENTRY times the largest |a_ij| are zero up to
    round-off and take no part.
    """
    a, b = np.asarray(a), np.asarray(b)
    scale = np.abs(a)
    significant = scale > NEGLIGIBLE_ENTRY * scale.max()
    return float(np.max(np.abs(a - b)[significant] / scale[significant]))


def frobenius_change(a: VoigtMatrix | np.ndarray, b: VoigtMatrix | np.ndarray) -> float:
    """||a - b||_F / ||a||_F."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(a))


def check_convergence(
    layup: Layup,
    wrinkle: WrinkleDescriptor,
    disc: Discretization = Discretization(),
    tolerance: float = 1e-3,
    workers: Optional[int] = None,
    coarse_result: Optional[StiffnessMatrix] = None,
) -> ConvergenceReport:
    """Compare [C**] against a run with doubled strips and z-points."""
    coarse = coarse_result or homogenize_wrinkle(layup, wrinkle, disc, workers=workers)
    fine_disc = disc.refined()
    fine = homogenize_wrinkle(layup, wrinkle, fine_disc, workers=workers)
    report = ConvergenceReport(
        coarse=disc,
        fine=fine_disc,
        max_entry_change=entrywise_change(fine, coarse),
        frobenius_change=frobenius_change(fine, coarse),
        tolerance=tolerance,
    )
    if not report.converged:
        logger.warning(
            f"Homogenization not converged: doubling the discretization changed C** entries by up to "
            f"{report.max_entry_change:.3e} (Frobenius {report.frobenius_change:.3e}, tolerance {tolerance:.1e})"
        )
    return report


def oracle_fine_average(
    layup: Layup,
    wrinkle: WrinkleDescriptor,
    n_strips: int = 4096,
    n_z_points: int = 16,
    workers: Optional[int] = None,
) -> StiffnessMatrix:
    """Reference [C**] at a very fine discretization, for fixtures and tests."""
    if n_strips < 4096 or n_z_points < 16:
        raise ConfigError("the reference run needs >= 4096 strips and >= 16 z-points")
    return homogenize_wrinkle(layup, wrinkle, Discretization(n_strips, n_z_points), workers=workers)
