"""
Voigt transformation matrices and the two-stage ply stiffness rotation.

T_theta rotates about z (in-plane fiber angle), T_phi rotates in the x-z
plane (out-of-plane misalignment). Both are stress transformations: for a
frame whose first axis is the fiber direction, sigma_local = T sigma_global.
With engineering shear strains the global stiffness is

    [C] = [T]^-1 [C_local] [T]^-T

and T(angle)^-1 = T(-angle). The fiber direction after both stages is
(cos theta cos phi, sin theta, cos theta sin phi).
"""

import numpy as np
from numpy.typing import ArrayLike

from wrinkle_ndt.core.laminate import StiffnessMatrix, VoigtMatrix


def t_theta(theta: ArrayLike) -> np.ndarray:
    """In-plane transformation matrix; batched over the shape of theta."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    t = np.zeros(theta.shape + (6, 6))
    t[..., 0, 0] = c * c
    t[..., 0, 1] = s * s
    t[..., 0, 5] = 2.0 * s * c
    t[..., 1, 0] = s * s
    t[..., 1, 1] = c * c
    t[..., 1, 5] = -2.0 * s * c
    t[..., 2, 2] = 1.0
    t[..., 3, 3] = c
    t[..., 3, 4] = -s
    t[..., 4, 3] = s
    t[..., 4, 4] = c
    t[..., 5, 0] = -s * c
    t[..., 5, 1] = s * c
    t[..., 5, 5] = c * c - s * s
    return t


def t_phi(phi: ArrayLike) -> np.ndarray:
    """Out-of-plane (x-z) transformation matrix; batched over the shape of phi."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    t = np.zeros(phi.shape + (6, 6))
    t[..., 0, 0] = c * c
    t[..., 0, 2] = s * s
    t[..., 0, 4] = 2.0 * s * c
    t[..., 1, 1] = 1.0
    t[..., 2, 0] = s * s
    t[..., 2, 2] = c * c
    t[..., 2, 4] = -2.0 * s * c
    t[..., 3, 3] = c
    t[..., 3, 5] = -s
    t[..., 4, 0] = -s * c
    t[..., 4, 2] = s * c
    t[..., 4, 4] = c * c - s * s
    t[..., 5, 3] = s
    t[..., 5, 5] = c
    return t


def _transform(c: np.ndarray, t_inverse: np.ndarray) -> np.ndarray:
    """T^-1 C T^-T for (possibly batched) T^-1."""
    return t_inverse @ c @ np.swapaxes(t_inverse, -1, -2)


def rotate_theta(cbar: ArrayLike, theta: float) -> np.ndarray:
    """First stage: principal-axis stiffness to the laminate frame."""
    return _transform(np.asarray(cbar, dtype=float), t_theta(-theta))


def rotate_phi_batch(ctilde: ArrayLike, phi: ArrayLike) -> np.ndarray:
    """Second stage for many misalignment angles at once; returns shape phi.shape + (6, 6)."""
    rotated = _transform(np.asarray(ctilde, dtype=float), t_phi(-np.asarray(phi, dtype=float)))
    return 0.5 * (rotated + np.swapaxes(rotated, -1, -2))


def rotate_stiffness(cbar: VoigtMatrix, theta: float, phi: float) -> StiffnessMatrix:
    """
    Rotate a principal-axis stiffness by theta about z, then by phi in the x-z plane.

    Args:
        cbar: Stiffness in the ply principal axes (GPa)
        theta: In-plane fiber angle (radians)
        phi: Out-of-plane misalignment angle (radians)

    Returns:
        Stiffness in the laminate frame
    """
    if theta == 0.0 and phi == 0.0:
        return cbar if isinstance(cbar, StiffnessMatrix) else StiffnessMatrix(np.asarray(cbar))
    ctilde = rotate_theta(cbar, theta)
    return StiffnessMatrix.from_array(rotate_phi_batch(ctilde, phi))
