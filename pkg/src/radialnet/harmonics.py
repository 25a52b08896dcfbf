"""Angular basis functions: 2D Fourier / half-integer modes and real
spherical harmonics in 3D.

The 3D harmonics are stored as monomial tables of the associated solid
harmonics (homogeneous harmonic polynomials), which gives exact values,
gradients, and Laplacian eigenvalues without special-function calls.
"""

from __future__ import annotations

import math

import numpy as np

# Real orthonormal spherical harmonics without the Condon-Shortley phase,
# written as solid harmonic polynomials p(x, y, z) with Y = p / r^l.
# Each entry: list of (coefficient, (ex, ey, ez)) monomials.
_SQ = math.sqrt
_PI = math.pi

SOLID_HARMONICS = {
    0: [
        [(0.5 * _SQ(1 / _PI), (0, 0, 0))],                      # l=0, m=0
    ],
    1: [
        [(_SQ(3 / (4 * _PI)), (0, 1, 0))],                      # m=-1 ~ y
        [(_SQ(3 / (4 * _PI)), (0, 0, 1))],                      # m=0  ~ z
        [(_SQ(3 / (4 * _PI)), (1, 0, 0))],                      # m=1  ~ x
    ],
    2: [
        [(_SQ(15 / (4 * _PI)), (1, 1, 0))],                     # m=-2 ~ xy
        [(_SQ(15 / (4 * _PI)), (0, 1, 1))],                     # m=-1 ~ yz
        [(2 * _SQ(5 / (16 * _PI)), (0, 0, 2)),                  # m=0  ~ 2z^2-x^2-y^2
         (-_SQ(5 / (16 * _PI)), (2, 0, 0)),
         (-_SQ(5 / (16 * _PI)), (0, 2, 0))],
        [(_SQ(15 / (4 * _PI)), (1, 0, 1))],                     # m=1  ~ xz
        [(_SQ(15 / (16 * _PI)), (2, 0, 0)),                     # m=2  ~ x^2-y^2
         (-_SQ(15 / (16 * _PI)), (0, 2, 0))],
    ],
    3: [
        [(3 * _SQ(35 / (32 * _PI)), (2, 1, 0)),                 # m=-3 ~ (3x^2-y^2)y
         (-_SQ(35 / (32 * _PI)), (0, 3, 0))],
        [(_SQ(105 / (4 * _PI)), (1, 1, 1))],                    # m=-2 ~ xyz
        [(_SQ(21 / (32 * _PI)) * 4, (0, 1, 2)),                 # m=-1 ~ y(4z^2-x^2-y^2)
         (-_SQ(21 / (32 * _PI)), (2, 1, 0)),
         (-_SQ(21 / (32 * _PI)), (0, 3, 0))],
        [(_SQ(7 / (16 * _PI)) * 2, (0, 0, 3)),                  # m=0  ~ z(2z^2-3x^2-3y^2)
         (-_SQ(7 / (16 * _PI)) * 3, (2, 0, 1)),
         (-_SQ(7 / (16 * _PI)) * 3, (0, 2, 1))],
        [(_SQ(21 / (32 * _PI)) * 4, (1, 0, 2)),                 # m=1  ~ x(4z^2-x^2-y^2)
         (-_SQ(21 / (32 * _PI)), (3, 0, 0)),
         (-_SQ(21 / (32 * _PI)), (1, 2, 0))],
        [(_SQ(105 / (16 * _PI)), (2, 0, 1)),                    # m=2  ~ z(x^2-y^2)
         (-_SQ(105 / (16 * _PI)), (0, 2, 1))],
        [(_SQ(35 / (32 * _PI)), (3, 0, 0)),                     # m=3  ~ x(x^2-3y^2)
         (-_SQ(35 / (32 * _PI)) * 3, (1, 2, 0))],
    ],
}

MAX_DEGREE = max(SOLID_HARMONICS)


def harmonic_index_table(l_max: int, include_l0: bool = False):
    """(l, m, monomials) triples in (l, m) order up to l_max."""
    if l_max > MAX_DEGREE:
        raise ValueError(f"spherical harmonics implemented up to degree {MAX_DEGREE}")
    out = []
    for ell in range(0 if include_l0 else 1, l_max + 1):
        for i, mono in enumerate(SOLID_HARMONICS[ell]):
            out.append((ell, i - ell, mono))
    return out


def _eval_monomials(mono, xyz):
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    val = np.zeros(xyz.shape[:-1])
    for c, (ex, ey, ez) in mono:
        val += c * x**ex * y**ey * z**ez
    return val


def _eval_monomial_grad(mono, xyz):
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    g = np.zeros(xyz.shape)
    for c, (ex, ey, ez) in mono:
        if ex:
            g[..., 0] += c * ex * x ** (ex - 1) * y**ey * z**ez
        if ey:
            g[..., 1] += c * ey * x**ex * y ** (ey - 1) * z**ez
        if ez:
            g[..., 2] += c * ez * x**ex * y**ey * z ** (ez - 1)
    return g


def solid_harmonic_values(l_max: int, xyz: np.ndarray):
    """Values of the solid harmonic polynomials (l >= 1) at xyz.

    Returns (degrees, values) where values has shape (N, n_ang) and
    n_ang = (l_max + 1)^2 - 1.
    """
    table = harmonic_index_table(l_max)
    vals = np.stack([_eval_monomials(m, xyz) for _, _, m in table], axis=-1)
    degrees = np.array([ell for ell, _, _ in table])
    return degrees, vals


def solid_harmonic_gradients(l_max: int, xyz: np.ndarray):
    """Gradients of the solid harmonic polynomials, shape (N, n_ang, 3)."""
    table = harmonic_index_table(l_max)
    return np.stack([_eval_monomial_grad(m, xyz) for _, _, m in table], axis=1)


def sh_basis_3d(l_max: int, unit_dir: np.ndarray) -> np.ndarray:
    """Real orthonormal spherical harmonics at unit directions.

    Index order is (0,0), (1,-1), (1,0), (1,1), (2,-2), ..., length
    (l_max + 1)^2. Directions must be unit vectors.
    """
    unit_dir = np.asarray(unit_dir, dtype=float)
    nrm = np.linalg.norm(unit_dir, axis=-1)
    if np.any(np.abs(nrm - 1.0) > 1e-9):
        raise ValueError("sh_basis_3d requires unit directions")
    table = harmonic_index_table(l_max, include_l0=True)
    return np.stack([_eval_monomials(m, unit_dir) for _, _, m in table], axis=-1)


def angular_basis_2d(m_max: int, half_integer: bool, n_max: int, theta) -> np.ndarray:
    """Cosine/sine angular modes at theta; half-integer crack modes appended.

    Integer block: cos(m t), sin(m t) for m = 1..m_max (the constant m=0 mode
    is purely radial and excluded). Half-integer block: cos((2n+1)t/2),
    sin((2n+1)t/2) for n = 0..n_max.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    cols = []
    for m in range(1, m_max + 1):
        cols.append(np.cos(m * theta))
        cols.append(np.sin(m * theta))
    if half_integer:
        for n in range(n_max + 1):
            f = (2 * n + 1) / 2.0
            cols.append(np.cos(f * theta))
            cols.append(np.sin(f * theta))
    return np.stack(cols, axis=-1)


def angular_basis_2d_dtheta(m_max: int, half_integer: bool, n_max: int, theta) -> np.ndarray:
    """d/dtheta of angular_basis_2d, same column order."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    cols = []
    for m in range(1, m_max + 1):
        cols.append(-m * np.sin(m * theta))
        cols.append(m * np.cos(m * theta))
    if half_integer:
        for n in range(n_max + 1):
            f = (2 * n + 1) / 2.0
            cols.append(-f * np.sin(f * theta))
            cols.append(f * np.cos(f * theta))
    return np.stack(cols, axis=-1)


def angular_eigenvalues_2d(m_max: int, half_integer: bool, n_max: int) -> np.ndarray:
    """E such that g'' = -E g for each angular mode."""
    eig = []
    for m in range(1, m_max + 1):
        eig += [float(m * m)] * 2
    if half_integer:
        for n in range(n_max + 1):
            f = (2 * n + 1) / 2.0
            eig += [f * f] * 2
    return np.array(eig)
