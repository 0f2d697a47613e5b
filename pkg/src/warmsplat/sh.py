"""Real spherical-harmonics basis (degrees 0..3) for view-dependent color.

Hardcoded polynomial basis in the convention common to splatting renderers;
`sh_basis_grad` returns analytic partials with respect to the direction,
needed by the rasterizer's backward pass.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

SH_C0 = 0.28209479177387814  # 1 / (2 sqrt(pi))
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)

MAX_SH_DEGREE = 3


def num_sh_coeffs(degree: int) -> int:
    return (degree + 1) ** 2


def sh_basis(degree: int, dirs: np.ndarray) -> np.ndarray:
    """Basis values Y_m(dir) for unit direction(s), shape (..., (L+1)^2)."""
    if not 0 <= degree <= MAX_SH_DEGREE:
        raise InvalidInputError(f"sh degree must be in [0, {MAX_SH_DEGREE}]")
    dirs = np.asarray(dirs, dtype=float)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    out = np.empty(dirs.shape[:-1] + (num_sh_coeffs(degree),))
    out[..., 0] = SH_C0
    if degree >= 1:
        out[..., 1] = -SH_C1 * y
        out[..., 2] = SH_C1 * z
        out[..., 3] = -SH_C1 * x
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        out[..., 4] = SH_C2[0] * x * y
        out[..., 5] = SH_C2[1] * y * z
        out[..., 6] = SH_C2[2] * (2 * zz - xx - yy)
        out[..., 7] = SH_C2[3] * x * z
        out[..., 8] = SH_C2[4] * (xx - yy)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        out[..., 9] = SH_C3[0] * y * (3 * xx - yy)
        out[..., 10] = SH_C3[1] * x * y * z
        out[..., 11] = SH_C3[2] * y * (4 * zz - xx - yy)
        out[..., 12] = SH_C3[3] * z * (2 * zz - 3 * xx - 3 * yy)
        out[..., 13] = SH_C3[4] * x * (4 * zz - xx - yy)
        out[..., 14] = SH_C3[5] * z * (xx - yy)
        out[..., 15] = SH_C3[6] * x * (xx - 3 * yy)
    return out


def sh_basis_grad(degree: int, dirs: np.ndarray) -> np.ndarray:
    """dY_m/d(dir), shape (..., (L+1)^2, 3)."""
    if not 0 <= degree <= MAX_SH_DEGREE:
        raise InvalidInputError(f"sh degree must be in [0, {MAX_SH_DEGREE}]")
    dirs = np.asarray(dirs, dtype=float)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    o = np.zeros_like(x)
    g = np.zeros(dirs.shape[:-1] + (num_sh_coeffs(degree), 3))
    if degree >= 1:
        g[..., 1, 1] = -SH_C1
        g[..., 2, 2] = SH_C1
        g[..., 3, 0] = -SH_C1
    if degree >= 2:
        g[..., 4, :] = SH_C2[0] * np.stack([y, x, o], -1)
        g[..., 5, :] = SH_C2[1] * np.stack([o, z, y], -1)
        g[..., 6, :] = SH_C2[2] * np.stack([-2 * x, -2 * y, 4 * z], -1)
        g[..., 7, :] = SH_C2[3] * np.stack([z, o, x], -1)
        g[..., 8, :] = SH_C2[4] * np.stack([2 * x, -2 * y, o], -1)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        g[..., 9, :] = SH_C3[0] * np.stack([6 * x * y, 3 * xx - 3 * yy, o], -1)
        g[..., 10, :] = SH_C3[1] * np.stack([y * z, x * z, x * y], -1)
        g[..., 11, :] = SH_C3[2] * np.stack(
            [-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z], -1)
        g[..., 12, :] = SH_C3[3] * np.stack(
            [-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy], -1)
        g[..., 13, :] = SH_C3[4] * np.stack(
            [4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z], -1)
        g[..., 14, :] = SH_C3[5] * np.stack([2 * x * z, -2 * y * z, xx - yy], -1)
        g[..., 15, :] = SH_C3[6] * np.stack([3 * xx - 3 * yy, -6 * x * y, o], -1)
    return g


def eval_sh(sh: np.ndarray, direction: np.ndarray, unit_tol: float = 1e-6) -> np.ndarray:
    """Raw (unclamped) RGB from SH coefficients, shape (B, 3), unit direction.

    The rasterizer clamps to [0, 1]; this raw value is what gradients chain
    through.
    """
    sh = np.asarray(sh, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if sh.ndim != 2 or sh.shape[1] != 3:
        raise InvalidInputError("sh coefficients must have shape (B, 3)")
    n_coeffs = sh.shape[0]
    degree = int(round(np.sqrt(n_coeffs))) - 1
    if num_sh_coeffs(degree) != n_coeffs or degree > MAX_SH_DEGREE:
        raise InvalidInputError(f"invalid SH coefficient count {n_coeffs}")
    if abs(np.linalg.norm(direction) - 1.0) > unit_tol:
        raise InvalidInputError("direction must be unit length")
    Y = sh_basis(degree, direction)
    return Y @ sh
