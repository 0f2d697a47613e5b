"""Cameras, quaternions, covariance assembly, and perspective projection.

Conventions: OpenCV/COLMAP world-to-camera (x_cam = R @ x_world + t, camera
looks down +z), top-left image origin, quaternions stored (w, x, y, z).
All functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

Z_NEAR = 0.01
COV2D_DILATION = 0.3  # px^2 added to both diagonal entries of the 2D covariance


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidInputError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidInputError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])


@dataclass(frozen=True)
class CameraPose:
    rotation: np.ndarray  # 3x3 world-to-camera
    translation: np.ndarray  # 3-vector, camera frame

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise InvalidInputError("rotation must be 3x3")
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise InvalidInputError("rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def camera_center(self) -> np.ndarray:
        """Camera center in world coordinates (-R^T t)."""
        return -self.rotation.T @ self.translation

    def inverse(self) -> "CameraPose":
        return CameraPose(self.rotation.T, -self.rotation.T @ self.translation)

    def matrix4(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M


@dataclass(frozen=True)
class Camera:
    name: str
    intrinsics: CameraIntrinsics
    pose: CameraPose


def normalize_quaternion(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise InvalidInputError("zero quaternion cannot be normalized")
    return q / n


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Rotation matrix from quaternion(s) (w, x, y, z), batched over leading dims.

    Uses the unit-quaternion polynomial form; callers pass (near-)unit
    quaternions and gradients are taken of this exact expression.
    """
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def quat_to_rotmat_jac(q: np.ndarray) -> np.ndarray:
    """d(quat_to_rotmat)/dq, shape (..., 4, 3, 3)."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    o = np.zeros_like(w)
    J = np.empty(q.shape[:-1] + (4, 3, 3))
    J[..., 0, :, :] = 2 * np.stack([
        np.stack([o, -z, y], -1),
        np.stack([z, o, -x], -1),
        np.stack([-y, x, o], -1),
    ], -2)
    J[..., 1, :, :] = 2 * np.stack([
        np.stack([o, y, z], -1),
        np.stack([y, -2 * x, -w], -1),
        np.stack([z, w, -2 * x], -1),
    ], -2)
    J[..., 2, :, :] = 2 * np.stack([
        np.stack([-2 * y, x, w], -1),
        np.stack([x, o, z], -1),
        np.stack([-w, z, -2 * y], -1),
    ], -2)
    J[..., 3, :, :] = 2 * np.stack([
        np.stack([-2 * z, -w, x], -1),
        np.stack([w, -2 * z, y], -1),
        np.stack([x, y, o], -1),
    ], -2)
    return J


def rotmat_to_quat(R: np.ndarray) -> np.ndarray:
    """Quaternion (w, x, y, z) from a rotation matrix, w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = 0.5 / np.sqrt(tr + 1.0)
        q = np.array([0.25 / s, (R[2, 1] - R[1, 2]) * s,
                      (R[0, 2] - R[2, 0]) * s, (R[1, 0] - R[0, 1]) * s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s,
                      (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s,
                      0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def build_covariance(q: np.ndarray, s: np.ndarray, unit_tol: float | None = 1e-6) -> np.ndarray:
    """3x3 covariance R(q) diag(s^2) R(q)^T. Batched over leading dims.

    unit_tol=None skips the unit-quaternion check (internal render path, where
    quaternions may drift slightly off the sphere between normalizations).
    """
    q = np.asarray(q, dtype=float)
    s = np.asarray(s, dtype=float)
    if unit_tol is not None:
        n = np.linalg.norm(q, axis=-1)
        if np.any(np.abs(n - 1.0) > unit_tol):
            raise InvalidInputError("quaternion is not unit-norm within tolerance")
        if np.any(s <= 0):
            raise InvalidInputError("scales must be positive")
    R = quat_to_rotmat(q)
    RS = R * (s[..., None, :] ** 2)
    return RS @ np.swapaxes(R, -1, -2)


def world_to_camera(pose: CameraPose, mu: np.ndarray) -> np.ndarray:
    """Map world point(s) into the camera frame."""
    mu = np.asarray(mu, dtype=float)
    return mu @ pose.rotation.T + pose.translation


def project(intr: CameraIntrinsics, x_cam: np.ndarray, z_near: float = Z_NEAR) -> np.ndarray:
    """Perspective projection of camera-frame point(s) to pixel coordinates."""
    x_cam = np.asarray(x_cam, dtype=float)
    z = x_cam[..., 2]
    if np.any(z <= z_near):
        raise InvalidInputError("point is behind the near plane")
    return np.stack([
        intr.fx * x_cam[..., 0] / z + intr.cx,
        intr.fy * x_cam[..., 1] / z + intr.cy,
    ], axis=-1)


def projection_jacobian(intr: CameraIntrinsics, x_cam: np.ndarray,
                        z_near: float = Z_NEAR) -> np.ndarray:
    """2x3 Jacobian of `project` at x_cam, batched over leading dims."""
    x_cam = np.asarray(x_cam, dtype=float)
    x, y, z = x_cam[..., 0], x_cam[..., 1], x_cam[..., 2]
    if np.any(z <= z_near):
        raise InvalidInputError("point is behind the near plane")
    o = np.zeros_like(z)
    J = np.stack([
        np.stack([intr.fx / z, o, -intr.fx * x / z ** 2], -1),
        np.stack([o, intr.fy / z, -intr.fy * y / z ** 2], -1),
    ], -2)
    return J


def project_covariance(J: np.ndarray, R: np.ndarray, Sigma: np.ndarray,
                       dilation: float = COV2D_DILATION) -> np.ndarray:
    """Screen-space 2x2 covariance J (R Sigma R^T) J^T + dilation * I."""
    J = np.asarray(J, dtype=float)
    R = np.asarray(R, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    M = R @ Sigma @ np.swapaxes(R, -1, -2)
    cov = J @ M @ np.swapaxes(J, -1, -2)
    return cov + dilation * np.eye(2)


def look_at_pose(position: np.ndarray, target: np.ndarray,
                 up: np.ndarray | None = None) -> CameraPose:
    """World-to-camera pose for a camera at `position` looking at `target`.

    Camera looks down +z (OpenCV). World up defaults to +z; when the viewing
    direction is (anti)parallel to up, +x is used as fallback.
    """
    position = np.asarray(position, dtype=float)
    target = np.asarray(target, dtype=float)
    forward = target - position
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise InvalidInputError("camera position coincides with look-at target")
    forward = forward / n
    up = np.array([0.0, 0.0, 1.0]) if up is None else np.asarray(up, dtype=float)
    if np.linalg.norm(np.cross(forward, up)) < 1e-9:
        up = np.array([1.0, 0.0, 0.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.stack([right, down, forward], axis=0)
    if np.linalg.det(R) < 0:
        R[1] = -R[1]
    return CameraPose(R, -R @ position)
