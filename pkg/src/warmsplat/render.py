"""Differentiable CPU rasterizer for Gaussian frames.

Forward: project every Gaussian to an elliptical screen-space footprint,
depth-sort globally (ties broken by index), and alpha-composite front-to-back
over a black background. Backward: exact analytic gradients of the composited
image with respect to every Gaussian parameter, replaying the forward
compositing order in reverse.

Compositing thresholds (hard zeros in both passes): per-pixel contributions
below 1/255 are skipped, a pixel stops accepting contributions once its
transmittance drops below 1e-4, and each splat only touches pixels within
3 sigma of its 2D mean.

The per-pixel compositing loops are JIT-compiled (sequential, no threading,
so results are bit-reproducible); the per-splat parameter chain rules are
batched numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InvalidInputError
from .gaussians import FrameGradients, GaussianFrame
from .geometry import (COV2D_DILATION, Z_NEAR, Camera, quat_to_rotmat,
                       quat_to_rotmat_jac)
from .sh import sh_basis, sh_basis_grad

ALPHA_THRESHOLD = 1.0 / 255.0
TRANSMITTANCE_FLOOR = 1e-4
MAX_ALPHA = 1.0 - 1e-4
CUTOFF_SIGMA = 3.0

# Gradients of the rendered image carry the same field layout as the frame.
RenderGradients = FrameGradients


@dataclass
class ImageBuffer:
    width: int
    height: int
    pixels: np.ndarray  # (H, W, 3) in [0, 1]


@dataclass
class DepthBuffer:
    width: int
    height: int
    depth: np.ndarray  # (H, W), 0 where nothing contributes


class _Prepared:
    """Vectorized per-splat projection state shared by forward and backward."""

    __slots__ = ("valid", "order", "alpha", "u", "conic", "radius", "depth",
                 "color", "color_raw", "x_cam", "J", "M", "Rq", "s2", "dirs",
                 "rho", "Y", "W", "x0", "x1", "y0", "y1")

    def __init__(self, frame: GaussianFrame, camera: Camera):
        intr = camera.intrinsics
        W = camera.pose.rotation
        self.W = W
        mu = frame.mu
        x_cam = mu @ W.T + camera.pose.translation
        depth = x_cam[:, 2]
        valid = depth > Z_NEAR
        self.x_cam = x_cam
        self.depth = depth
        self.valid = valid

        # Guard z for culled splats; they are never composited.
        z = np.where(valid, depth, 1.0)
        x, y = x_cam[:, 0], x_cam[:, 1]
        self.u = np.stack([intr.fx * x / z + intr.cx,
                           intr.fy * y / z + intr.cy], axis=1)
        o = np.zeros_like(z)
        self.J = np.stack([
            np.stack([intr.fx / z, o, -intr.fx * x / z ** 2], -1),
            np.stack([o, intr.fy / z, -intr.fy * y / z ** 2], -1),
        ], -2)

        self.Rq = quat_to_rotmat(frame.q)
        self.s2 = np.exp(2.0 * frame.log_s)
        Sigma = (self.Rq * self.s2[:, None, :]) @ np.swapaxes(self.Rq, 1, 2)
        self.M = W @ Sigma @ W.T
        cov2d = self.J @ self.M @ np.swapaxes(self.J, 1, 2)
        cov2d = cov2d + COV2D_DILATION * np.eye(2)
        a_, b_, c_ = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
        det = a_ * c_ - b_ * b_
        self.conic = np.stack([c_ / det, -b_ / det, a_ / det], axis=1)
        lam_max = 0.5 * (a_ + c_) + np.sqrt(np.maximum(
            0.25 * (a_ - c_) ** 2 + b_ * b_, 0.0))
        self.radius = CUTOFF_SIGMA * np.sqrt(lam_max)

        self.alpha = 1.0 / (1.0 + np.exp(-frame.alpha_logit))
        cam_center = camera.pose.camera_center()
        d = mu - cam_center
        rho = np.linalg.norm(d, axis=1)
        rho = np.where(rho > 0, rho, 1.0)
        self.rho = rho
        self.dirs = d / rho[:, None]
        self.Y = sh_basis(frame.sh_degree, self.dirs)
        self.color_raw = np.einsum("kb,kbc->kc", self.Y, frame.sh)
        self.color = np.clip(self.color_raw, 0.0, 1.0)

        idx = np.nonzero(valid)[0]
        # stable sort on depth: ties resolved by ascending Gaussian index
        self.order = idx[np.argsort(depth[idx], kind="stable")]

        # integer patch bounds of the 3-sigma footprint, clipped to the image
        r = self.radius
        self.x0 = np.maximum(0, np.ceil(self.u[:, 0] - r)).astype(np.int64)
        self.x1 = np.minimum(intr.width - 1,
                             np.floor(self.u[:, 0] + r)).astype(np.int64)
        self.y0 = np.maximum(0, np.ceil(self.u[:, 1] - r)).astype(np.int64)
        self.y1 = np.minimum(intr.height - 1,
                             np.floor(self.u[:, 1] + r)).astype(np.int64)


@njit(cache=True)
def _composite_forward(order, x0, x1, y0, y1, u, conic, alpha, color, depth,
                       H, W):
    image = np.zeros((H, W, 3))
    wsum = np.zeros((H, W))
    wdepth = np.zeros((H, W))
    T = np.ones((H, W))
    for oi in range(order.shape[0]):
        k = order[oi]
        if x0[k] > x1[k] or y0[k] > y1[k]:
            continue
        A, B, C = conic[k, 0], conic[k, 1], conic[k, 2]
        al = alpha[k]
        for py in range(y0[k], y1[k] + 1):
            dy = py - u[k, 1]
            for px in range(x0[k], x1[k] + 1):
                Tb = T[py, px]
                if Tb <= TRANSMITTANCE_FLOOR:
                    continue
                dx = px - u[k, 0]
                a = al * np.exp(-0.5 * (A * dx * dx + 2.0 * B * dx * dy
                                        + C * dy * dy))
                if a > MAX_ALPHA:
                    a = MAX_ALPHA
                if a < ALPHA_THRESHOLD:
                    continue
                w = Tb * a
                image[py, px, 0] += w * color[k, 0]
                image[py, px, 1] += w * color[k, 1]
                image[py, px, 2] += w * color[k, 2]
                wsum[py, px] += w
                wdepth[py, px] += w * depth[k]
                T[py, px] = Tb * (1.0 - a)
    return image, wsum, wdepth


@njit(cache=True)
def _composite_backward(order, x0, x1, y0, y1, u, conic, alpha, color, gout,
                        H, W, K):
    """Reverse replay of the compositing chain.

    Pass 1 re-runs the forward order and stores each splat's pre-update
    transmittance patch; pass 2 walks the splats back-to-front, maintaining
    the color accumulated behind each one, and reduces the per-pixel chain
    terms to eight scalars per splat:

        grad_c (3)      d loss / d clipped color
        sum_eff_G       d loss / d alpha, divided by alpha
        Sxx, Sxy, Syy   quadratic moments of d loss / d power
        Su_x, Su_y      first moments (conic-weighted -> d loss / d mean)
    """
    n = order.shape[0]
    sizes = np.zeros(n + 1, dtype=np.int64)
    for oi in range(n):
        k = order[oi]
        w_k = x1[k] - x0[k] + 1
        h_k = y1[k] - y0[k] + 1
        sizes[oi + 1] = sizes[oi] + (w_k * h_k if w_k > 0 and h_k > 0 else 0)
    Tb_buf = np.empty(sizes[n])

    T = np.ones((H, W))
    for oi in range(n):
        k = order[oi]
        if x0[k] > x1[k] or y0[k] > y1[k]:
            continue
        A, B, C = conic[k, 0], conic[k, 1], conic[k, 2]
        al = alpha[k]
        base = sizes[oi]
        row_w = x1[k] - x0[k] + 1
        for py in range(y0[k], y1[k] + 1):
            dy = py - u[k, 1]
            off = base + (py - y0[k]) * row_w - x0[k]
            for px in range(x0[k], x1[k] + 1):
                Tb = T[py, px]
                Tb_buf[off + px] = Tb
                if Tb <= TRANSMITTANCE_FLOOR:
                    continue
                dx = px - u[k, 0]
                a = al * np.exp(-0.5 * (A * dx * dx + 2.0 * B * dx * dy
                                        + C * dy * dy))
                if a > MAX_ALPHA:
                    a = MAX_ALPHA
                if a < ALPHA_THRESHOLD:
                    continue
                T[py, px] = Tb * (1.0 - a)

    grad_c = np.zeros((K, 3))
    sum_eff_G = np.zeros(K)
    Sq = np.zeros((K, 3))  # Sxx, Sxy, Syy
    Su = np.zeros((K, 2))
    behind = np.zeros((H, W, 3))
    for oi in range(n - 1, -1, -1):
        k = order[oi]
        if x0[k] > x1[k] or y0[k] > y1[k]:
            continue
        A, B, C = conic[k, 0], conic[k, 1], conic[k, 2]
        al = alpha[k]
        c0, c1, c2 = color[k, 0], color[k, 1], color[k, 2]
        base = sizes[oi]
        row_w = x1[k] - x0[k] + 1
        for py in range(y0[k], y1[k] + 1):
            dy = py - u[k, 1]
            off = base + (py - y0[k]) * row_w - x0[k]
            for px in range(x0[k], x1[k] + 1):
                Tb = Tb_buf[off + px]
                if Tb <= TRANSMITTANCE_FLOOR:
                    continue
                dx = px - u[k, 0]
                G = np.exp(-0.5 * (A * dx * dx + 2.0 * B * dx * dy
                                   + C * dy * dy))
                a_raw = al * G
                a = a_raw
                capped = a_raw > MAX_ALPHA
                if capped:
                    a = MAX_ALPHA
                if a < ALPHA_THRESHOLD:
                    continue
                w = Tb * a
                g0 = gout[py, px, 0]
                g1 = gout[py, px, 1]
                g2 = gout[py, px, 2]
                grad_c[k, 0] += w * g0
                grad_c[k, 1] += w * g1
                grad_c[k, 2] += w * g2
                inv = 1.0 / (1.0 - a)
                grad_a = (g0 * (Tb * c0 - behind[py, px, 0] * inv)
                          + g1 * (Tb * c1 - behind[py, px, 1] * inv)
                          + g2 * (Tb * c2 - behind[py, px, 2] * inv))
                behind[py, px, 0] += w * c0
                behind[py, px, 1] += w * c1
                behind[py, px, 2] += w * c2
                if capped:
                    continue  # min() cap: zero slope past it
                sum_eff_G[k] += grad_a * G
                gp = grad_a * al * G  # d loss / d power
                Sq[k, 0] += gp * dx * dx
                Sq[k, 1] += gp * dx * dy
                Sq[k, 2] += gp * dy * dy
                Su[k, 0] += gp * dx
                Su[k, 1] += gp * dy
    return grad_c, sum_eff_G, Sq, Su


def _forward(frame: GaussianFrame, camera: Camera):
    intr = camera.intrinsics
    prep = _Prepared(frame, camera)
    image, wsum, wdepth = _composite_forward(
        prep.order, prep.x0, prep.x1, prep.y0, prep.y1, prep.u, prep.conic,
        prep.alpha, prep.color, prep.depth, intr.height, intr.width)
    np.clip(image, 0.0, 1.0, out=image)
    return image, wsum, wdepth, prep


def rasterize(frame: GaussianFrame, camera: Camera) -> ImageBuffer:
    """Render the frame through the camera over a black background."""
    if frame.size == 0:
        raise InvalidInputError("frame has no Gaussians")
    image, _, _, _ = _forward(frame, camera)
    return ImageBuffer(camera.intrinsics.width, camera.intrinsics.height, image)


def rasterize_with_depth(frame: GaussianFrame, camera: Camera):
    """Render image plus alpha-weighted expected depth per pixel."""
    if frame.size == 0:
        raise InvalidInputError("frame has no Gaussians")
    image, wsum, wdepth, _ = _forward(frame, camera)
    depth = np.where(wsum > 1e-6, wdepth / np.maximum(wsum, 1e-30), 0.0)
    intr = camera.intrinsics
    return (ImageBuffer(intr.width, intr.height, image),
            DepthBuffer(intr.width, intr.height, depth))


def rasterize_backward(frame: GaussianFrame, camera: Camera,
                       d_loss_d_image: np.ndarray) -> RenderGradients:
    """Analytic gradients of sum(d_loss_d_image * rendered_image).

    Culled and skipped contributions receive exactly zero gradient, matching
    the forward thresholds.
    """
    intr = camera.intrinsics
    d_loss_d_image = np.ascontiguousarray(d_loss_d_image, dtype=float)
    if d_loss_d_image.shape != (intr.height, intr.width, 3):
        raise InvalidInputError("d_loss_d_image shape does not match the camera")
    if not np.isfinite(d_loss_d_image).all():
        raise InvalidInputError("d_loss_d_image contains non-finite values")

    grads = FrameGradients.zeros_like(frame)
    K = frame.size
    if K == 0:
        return grads
    prep = _Prepared(frame, camera)
    if prep.order.size == 0:
        return grads
    grad_c, sum_eff_G, Sq, Su = _composite_backward(
        prep.order, prep.x0, prep.x1, prep.y0, prep.y1, prep.u, prep.conic,
        prep.alpha, prep.color, d_loss_d_image, intr.height, intr.width, K)

    alpha = prep.alpha
    grads.alpha_logit += sum_eff_G * alpha * (1.0 - alpha)

    # conic quadratic form: power = -0.5 d^T Con d, d = p - u
    A, B, C = prep.conic[:, 0], prep.conic[:, 1], prep.conic[:, 2]
    grad_u = np.stack([A * Su[:, 0] + B * Su[:, 1],
                       B * Su[:, 0] + C * Su[:, 1]], axis=1)
    Gcon = -0.5 * np.stack([
        np.stack([Sq[:, 0], Sq[:, 1]], -1),
        np.stack([Sq[:, 1], Sq[:, 2]], -1),
    ], -2)
    Con = np.stack([np.stack([A, B], -1), np.stack([B, C], -1)], -2)
    Gcov2d = -Con @ Gcon @ Con

    J = prep.J
    M = prep.M
    Wc = prep.W
    GJ = 2.0 * Gcov2d @ J @ M
    GM = np.swapaxes(J, 1, 2) @ Gcov2d @ J
    GSigma = Wc.T @ GM @ Wc

    Rq = prep.Rq
    s2 = prep.s2
    GRq = 2.0 * GSigma @ (Rq * s2[:, None, :])
    dR_dq = quat_to_rotmat_jac(frame.q)  # (K, 4, 3, 3)
    grads.q += np.einsum("kqij,kij->kq", dR_dq, GRq)
    GD = np.einsum("kij,kil,klj->kj", Rq, GSigma, Rq)  # diag(Rq^T GSigma Rq)
    grads.log_s += GD * 2.0 * s2

    # mean: projection path + Jacobian dependence on x_cam
    fx, fy = intr.fx, intr.fy
    xc = prep.x_cam
    z = np.where(prep.valid, prep.depth, 1.0)
    grad_xcam = np.einsum("kji,kj->ki", J, grad_u)
    grad_xcam[:, 0] += GJ[:, 0, 2] * (-fx / z ** 2)
    grad_xcam[:, 1] += GJ[:, 1, 2] * (-fy / z ** 2)
    grad_xcam[:, 2] += (GJ[:, 0, 0] * (-fx / z ** 2)
                        + GJ[:, 1, 1] * (-fy / z ** 2)
                        + GJ[:, 0, 2] * (2.0 * fx * xc[:, 0] / z ** 3)
                        + GJ[:, 1, 2] * (2.0 * fy * xc[:, 1] / z ** 3))
    grads.mu += grad_xcam @ Wc

    # color path: clamp to [0,1], SH coefficients, and view direction
    craw = prep.color_raw
    grad_craw = grad_c * ((craw > 0.0) & (craw < 1.0))
    grads.sh += prep.Y[:, :, None] * grad_craw[:, None, :]
    dY = sh_basis_grad(frame.sh_degree, prep.dirs)  # (K, B, 3)
    grad_dir = np.einsum("kbd,kbc,kc->kd", dY, frame.sh, grad_craw)
    d_unit = prep.dirs
    proj = grad_dir - d_unit * np.einsum("kd,kd->k", d_unit, grad_dir)[:, None]
    grads.mu += proj / prep.rho[:, None]

    return grads
