"""Photometric losses, SSIM, and the lightweight parameter regularizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvalidInputError
from .gaussians import FrameGradients, GaussianFrame
from .render import ImageBuffer, rasterize, rasterize_backward

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


@dataclass
class LossConfig:
    photometric: str = "charbonnier"  # "l1" | "charbonnier"
    ssim_weight: float = 0.2
    lambda_reg: float = 1e-7
    charbonnier_eps: float = 1e-3

    def __post_init__(self):
        if self.photometric not in ("l1", "charbonnier"):
            raise InvalidInputError(f"unknown photometric loss {self.photometric!r}")
        if self.ssim_weight < 0 or self.lambda_reg < 0 or self.charbonnier_eps <= 0:
            raise InvalidInputError("loss weights must be non-negative, eps positive")


def _pixels(img) -> np.ndarray:
    if isinstance(img, ImageBuffer):
        return img.pixels
    return np.asarray(img, dtype=float)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_channel(x: np.ndarray, y: np.ndarray, w: np.ndarray,
                  want_grad: bool):
    """Single-channel SSIM over valid window positions; optional d/dx."""
    corr = lambda img: fftconvolve(img, w, mode="valid")
    ux = corr(x)
    uy = corr(y)
    x2 = corr(x * x)
    y2 = corr(y * y)
    xy = corr(x * y)
    sx2 = x2 - ux * ux
    sy2 = y2 - uy * uy
    sxy = xy - ux * uy
    A1 = 2.0 * ux * uy + SSIM_C1
    A2 = 2.0 * sxy + SSIM_C2
    B1 = ux * ux + uy * uy + SSIM_C1
    B2 = sx2 + sy2 + SSIM_C2
    S = (A1 * A2) / (B1 * B2)
    if not want_grad:
        return S, None
    inv = 1.0 / (B1 * B2)
    dA1 = A2 * inv
    dA2 = A1 * inv
    dB1 = -S / B1
    dB2 = -S / B2
    g_ux = 2.0 * uy * dA1 + 2.0 * ux * dB1 - 2.0 * uy * dA2 - 2.0 * ux * dB2
    g_x2 = dB2
    g_xy = 2.0 * dA2
    full = lambda m: fftconvolve(m, w, mode="full")
    dS_dx = full(g_ux) + full(g_x2) * 2.0 * x + full(g_xy) * y
    return S, dS_dx


def ssim(pred, gt) -> float:
    """Single-scale SSIM (11x11 Gaussian window, sigma 1.5), channel-averaged."""
    s, _ = ssim_with_grad(pred, gt, want_grad=False)
    return s


def ssim_with_grad(pred, gt, want_grad: bool = True):
    pred = _pixels(pred)
    gt = _pixels(gt)
    if pred.shape != gt.shape:
        raise InvalidInputError("image dimensions differ")
    if pred.ndim == 2:
        pred = pred[:, :, None]
        gt = gt[:, :, None]
    H, W, C = pred.shape
    if H < SSIM_WINDOW or W < SSIM_WINDOW:
        raise InvalidInputError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    w = _gaussian_window()
    total = 0.0
    grad = np.zeros_like(pred) if want_grad else None
    n_win = (H - SSIM_WINDOW + 1) * (W - SSIM_WINDOW + 1)
    for c in range(C):
        S, dS = _ssim_channel(pred[:, :, c], gt[:, :, c], w, want_grad)
        total += S.mean()
        if want_grad:
            grad[:, :, c] = dS / n_win
    if want_grad:
        grad /= C
    return total / C, grad


def photometric_loss(pred, gt, cfg: LossConfig):
    """Scalar image loss and its analytic gradient with respect to pred."""
    pred = _pixels(pred)
    gt = _pixels(gt)
    if pred.shape != gt.shape:
        raise InvalidInputError("image dimensions differ")
    r = pred - gt
    n = r.size
    if cfg.photometric == "l1":
        loss = np.abs(r).mean()
        grad = np.sign(r) / n
    else:
        root = np.sqrt(r * r + cfg.charbonnier_eps ** 2)
        loss = root.mean()
        grad = r / (root * n)
    if cfg.ssim_weight > 0:
        s, ds = ssim_with_grad(pred, gt)
        loss += cfg.ssim_weight * (1.0 - s)
        grad -= cfg.ssim_weight * ds
    return loss, grad


def regularizer(frame: GaussianFrame, lambda_reg: float):
    """lambda * sum_k(|s_k|^2 + alpha_k^2 + |b_k|^2) on constrained values.

    Gradients are with respect to the unconstrained parameters (log-scales,
    opacity logits, raw SH coefficients).
    """
    grads = FrameGradients.zeros_like(frame)
    if lambda_reg == 0:
        return 0.0, grads
    s = frame.scales()
    alpha = frame.opacities()
    value = float((s ** 2).sum() + (alpha ** 2).sum() + (frame.sh ** 2).sum())
    grads.log_s += lambda_reg * 2.0 * s ** 2
    grads.alpha_logit += lambda_reg * 2.0 * alpha ** 2 * (1.0 - alpha)
    grads.sh += lambda_reg * 2.0 * frame.sh
    return lambda_reg * value, grads


def total_loss(frame: GaussianFrame, cameras, gt_images, cfg: LossConfig):
    """Multi-view objective: sum of per-view image losses plus the regularizer."""
    if len(cameras) == 0 or len(cameras) != len(gt_images):
        raise InvalidInputError("cameras and ground-truth images must align and be nonempty")
    loss, grads = regularizer(frame, cfg.lambda_reg)
    for cam, gt in zip(cameras, gt_images):
        pred = rasterize(frame, cam)
        l, d_img = photometric_loss(pred.pixels, gt, cfg)
        loss += l
        grads.add_(rasterize_backward(frame, cam, d_img))
    return loss, grads
