"""Fixed-size Gaussian frame container (structure-of-arrays)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .sh import num_sh_coeffs

# Parameter groups, in serialization order.
PARAM_GROUPS = ("mu", "q", "log_s", "alpha_logit", "sh")


def floats_per_gaussian(sh_degree: int) -> int:
    """Serialized float count per Gaussian: 3 + 4 + 3 + 1 + 3*(L+1)^2."""
    return 11 + 3 * num_sh_coeffs(sh_degree)


@dataclass
class Gaussian:
    """Single-splat view; convenience only, the frame stores arrays."""
    mu: np.ndarray
    q: np.ndarray
    log_s: np.ndarray
    alpha_logit: float
    sh: np.ndarray


@dataclass
class GaussianFrame:
    """All parameters of the K Gaussians at one time step."""
    t: int
    mu: np.ndarray           # (K, 3)
    q: np.ndarray            # (K, 4) unit quaternions (w, x, y, z)
    log_s: np.ndarray        # (K, 3)
    alpha_logit: np.ndarray  # (K,)
    sh: np.ndarray           # (K, (L+1)^2, 3)
    sh_degree: int

    def __post_init__(self):
        self.mu = np.ascontiguousarray(self.mu, dtype=float)
        self.q = np.ascontiguousarray(self.q, dtype=float)
        self.log_s = np.ascontiguousarray(self.log_s, dtype=float)
        self.alpha_logit = np.ascontiguousarray(self.alpha_logit, dtype=float)
        self.sh = np.ascontiguousarray(self.sh, dtype=float)
        K = self.mu.shape[0]
        B = num_sh_coeffs(self.sh_degree)
        if self.mu.shape != (K, 3) or self.q.shape != (K, 4) \
                or self.log_s.shape != (K, 3) or self.alpha_logit.shape != (K,) \
                or self.sh.shape != (K, B, 3):
            raise InvalidInputError("inconsistent Gaussian frame array shapes")

    @property
    def size(self) -> int:
        return self.mu.shape[0]

    def gaussian(self, k: int) -> Gaussian:
        return Gaussian(self.mu[k], self.q[k], self.log_s[k],
                        float(self.alpha_logit[k]), self.sh[k])

    def scales(self) -> np.ndarray:
        return np.exp(self.log_s)

    def opacities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.alpha_logit))

    def copy(self, t: int | None = None) -> "GaussianFrame":
        return GaussianFrame(self.t if t is None else t, self.mu.copy(),
                             self.q.copy(), self.log_s.copy(),
                             self.alpha_logit.copy(), self.sh.copy(),
                             self.sh_degree)

    def to_flat(self) -> np.ndarray:
        """(K, floats_per_gaussian) row per Gaussian, serialization order."""
        K = self.size
        return np.concatenate([
            self.mu, self.q, self.log_s,
            self.alpha_logit[:, None],
            self.sh.reshape(K, -1),
        ], axis=1)

    @classmethod
    def from_flat(cls, t: int, flat: np.ndarray, sh_degree: int) -> "GaussianFrame":
        flat = np.asarray(flat, dtype=float)
        B = num_sh_coeffs(sh_degree)
        if flat.ndim != 2 or flat.shape[1] != floats_per_gaussian(sh_degree):
            raise InvalidInputError("flat frame has wrong width for sh_degree")
        K = flat.shape[0]
        return cls(t, flat[:, 0:3], flat[:, 3:7], flat[:, 7:10], flat[:, 10],
                   flat[:, 11:].reshape(K, B, 3), sh_degree)


@dataclass
class FrameGradients:
    """Per-parameter partials of a scalar loss, shapes mirroring a frame."""
    mu: np.ndarray
    q: np.ndarray
    log_s: np.ndarray
    alpha_logit: np.ndarray
    sh: np.ndarray

    @classmethod
    def zeros_like(cls, frame: GaussianFrame) -> "FrameGradients":
        return cls(np.zeros_like(frame.mu), np.zeros_like(frame.q),
                   np.zeros_like(frame.log_s), np.zeros_like(frame.alpha_logit),
                   np.zeros_like(frame.sh))

    def add_(self, other: "FrameGradients") -> "FrameGradients":
        self.mu += other.mu
        self.q += other.q
        self.log_s += other.log_s
        self.alpha_logit += other.alpha_logit
        self.sh += other.sh
        return self

    def all_finite(self) -> bool:
        return all(np.isfinite(getattr(self, g)).all() for g in PARAM_GROUPS)
