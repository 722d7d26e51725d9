"""Forward-process noise schedule and noising transform."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear variance schedule with cached survival products."""

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def steps(self) -> int:
        return self.beta.size

    def abar(self, t) -> np.ndarray:
        """Cumulative signal coefficient at timestep t (1-based)."""
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.steps):
            raise ValueError(f"timestep out of range [1, {self.steps}]")
        return self.alpha_bar[t - 1]


def make_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear beta interpolation inclusive of both endpoints."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=np.cumprod(alpha))


def forward_noise(s: NoiseSchedule, z0, t, eps):
    """Noisy latent: sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps.

    Vectorizes over a leading batch axis when t is an array.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    ab = s.abar(t)
    if np.ndim(t) == 0:
        return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps
    return np.sqrt(ab)[:, None] * z0 + np.sqrt(1.0 - ab)[:, None] * eps
