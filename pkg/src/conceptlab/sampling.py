"""Ancestral reverse-process sampling."""

from __future__ import annotations

import numpy as np

from .denoiser import Denoiser, denoise_predict, forward
from .errors import NumericFailure
from .nets import time_embedding
from .rng import SeededRng
from .schedule import NoiseSchedule


def ddpm_sample(d: Denoiser, s: NoiseSchedule, cond, rng: SeededRng):
    """One ancestral trajectory from pure noise to a clean latent.

    Returns (z0, trajectory) where trajectory[k] is the state at timestep
    T-k (so trajectory[0] is the initial noise and trajectory[T] is z0).
    """
    cond = np.asarray(cond, dtype=np.float64)
    z = rng.normal((2,))
    traj = [z.copy()]
    for t in range(s.steps, 0, -1):
        eps_hat = denoise_predict(d, z, t, cond)
        a_t = s.alpha[t - 1]
        ab_t = s.alpha_bar[t - 1]
        mean = (z - ((1.0 - a_t) / np.sqrt(1.0 - ab_t)) * eps_hat) / np.sqrt(a_t)
        if t > 1:
            z = mean + np.sqrt(s.beta[t - 1]) * rng.normal((2,))
        else:
            z = mean
        if not np.all(np.isfinite(z)):
            raise NumericFailure("sampler state became non-finite", step=t)
        traj.append(z.copy())
    return z, traj


def sample_many(d: Denoiser, s: NoiseSchedule, cond, n: int, rng: SeededRng) -> np.ndarray:
    """n trajectories batched through the network.

    Draw i consumes the stream rng.child(i) in the same order as
    ddpm_sample, so per-draw noise matches the sequential sampler; only
    BLAS reduction order differs.
    """
    cond = np.asarray(cond, dtype=np.float64)
    gens = [rng.child(i) for i in range(n)]
    z = np.stack([g.normal((2,)) for g in gens])
    cb = np.broadcast_to(cond, (n, cond.shape[-1]))
    for t in range(s.steps, 0, -1):
        temb = time_embedding(np.full(n, float(t)), d.time_embed_dim)
        eps_hat = forward(d, d.params.values, z, temb, cb)
        a_t = s.alpha[t - 1]
        ab_t = s.alpha_bar[t - 1]
        mean = (z - ((1.0 - a_t) / np.sqrt(1.0 - ab_t)) * eps_hat) / np.sqrt(a_t)
        if t > 1:
            xi = np.stack([g.normal((2,)) for g in gens])
            z = mean + np.sqrt(s.beta[t - 1]) * xi
        else:
            z = mean
        if not np.all(np.isfinite(z)):
            raise NumericFailure("sampler state became non-finite", step=t)
    return z
