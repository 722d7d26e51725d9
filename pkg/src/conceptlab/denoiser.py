"""The conditional noise predictor.

The condition-embedding table is carried as a parameter segment of the
model itself, seeded from the world's table. Base training updates it;
every later phase conditions on frozen rows, so the table never drifts
after pretraining.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .nets import init_mlp_values, mlp_forward, mlp_layout, time_embedding
from .params import ParamVector
from .rng import SeededRng
from .world import ConceptWorld


@dataclass(frozen=True)
class Denoiser:
    """Noise predictor mapping (latent, timestep, condition row) -> noise."""

    params: ParamVector
    n_concepts: int
    embed_dim: int
    time_embed_dim: int
    hidden: tuple

    @property
    def input_dim(self) -> int:
        return 2 + self.time_embed_dim + self.embed_dim

    @property
    def n_layers(self) -> int:
        return len(self.hidden) + 1

    def cond_row(self, concept_id: int | None) -> np.ndarray:
        """Embedding row for a concept; None selects the null condition."""
        table = self.params.segment("embed")
        idx = self.n_concepts if concept_id is None else int(concept_id)
        if not 0 <= idx <= self.n_concepts:
            raise ValueError(f"invalid concept id {concept_id}")
        return table[idx]

    def cond_rows(self, concept_ids) -> np.ndarray:
        table = self.params.segment("embed")
        return table[np.asarray(concept_ids, dtype=np.intp)]

    def with_params(self, values: np.ndarray) -> "Denoiser":
        return Denoiser(self.params.with_values(values), self.n_concepts,
                        self.embed_dim, self.time_embed_dim, self.hidden)


def init_denoiser(world: ConceptWorld, rng: SeededRng, hidden=(64, 64),
                  time_embed_dim: int = 8) -> Denoiser:
    """Fresh model: embedding table copied from the world, zeroed final layer."""
    in_dim = 2 + time_embed_dim + world.embed_dim
    layout = [("embed", (world.n_concepts + 1, world.embed_dim))]
    layout += mlp_layout(in_dim, hidden, 2)
    values = np.concatenate([
        world.embeddings.ravel(),
        init_mlp_values(in_dim, hidden, 2, rng, zero_final=True),
    ])
    return Denoiser(ParamVector(values, layout), world.n_concepts,
                    world.embed_dim, time_embed_dim, tuple(hidden))


def forward(d: Denoiser, params_like, z_t, t_embed, cond):
    """Core forward pass; any of (params_like, z_t, cond) may be a Var."""
    feats = ad.concat([z_t, t_embed, cond], axis=-1)
    return mlp_forward(params_like, d.params, feats, d.n_layers)


def denoise_predict(d: Denoiser, z_t, t, cond) -> np.ndarray:
    """Predicted noise for a single latent or a batch; pure numpy path."""
    z_t = np.asarray(z_t, dtype=np.float64)
    cond = np.asarray(cond, dtype=np.float64)
    if not (np.all(np.isfinite(z_t)) and np.all(np.isfinite(cond))):
        raise ValueError("non-finite input to denoiser")
    if cond.shape[-1] != d.embed_dim:
        raise ValueError(f"condition row must have {d.embed_dim} entries")
    if np.any(np.asarray(t) < 0):
        raise ValueError("timestep must be >= 0")
    single = z_t.ndim == 1
    zb = z_t.reshape(1, -1) if single else z_t
    tb = np.broadcast_to(np.asarray(t, dtype=np.float64), (zb.shape[0],))
    cb = np.broadcast_to(cond, (zb.shape[0], d.embed_dim))
    temb = time_embedding(tb, d.time_embed_dim)
    out = forward(d, d.params.values, zb, temb, cb)
    return out[0] if single else out
