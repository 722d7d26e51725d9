"""Latent-space reconstruction of erased concepts.

Two ingredients: a re-binding loss that re-links each erased condition to
its exemplar distribution, and an orthogonalization penalty on cross-concept
prediction cosines that keeps the joint recovery from entangling concepts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import value_and_grad, value_of
from .denoiser import Denoiser, forward
from .nets import time_embedding
from .rng import SeededRng
from .schedule import NoiseSchedule
from .training import Adam, TrainTrace, guard_loss
from .world import ConceptWorld, ExemplarSet


@dataclass(frozen=True)
class ReawakenConfig:
    ortho_weight: float = 0.1
    norm_eps: float = 1e-8
    steps: int = 1000
    lr: float = 1e-4
    batch: int = 4
    exemplars_per_concept: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.ortho_weight < 0:
            raise ValueError("ortho_weight must be >= 0")
        if self.norm_eps <= 0:
            raise ValueError("norm_eps must be positive")
        if self.steps < 0 or self.lr <= 0 or self.batch < 1 or self.exemplars_per_concept < 1:
            raise ValueError("invalid fine-tune settings")


def bind_loss(d: Denoiser, s: NoiseSchedule, exemplars: ExemplarSet,
              world: ConceptWorld, batch) -> float:
    """Denoising error on exemplar samples under the concept's condition.

    batch is a sequence of (exemplar index, t, eps) triples.
    """
    fn = bind_loss_fn(d, s, exemplars, batch)
    return float(value_of(fn(d.params.values)))


def bind_loss_fn(d: Denoiser, s: NoiseSchedule, exemplars: ExemplarSet, batch):
    idx = np.array([int(i) for i, _, _ in batch])
    if idx.size == 0:
        raise ValueError("batch must be nonempty")
    if np.any(idx < 0) or np.any(idx >= exemplars.samples.shape[0]):
        raise ValueError("exemplar index out of range")
    ts = np.array([int(t) for _, t, _ in batch])
    eps = np.stack([np.asarray(e, dtype=np.float64) for _, _, e in batch])
    x = exemplars.samples[idx]
    ab = s.abar(ts)
    zt = np.sqrt(ab)[:, None] * x + np.sqrt(1.0 - ab)[:, None] * eps
    temb = time_embedding(ts.astype(np.float64), d.time_embed_dim)
    cond = np.broadcast_to(d.cond_row(exemplars.concept_id), (idx.size, d.embed_dim))
    n = idx.size

    def fn(p):
        out = forward(d, p, zt, temb, cond)
        diff = ad.sub(eps, out)
        return ad.div(ad.asum(ad.mul(diff, diff)), float(n))

    return fn


def orth_loss(d: Denoiser, world: ConceptWorld, zt_batch, norm_eps: float) -> float:
    """Mean absolute prediction cosine between erased and other concepts.

    zt_batch is a sequence of (z_t, t) pairs shared by every condition
    branch; the self pair (same concept) is skipped.
    """
    fn = orth_loss_fn(d, world, zt_batch, norm_eps)
    return float(value_of(fn(d.params.values)))


def orth_loss_fn(d: Denoiser, world: ConceptWorld, zt_batch, norm_eps: float):
    if norm_eps <= 0:
        raise ValueError("norm_eps must be positive")
    zts = np.stack([np.asarray(z, dtype=np.float64) for z, _ in zt_batch])
    ts = np.array([int(t) for _, t in zt_batch])
    if zts.shape[0] == 0:
        raise ValueError("zt_batch must be nonempty")
    temb = time_embedding(ts.astype(np.float64), d.time_embed_dim)
    table = d.params.segment("embed")
    erased = sorted(world.erased_ids)
    all_ids = list(range(world.n_concepts))
    n = zts.shape[0]

    def fn(p):
        preds = {}
        for cid in all_ids:
            cond = np.broadcast_to(table[cid], (n, d.embed_dim))
            preds[cid] = forward(d, p, zts, temb, cond)
        norms = {
            cid: ad.sqrt(ad.asum(ad.mul(v, v), axis=1)) for cid, v in preds.items()
        }
        total = None
        for m in erased:
            for other in all_ids:
                if other == m:
                    continue
                dot = ad.asum(ad.mul(preds[m], preds[other]), axis=1)
                denom = ad.add(ad.mul(norms[m], norms[other]), norm_eps)
                term = ad.asum(ad.div(ad.absolute(dot), denom))
                total = term if total is None else ad.add(total, term)
        if total is None:
            return 0.0
        return ad.div(total, float(n))

    return fn


def reawaken_finetune(erased_model: Denoiser, exemplar_sets, world: ConceptWorld,
                      s: NoiseSchedule, cfg: ReawakenConfig,
                      rng: SeededRng | None = None):
    """Recover erased concepts from exemplars, starting at the erased model.

    Minimizes the summed re-binding losses plus ortho_weight times the
    orthogonalization penalty. The embedding table stays frozen (condition
    rows enter as constants). Returns (model, trace) where the trace logs
    (step, bind_total, orth, total); the orth value is recorded even when
    its weight is zero so ablation runs stay comparable.
    """
    rng = rng if rng is not None else SeededRng(cfg.seed)
    erased = sorted(world.erased_ids)
    got = sorted(e.concept_id for e in exemplar_sets)
    if got != erased:
        raise ValueError(f"exemplar sets cover {got}, expected erased set {erased}")
    trace = TrainTrace(("step", "bind_total", "orth", "total"))
    if not erased or cfg.steps == 0:
        return erased_model.with_params(erased_model.params.values.copy()), trace
    by_id = {e.concept_id: e for e in exemplar_sets}
    pv = erased_model.params.copy()
    preserved = sorted(world.preserved_ids)
    means, stdevs = world.means, world.stdevs
    pooled_x = np.concatenate([by_id[m].samples for m in erased])
    n_pool = pooled_x.shape[0]
    opt = Adam(pv.size, cfg.lr)
    T = s.steps
    for step in range(cfg.steps):
        bind_fns = []
        for m in erased:
            S = by_id[m].samples.shape[0]
            batch = [
                (i, t, e)
                for i, t, e in zip(
                    rng.integers(0, S, cfg.batch),
                    rng.integers(1, T + 1, cfg.batch),
                    rng.normal((cfg.batch, 2)),
                )
            ]
            bind_fns.append(bind_loss_fn(erased_model, s, by_id[m], batch))
        zt_pairs = _orth_batch(pooled_x, n_pool, preserved, means, stdevs, s, rng)
        orth_fn = orth_loss_fn(erased_model, world, zt_pairs, cfg.norm_eps)

        def loss_fn(p):
            bind_total = None
            for fn in bind_fns:
                term = fn(p)
                bind_total = term if bind_total is None else ad.add(bind_total, term)
            if cfg.ortho_weight > 0:
                return ad.add(bind_total, ad.mul(orth_fn(p), cfg.ortho_weight))
            return bind_total

        val, g = value_and_grad(loss_fn, pv.values)
        guard_loss(val, step)
        bind_val = sum(float(value_of(fn(pv.values))) for fn in bind_fns)
        orth_val = float(value_of(orth_fn(pv.values)))
        pv = pv.with_values(opt.update(pv.values, g))
        trace.append(step, bind_val, orth_val, bind_val + cfg.ortho_weight * orth_val)
    return erased_model.with_params(pv.values), trace


def _orth_batch(pooled_x, n_pool, preserved, means, stdevs, s, rng):
    """Shared (z_t, t) pool: noised exemplars plus noised preserved draws."""
    if preserved:
        pick = rng.integers(0, len(preserved), n_pool)
        pids = np.array(preserved)[pick]
        u = rng.normal((n_pool, 2))
        extra = means[pids] + stdevs[pids, None] * u
        xs = np.concatenate([pooled_x, extra])
    else:
        xs = pooled_x
    ts = rng.integers(1, s.steps + 1, xs.shape[0])
    eps = rng.normal((xs.shape[0], 2))
    ab = s.abar(ts)
    zts = np.sqrt(ab)[:, None] * xs + np.sqrt(1.0 - ab)[:, None] * eps
    return list(zip(zts, ts))


def draw_exemplars(world: ConceptWorld, cfg: ReawakenConfig, rng: SeededRng) -> list:
    """One exemplar set per erased concept, drawn from the true distribution."""
    from .world import sample_concept_data

    sets = []
    for k, cid in enumerate(sorted(world.erased_ids)):
        xs = sample_concept_data(world, cid, cfg.exemplars_per_concept, rng.child(k))
        sets.append(ExemplarSet(cid, xs))
    return sets
