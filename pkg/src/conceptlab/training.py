"""Base pretraining of the conditional denoiser."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import value_and_grad
from .denoiser import Denoiser, forward, init_denoiser
from .errors import NumericFailure
from .nets import time_embedding
from .rng import SeededRng
from .schedule import NoiseSchedule
from .world import ConceptWorld

LOSS_DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 3000
    lr: float = 1e-3
    batch: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0
    hidden: tuple = (64, 64)
    time_embed_dim: int = 8

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


@dataclass
class TrainTrace:
    """Per-step loss record plus a trailing-window summary."""

    columns: tuple
    rows: list = field(default_factory=list)

    def append(self, *vals):
        self.rows.append(tuple(float(v) for v in vals))

    def running_loss(self, window: int = 100) -> float:
        tail = self.rows[-window:]
        return float(np.mean([r[1] for r in tail])) if tail else float("nan")

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_csv_num(v) for v in row))
        return "\n".join(lines) + "\n"


def _csv_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 1e15 else f"{v:.17g}"


class Adam:
    """Adaptive moment estimation with bias correction; deterministic."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def update(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        mhat = self.m / (1.0 - self.beta1**self.t)
        vhat = self.v / (1.0 - self.beta2**self.t)
        return x - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def guard_loss(val: float, step: int):
    if not np.isfinite(val) or val > LOSS_DIVERGENCE_LIMIT:
        raise NumericFailure(f"training diverged, loss {val:.3e}", step=step)


def recon_loss(d: Denoiser, s: NoiseSchedule, world: ConceptWorld, concept_id: int,
               batch) -> float:
    """Mean squared noise-prediction error for one concept over a batch.

    batch is a sequence of (x, t, eps) triples; the condition row is the
    model's own (frozen snapshot) embedding for the concept.
    """
    fn = recon_loss_fn(d, s, concept_id, batch)
    return float(ad.value_of(fn(d.params.values)))


def recon_loss_fn(d: Denoiser, s: NoiseSchedule, concept_id: int, batch):
    """Loss closure over the flat parameter vector.

    The condition rows are captured as constants from the current table, so
    the gradient is taken with the conditioning frozen (pretrained-encoder
    analog); batch noising uses the shared forward transform.
    """
    xs = np.stack([np.asarray(x, dtype=np.float64) for x, _, _ in batch])
    ts = np.array([int(t) for _, t, _ in batch])
    eps = np.stack([np.asarray(e, dtype=np.float64) for _, _, e in batch])
    if xs.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    ab = s.abar(ts)
    zt = np.sqrt(ab)[:, None] * xs + np.sqrt(1.0 - ab)[:, None] * eps
    temb = time_embedding(ts.astype(np.float64), d.time_embed_dim)
    cond = np.broadcast_to(d.cond_row(concept_id), (xs.shape[0], d.embed_dim))
    n = xs.shape[0]

    def fn(p):
        out = forward(d, p, zt, temb, cond)
        diff = ad.sub(eps, out)
        return ad.div(ad.asum(ad.mul(diff, diff)), float(n))

    return fn


def train_base(world: ConceptWorld, s: NoiseSchedule, cfg: TrainConfig,
               rng: SeededRng | None = None):
    """Pretrain over all concepts with uniform concept/timestep/noise draws.

    Returns (model, trace). The embedding-table segment trains jointly with
    the network here and nowhere else.
    """
    rng = rng if rng is not None else SeededRng(cfg.seed)
    d = init_denoiser(world, rng, hidden=cfg.hidden, time_embed_dim=cfg.time_embed_dim)
    pv = d.params
    off = pv.offsets()
    es, ee, eshape = off["embed"]
    means, stdevs = world.means, world.stdevs
    opt = Adam(pv.size, cfg.lr, cfg.beta1, cfg.beta2)
    trace = TrainTrace(("step", "loss"))
    T = s.steps
    for step in range(cfg.steps):
        cids = rng.integers(0, world.n_concepts, cfg.batch)
        u = rng.normal((cfg.batch, 2))
        x = means[cids] + stdevs[cids, None] * u
        ts = rng.integers(1, T + 1, cfg.batch)
        eps = rng.normal((cfg.batch, 2))
        ab = s.abar(ts)
        zt = np.sqrt(ab)[:, None] * x + np.sqrt(1.0 - ab)[:, None] * eps
        temb = time_embedding(ts.astype(np.float64), cfg.time_embed_dim)

        def loss_fn(p):
            table = ad.reshape(ad.segment(p, es, ee), eshape)
            cond = ad.rows(table, cids)
            out = forward(d, p, zt, temb, cond)
            diff = ad.sub(eps, out)
            return ad.div(ad.asum(ad.mul(diff, diff)), float(cfg.batch))

        val, g = value_and_grad(loss_fn, pv.values)
        guard_loss(val, step)
        pv = pv.with_values(opt.update(pv.values, g))
        trace.append(step, val)
    return d.with_params(pv.values), trace
