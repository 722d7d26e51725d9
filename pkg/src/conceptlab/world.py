"""The analytic concept universe: Gaussian components, condition embeddings,
the exact Bayes oracle, and the kernel two-sample distance used for
distributional fidelity."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .rng import SeededRng

WORLD_FORMAT = "conceptlab-world v1"


@dataclass(frozen=True)
class ConceptSpec:
    """One isotropic Gaussian component in the 2-D data space."""

    id: int
    mean: np.ndarray
    stdev: float
    label: str

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64).reshape(2))
        if not self.stdev > 0:
            raise ValueError(f"concept {self.id}: stdev must be positive")


@dataclass(frozen=True)
class ConceptWorld:
    """Concept set with its erased/preserved partition and embedding table.

    The table has one row per concept plus a final all-purpose null row
    (index = number of concepts). Immutable after construction.
    """

    concepts: tuple
    erased_ids: frozenset
    embeddings: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "concepts", tuple(self.concepts))
        object.__setattr__(self, "erased_ids", frozenset(int(i) for i in self.erased_ids))
        emb = np.asarray(self.embeddings, dtype=np.float64)
        object.__setattr__(self, "embeddings", emb)
        ids = [c.id for c in self.concepts]
        if ids != list(range(len(ids))):
            raise ValueError("concept ids must be contiguous from 0")
        if not self.erased_ids <= set(ids):
            raise ValueError(f"erased ids {sorted(self.erased_ids)} outside [0, {len(ids)})")
        if emb.shape[0] != len(ids) + 1:
            raise ValueError(f"embedding table needs {len(ids) + 1} rows, got {emb.shape[0]}")

    @property
    def n_concepts(self) -> int:
        return len(self.concepts)

    @property
    def embed_dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def preserved_ids(self) -> frozenset:
        return frozenset(range(self.n_concepts)) - self.erased_ids

    @property
    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.concepts])

    @property
    def stdevs(self) -> np.ndarray:
        return np.array([c.stdev for c in self.concepts])

    def null_row(self) -> np.ndarray:
        return self.embeddings[self.n_concepts]


@dataclass(frozen=True)
class ExemplarSet:
    """The handful of reference samples that anchor one concept's re-binding."""

    concept_id: int
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] < 1:
            raise ValueError("samples must be a nonempty (S, 2) array")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", s)


def default_world(d: int, radius: float, stdev: float, erased_ids, seed: int = 0,
                  embed_dim: int | None = None) -> ConceptWorld:
    """Concepts on a circle with one-hot condition embeddings.

    Means sit at angles 2*pi*i/d on the given radius. Embedding rows are
    one-hot of width d+1 zero-padded to embed_dim; the null row is zero.
    The seed parameter is reserved for randomized variants.
    """
    if d < 2:
        raise ValueError("need at least 2 concepts")
    if radius <= 0 or stdev <= 0:
        raise ValueError("radius and stdev must be positive")
    erased = frozenset(int(i) for i in erased_ids)
    if not erased <= set(range(d)):
        raise ValueError(f"erased ids {sorted(erased)} outside [0, {d})")
    if embed_dim is None:
        embed_dim = d + 1
    if embed_dim < d + 1:
        raise ValueError(f"embed_dim {embed_dim} smaller than one-hot width {d + 1}")
    angles = 2.0 * np.pi * np.arange(d) / d
    concepts = tuple(
        ConceptSpec(i, radius * np.array([np.cos(a), np.sin(a)]), stdev, f"c{i}")
        for i, a in enumerate(angles)
    )
    emb = np.zeros((d + 1, embed_dim))
    for i in range(d):
        emb[i, i] = 1.0
    return ConceptWorld(concepts, erased, emb)


def sample_concept_data(world: ConceptWorld, concept_id: int, n: int, rng: SeededRng) -> np.ndarray:
    """n i.i.d. draws from the concept's Gaussian component."""
    if not 0 <= concept_id < world.n_concepts:
        raise ValueError(f"invalid concept id {concept_id}")
    if n < 1:
        raise ValueError("n must be >= 1")
    c = world.concepts[concept_id]
    return c.mean + c.stdev * rng.normal((n, 2))


def _posterior_logits(world: ConceptWorld, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    d2 = ((x[..., None, :] - world.means) ** 2).sum(axis=-1)
    sig2 = world.stdevs**2
    return -d2 / (2.0 * sig2) - np.log(sig2)


def oracle_posterior(world: ConceptWorld, x) -> np.ndarray:
    """Exact Bayes posterior over concepts under equal priors.

    Log-sum-exp stabilized; rows sum to 1 within 1e-12.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    logits = _posterior_logits(world, x)
    m = logits.max(axis=-1, keepdims=True)
    p = np.exp(logits - m)
    return p / p.sum(axis=-1, keepdims=True)


def oracle_accuracy(world: ConceptWorld, samples, target_id: int) -> float:
    """Fraction of samples the Bayes oracle assigns to target_id.

    Argmax ties break toward the lowest concept id.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    samples = samples.reshape(-1, 2)
    pred = np.argmax(_posterior_logits(world, samples), axis=1)
    return float(np.mean(pred == target_id))


def mmd2(a, b, bandwidth: float) -> float:
    """Biased V-statistic estimate of squared MMD with a Gaussian kernel."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("both sample sets must be nonempty")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    s = 2.0 * bandwidth * bandwidth
    kaa = np.exp(-cdist(a, a, "sqeuclidean") / s).mean()
    kbb = np.exp(-cdist(b, b, "sqeuclidean") / s).mean()
    kab = np.exp(-cdist(a, b, "sqeuclidean") / s).mean()
    return float(kaa + kbb - 2.0 * kab)


def median_bandwidth(reference) -> float:
    """Median pairwise distance of the reference sample (median heuristic)."""
    reference = np.asarray(reference, dtype=np.float64).reshape(-1, 2)
    if reference.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(reference)))
    return med if med > 0 else 1.0


def save_world(world: ConceptWorld, path):
    from .fileio import atomic_write_text

    atomic_write_text(path, serialize_world(world))


def serialize_world(world: ConceptWorld) -> str:
    lines = [f"format: {WORLD_FORMAT}"]
    lines.append(f"concepts: {world.n_concepts}")
    lines.append(f"embed_dim: {world.embed_dim}")
    lines.append("erased: " + " ".join(str(i) for i in sorted(world.erased_ids)))
    for c in world.concepts:
        lines.append(
            f"concept: {c.id} {c.label} {c.mean[0]:.17g} {c.mean[1]:.17g} {c.stdev:.17g}"
        )
    for i in range(world.n_concepts + 1):
        row = " ".join(f"{v:.17g}" for v in world.embeddings[i])
        lines.append(f"embedding: {i} {row}")
    return "\n".join(lines) + "\n"


def parse_world(text: str) -> ConceptWorld:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0]
    if not header.startswith("format: "):
        raise ValueError("missing world format header")
    fmt = header[len("format: "):]
    if fmt != WORLD_FORMAT:
        raise ValueError(f"unsupported world format {fmt!r}")
    n = emb_dim = None
    erased: list[int] = []
    concepts = {}
    emb_rows = {}
    for ln in lines[1:]:
        key, _, rest = ln.partition(": ")
        if key == "concepts":
            n = int(rest)
        elif key == "embed_dim":
            emb_dim = int(rest)
        elif key == "erased":
            erased = [int(t) for t in rest.split()] if rest.strip() else []
        elif key == "concept":
            toks = rest.split()
            cid = int(toks[0])
            concepts[cid] = ConceptSpec(
                cid, [float(toks[2]), float(toks[3])], float(toks[4]), toks[1]
            )
        elif key == "embedding":
            toks = rest.split()
            emb_rows[int(toks[0])] = [float(t) for t in toks[1:]]
        else:
            raise ValueError(f"unknown world line {ln!r}")
    if n is None or emb_dim is None or len(concepts) != n or len(emb_rows) != n + 1:
        raise ValueError("incomplete world document")
    emb = np.array([emb_rows[i] for i in range(n + 1)], dtype=np.float64)
    return ConceptWorld(tuple(concepts[i] for i in range(n)), frozenset(erased), emb)


def load_world(path) -> ConceptWorld:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_world(fh.read())


def world_hash(world: ConceptWorld) -> str:
    return hashlib.sha256(serialize_world(world).encode("utf-8")).hexdigest()
