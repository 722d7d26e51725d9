"""Shared network building blocks: time features and the smooth MLP."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .params import ParamVector
from .rng import SeededRng


def time_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal features of the (raw) timestep; defined for t >= 0."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    ang = np.multiply.outer(np.asarray(t, dtype=np.float64), freqs)
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def mlp_layout(in_dim: int, hidden, out_dim: int) -> list:
    """(name, shape) segments for a silu MLP; empty hidden = single linear map."""
    sizes = [in_dim, *hidden, out_dim]
    layout = []
    for k in range(len(sizes) - 1):
        layout.append((f"l{k}.w", (sizes[k], sizes[k + 1])))
        layout.append((f"l{k}.b", (sizes[k + 1],)))
    return layout


def init_mlp_values(in_dim: int, hidden, out_dim: int, rng: SeededRng,
                    zero_final: bool = True) -> np.ndarray:
    """Scaled-normal weights, zero biases; final layer optionally zeroed."""
    sizes = [in_dim, *hidden, out_dim]
    chunks = []
    n_layers = len(sizes) - 1
    for k in range(n_layers):
        fan_in = sizes[k]
        w = rng.normal((fan_in, sizes[k + 1])) / np.sqrt(fan_in)
        if zero_final and k == n_layers - 1:
            w = np.zeros_like(w)
        chunks.append(w.ravel())
        chunks.append(np.zeros(sizes[k + 1]))
    return np.concatenate(chunks)


def mlp_forward(params_like, pv: ParamVector, x, n_layers: int, prefix: str = ""):
    """Forward pass through the silu MLP.

    params_like is either the flat ndarray of values (graph-free) or a Var
    wrapping them (traced); x follows the same convention.
    """
    offsets = pv.offsets()
    h = x
    for k in range(n_layers):
        ws, we, wshape = offsets[f"{prefix}l{k}.w"]
        bs, be, _ = offsets[f"{prefix}l{k}.b"]
        w = ad.reshape(ad.segment(params_like, ws, we), wshape)
        b = ad.segment(params_like, bs, be)
        h = ad.add(ad.matmul(h, w), b)
        if k < n_layers - 1:
            h = ad.silu(h)
    return h
