"""Flat parameter vectors with named, shaped segments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ParamVector:
    """Flat float64 parameter storage plus a (name, shape) layout.

    The layout segments partition the flat values exactly; `segment`
    returns a reshaped copy and `with_values` produces a new vector that
    shares the layout.
    """

    values: np.ndarray
    layout: tuple

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "layout", tuple((str(n), tuple(int(d) for d in s)) for n, s in self.layout))
        total = sum(int(np.prod(s)) for _, s in self.layout)
        if vals.ndim != 1 or total != vals.size:
            raise ValueError(f"layout covers {total} values but vector has {vals.size}")

    @property
    def size(self) -> int:
        return self.values.size

    def offsets(self) -> dict:
        """Mapping name -> (start, stop, shape) into the flat vector."""
        out, pos = {}, 0
        for name, shape in self.layout:
            n = int(np.prod(shape))
            out[name] = (pos, pos + n, shape)
            pos += n
        return out

    def segment(self, name: str) -> np.ndarray:
        start, stop, shape = self.offsets()[name]
        return self.values[start:stop].reshape(shape)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise ValueError(f"expected {self.values.shape} values, got {values.shape}")
        return ParamVector(values, self.layout)

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)


def zeros_like(pv: ParamVector) -> ParamVector:
    return pv.with_values(np.zeros_like(pv.values))
