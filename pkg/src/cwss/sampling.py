"""Random row-subsampling measurement operator (the sub-Nyquist sampler)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import NyquistFrame


@dataclass(frozen=True)
class MeasurementMatrix:
    """M x N selection operator keeping ``selected_rows`` of each frame.

    Dense form has a single unit entry per row: phi[i, selected_rows[i]] = 1.
    Rows are stored in ascending index order.
    """

    m: int
    n: int
    selected_rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.selected_rows, dtype=int)
        if not 1 <= self.m <= self.n:
            raise ValueError("need 1 <= m <= n")
        if rows.shape != (self.m,):
            raise ValueError("selected_rows must have length m")
        if len(np.unique(rows)) != self.m:
            raise ValueError("selected_rows must be distinct")
        if (rows < 0).any() or (rows >= self.n).any():
            raise ValueError("selected_rows out of range")
        if not np.all(np.diff(rows) > 0):
            raise ValueError("selected_rows must be ascending")
        object.__setattr__(self, "selected_rows", rows)

    def dense(self) -> np.ndarray:
        phi = np.zeros((self.m, self.n))
        phi[np.arange(self.m), self.selected_rows] = 1.0
        return phi

    def to_json_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "rows": self.selected_rows.tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "MeasurementMatrix":
        return cls(m=int(d["m"]), n=int(d["n"]), selected_rows=np.asarray(d["rows"], dtype=int))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


@dataclass(frozen=True)
class CompressiveFrame:
    """One M-sample compressive frame y = phi x."""

    frame_index: int
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1:
            raise ValueError("samples must be a vector")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size


def make_subsampling_matrix(m: int, n: int, seed: int) -> MeasurementMatrix:
    """Choose m of n rows uniformly at random without replacement.

    Rows come out in ascending order; deterministic per seed.
    """
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(n, size=m, replace=False))
    return MeasurementMatrix(m=m, n=n, selected_rows=rows)


def rate_to_m(rate: float, n: int) -> int:
    """Measurement count for a sub-sampling rate: round(rate * n), clipped to [1, n]."""
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must be in (0, 1]")
    return min(max(int(round(rate * n)), 1), n)


def compress_frame(phi: MeasurementMatrix, x: NyquistFrame) -> CompressiveFrame:
    """Apply the selection operator: y[i] = x[selected_rows[i]]."""
    if len(x) != phi.n:
        raise ValueError(f"frame length {len(x)} != operator width {phi.n}")
    return CompressiveFrame(frame_index=x.frame_index, samples=x.samples[phi.selected_rows])


def compress_frames(phi: MeasurementMatrix, frames) -> list[CompressiveFrame]:
    return [compress_frame(phi, x) for x in frames]
