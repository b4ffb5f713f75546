"""Total-variation operator over the stacked 2N x T PSD matrix.

The operator stacks four 2TN x 2TN blocks acting on the column-major vec of
P (period-t column occupies slots [t*2N, (t+1)*2N)):

  block 1: backward frequency difference per column, lone +1 anchor on each
           column's first bin (differences never cross period boundaries);
  block 2: temporal difference -P(i, t) + P(i, t+1), lone -1 on the last
           period where no partner exists;
  block 3: forward frequency difference per column, lone +1 anchor on each
           column's last bin;
  block 4: temporal difference P(i, t) - P(i, t+1), lone +1 on the last
           period.

Every row has one or two entries from {+1, -1}.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class TvOperator:
    """Sparse 8TN x 2TN total-variation operator."""

    n2: int
    t: int
    v: sp.csr_matrix

    @property
    def n_vars(self) -> int:
        return self.n2 * self.t

    @property
    def shape(self) -> tuple[int, int]:
        return self.v.shape

    def block(self, index: int) -> sp.csr_matrix:
        """One of the four stacked 2TN x 2TN blocks (index 0..3)."""
        if not 0 <= index < 4:
            raise ValueError("block index must be 0..3")
        n = self.n_vars
        return self.v[index * n : (index + 1) * n]

    def apply(self, p_vec: np.ndarray) -> np.ndarray:
        p_vec = np.asarray(p_vec)
        if p_vec.shape != (self.n_vars,):
            raise ValueError(f"expected vector of length {self.n_vars}")
        return self.v @ p_vec

    def dump_coo_csv(self, path) -> None:
        """Debug dump as (row, col, val) coordinate triplets."""
        coo = self.v.tocoo()
        lines = ["row,col,val"]
        order = np.lexsort((coo.col, coo.row))
        for r, c, val in zip(coo.row[order], coo.col[order], coo.data[order]):
            lines.append(f"{r},{c},{int(val)}")
        Path(path).write_text("\n".join(lines) + "\n")


def build_tv_operator(n2: int, t: int) -> TvOperator:
    if n2 < 2 or n2 % 2:
        raise ValueError("n2 must be even and >= 2")
    if t < 1:
        raise ValueError("t must be >= 1")
    n = n2 * t
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    for i in range(n):  # block 1: backward frequency difference
        add(i, i, 1.0)
        if i % n2 != 0:
            add(i, i - 1, -1.0)
    base = n
    for i in range(n):  # block 2: temporal difference, -this +next
        add(base + i, i, -1.0)
        if i + n2 < n:
            add(base + i, i + n2, 1.0)
    base = 2 * n
    for i in range(n):  # block 3: forward frequency difference
        add(base + i, i, 1.0)
        if i % n2 != n2 - 1:
            add(base + i, i + 1, -1.0)
    base = 3 * n
    for i in range(n):  # block 4: temporal difference, +this -next
        add(base + i, i, 1.0)
        if i + n2 < n:
            add(base + i, i + n2, -1.0)

    v = sp.csr_matrix((vals, (rows, cols)), shape=(4 * n, n))
    return TvOperator(n2=n2, t=t, v=v)


def total_variation_sum(p_matrix: np.ndarray) -> float:
    """Four-term neighbor sum over the PSD grid, out-of-range neighbors dropped.

    Each in-range neighbor pair is counted from both endpoints, so this is
    twice the sum of absolute first differences along each axis.
    """
    p = np.atleast_2d(np.asarray(p_matrix, dtype=float))
    vertical = np.abs(np.diff(p, axis=0)).sum()
    horizontal = np.abs(np.diff(p, axis=1)).sum()
    return float(2.0 * (vertical + horizontal))


def total_variation_operator_norm(v: TvOperator, p_vec: np.ndarray) -> float:
    """||V p||_1.

    Equals :func:`total_variation_sum` of the unstacked P exactly whenever
    P's first and last frequency rows and its last period column are zero
    (the anchor and lone-entry rows then vanish).
    """
    return float(np.abs(v.apply(p_vec)).sum())


def vec_columns(p_matrix: np.ndarray) -> np.ndarray:
    """Column-major stacking of a 2N x T matrix."""
    return np.ravel(np.asarray(p_matrix), order="F")


def unvec_columns(p_vec: np.ndarray, n2: int, t: int) -> np.ndarray:
    return np.asarray(p_vec).reshape(t, n2).T
