"""Binned running estimate of the conditional mean force over the RC grid.

Each visit of a replica to bin (i, j) deposits its local mean force sample; the
estimated mean force in a bin is the flat average of everything deposited there
since t = 0 (trajectory average x replica average). Samples falling outside the
grid are counted but otherwise ignored; unvisited bins report zero force, which
biases nothing.
"""

from __future__ import annotations

import numpy as np

from .fields import Grid2, VectorField2


def bin_index(z, grid: Grid2):
    """Bin (i, j) containing z, or None when z leaves the grid."""
    i = int(np.floor((z[0] - grid.xi_min) / grid.delta))
    j = int(np.floor((z[1] - grid.xi_min) / grid.delta))
    if 0 <= i < grid.n_bins and 0 <= j < grid.n_bins:
        return (i, j)
    return None


def bin_index_batch(z: np.ndarray, grid: Grid2):
    """Vectorized bin indices for z of shape (R, 2); -1 marks out-of-grid rows.

    Returns (i, j, inside) with integer arrays i, j clipped only by the inside
    mask; callers that need the clamped boundary bin (bias lookup outside the
    grid) should clip explicitly.
    """
    ij = np.floor((z - grid.xi_min) / grid.delta).astype(np.int64)
    inside = ((ij >= 0) & (ij < grid.n_bins)).all(axis=1)
    i = np.where(inside, ij[:, 0], -1)
    j = np.where(inside, ij[:, 1], -1)
    return i, j, inside


class BinnedForceAccumulator:
    """Per-bin running sums of force samples and visit counts.

    Deposits accumulate strictly sequentially in arrival order (within a batch,
    replica index order), so the floating-point reduction tree is a plain
    left-to-right sum per bin and any run replays bit-identically. With
    keep_log=True the accepted deposits are retained so tests can rebuild the
    sums independently.
    """

    def __init__(self, grid: Grid2, keep_log: bool = False):
        self.grid = grid
        nb = grid.n_bins
        self.sum_f = np.zeros((nb, nb, 2))
        self.count = np.zeros((nb, nb), dtype=np.int64)
        self.out_of_domain = 0
        self.log: list[tuple[np.ndarray, np.ndarray, np.ndarray]] | None = [] if keep_log else None

    @property
    def total_deposits(self) -> int:
        return int(self.count.sum()) + self.out_of_domain

    def deposit(self, z, f) -> None:
        """Deposit one sample; outside the grid it only bumps the tally."""
        f = np.asarray(f, dtype=float)
        if not np.all(np.isfinite(f)):
            raise ValueError("non-finite local mean force sample")
        idx = bin_index(z, self.grid)
        if idx is None:
            self.out_of_domain += 1
            return
        self.sum_f[idx] += f
        self.count[idx] += 1
        if self.log is not None:
            self.log.append((np.array([idx[0]]), np.array([idx[1]]), f[None, :].copy()))

    def deposit_batch(self, z: np.ndarray, f: np.ndarray) -> None:
        """Deposit one sample per replica, accumulated in replica order."""
        i, j, inside = bin_index_batch(z, self.grid)
        if not inside.all():
            self.out_of_domain += int((~inside).sum())
        ii, jj = i[inside], j[inside]
        flat = ii * self.grid.n_bins + jj
        fin = f[inside]
        np.add.at(self.sum_f.reshape(-1, 2), flat, fin)
        np.add.at(self.count.reshape(-1), flat, 1)
        if self.log is not None:
            self.log.append((ii.copy(), jj.copy(), fin.copy()))

    def mean_force_field(self) -> VectorField2:
        """Per-bin sample mean; unvisited bins report (0, 0)."""
        denom = np.maximum(self.count, 1)[..., None].astype(float)
        values = np.where(self.count[..., None] > 0, self.sum_f / denom, 0.0)
        return VectorField2(values, self.grid, self.count.copy())


def mean_force_field(acc: BinnedForceAccumulator) -> VectorField2:
    return acc.mean_force_field()
