"""Comparison quantities: realization variances, free-energy error, marginals,
and metastability transition counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Grid2, VectorField2


@dataclass
class DiagnosticsRow:
    """One time-stamped diagnostics record.

    var_f / var_grad_a are across-realization variances and only filled by
    multi-realization comparisons; single runs leave them None. transitions
    counts hysteresis crossings per trimer bond (zeros for toy systems).
    """

    time: float
    l2_error: float | None = None
    var_f: float | None = None
    var_grad_a: float | None = None
    marginal1: np.ndarray | None = None
    marginal2: np.ndarray | None = None
    transitions: tuple[int, int] = (0, 0)


def realization_variance(fields: list[VectorField2] | np.ndarray):
    """Across-realization variance of a bin field, spatially averaged.

    Implements the estimator literally as used for the published variance
    curves: for each component, average over bins of the second moment across
    realizations, minus the average over bins of the squared across-realization
    mean. Returns (per_component, total).
    """
    if isinstance(fields, np.ndarray):
        stack = fields
    else:
        if len(fields) < 2:
            raise ValueError("need at least two realizations")
        grid = fields[0].grid
        if any(f.grid != grid for f in fields):
            raise ValueError("realizations live on different grids")
        stack = np.stack([f.values for f in fields])
    if stack.ndim != 4 or stack.shape[0] < 2:
        raise ValueError("expected a (K, n_bins, n_bins, 2) stack with K >= 2")
    second = (stack**2).mean(axis=0)
    first = stack.mean(axis=0)
    per_component = second.mean(axis=(0, 1)) - (first**2).mean(axis=(0, 1))
    return per_component, float(per_component.sum())


def l2_gradient_error(est: VectorField2, ref: VectorField2, mask: np.ndarray | None = None) -> float:
    """Normalized L2 distance between two bin vector fields over valid bins."""
    if est.grid != ref.grid:
        raise ValueError("fields live on different grids")
    if mask is None:
        mask = np.ones((est.grid.n_bins,) * 2, dtype=bool)
    if not mask.any():
        raise ValueError("no valid bins in mask")
    diff = ((est.values - ref.values) ** 2).sum(axis=-1)[mask].sum()
    denom = (ref.values**2).sum(axis=-1)[mask].sum()
    if denom == 0.0:
        raise ValueError("reference field vanishes on the mask")
    return float(np.sqrt(diff / denom))


def occupancy_histogram(z: np.ndarray, grid: Grid2) -> np.ndarray:
    """2D bin counts of current reaction-coordinate values, shape (R, 2) in."""
    ij = np.floor((z - grid.xi_min) / grid.delta).astype(np.int64)
    inside = ((ij >= 0) & (ij < grid.n_bins)).all(axis=1)
    flat = ij[inside, 0] * grid.n_bins + ij[inside, 1]
    return np.bincount(flat, minlength=grid.n_bins**2).reshape(grid.n_bins, grid.n_bins)


def marginal_histograms(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row/column sums of a 2D occupancy histogram, each normalized to 1."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("no samples in the occupancy histogram")
    return counts.sum(axis=1) / total, counts.sum(axis=0) / total


class TransitionCounter:
    """Hysteresis (two-threshold) crossing counter, usable online.

    A transition registers when the series, having last committed below `low`,
    exceeds `high`, or vice versa; excursions that stay between the thresholds
    never count.
    """

    def __init__(self, low: float, high: float):
        if not low < high:
            raise ValueError("need low < high")
        self.low = low
        self.high = high
        self.state = 0  # -1 below, +1 above, 0 undecided
        self.count = 0

    def update(self, value: float) -> None:
        if value < self.low:
            if self.state == 1:
                self.count += 1
            self.state = -1
        elif value > self.high:
            if self.state == -1:
                self.count += 1
            self.state = 1

    def update_many(self, values) -> None:
        for v in np.asarray(values, dtype=float).ravel():
            self.update(v)


def transition_count(series, low: float, high: float) -> int:
    """Hysteresis crossing count of a whole series."""
    counter = TransitionCounter(low, high)
    counter.update_many(series)
    return counter.count
