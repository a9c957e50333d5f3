"""Grids and binned fields on the 2D reaction-coordinate domain, plus CSV I/O.

The reaction-coordinate square [xi_min, xi_max]^2 is split into n_bins x n_bins
equal bins. Vector data (estimated mean forces, projected gradients) lives at
bin centers; scalar data (free-energy estimates) lives at the (n_bins+1)^2
grid nodes. CSV files carry the grid in a header comment and use repr() for
floats so that read(write(x)) is bit-exact.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Grid2:
    """Uniform square grid over [xi_min, xi_max]^2 with n_bins bins per axis."""

    xi_min: float
    xi_max: float
    n_bins: int

    def __post_init__(self):
        if not self.xi_max > self.xi_min:
            raise ValueError(f"xi_max={self.xi_max} must exceed xi_min={self.xi_min}")
        if self.n_bins < 2:
            raise ValueError(f"n_bins={self.n_bins} must be >= 2")

    @property
    def delta(self) -> float:
        return (self.xi_max - self.xi_min) / self.n_bins

    @property
    def n_nodes(self) -> int:
        return self.n_bins + 1

    def node_coords(self) -> np.ndarray:
        """Node positions along one axis, shape (n_bins+1,)."""
        return self.xi_min + self.delta * np.arange(self.n_bins + 1)

    def center_coords(self) -> np.ndarray:
        """Bin-center positions along one axis, shape (n_bins,)."""
        return self.xi_min + self.delta * (np.arange(self.n_bins) + 0.5)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (ij indexing) of bin centers, each shape (n_bins, n_bins)."""
        c = self.center_coords()
        return np.meshgrid(c, c, indexing="ij")

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (ij indexing) of node coordinates."""
        x = self.node_coords()
        return np.meshgrid(x, x, indexing="ij")


@dataclass
class VectorField2:
    """Bin-centered 2-vector field. values[i, j] = (F1, F2) in bin (i, j).

    counts, when present, doubles as a validity mask (count > 0 = visited bin).
    """

    values: np.ndarray
    grid: Grid2
    counts: np.ndarray | None = None

    def __post_init__(self):
        nb = self.grid.n_bins
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (nb, nb, 2):
            raise ValueError(f"expected values shape {(nb, nb, 2)}, got {self.values.shape}")
        if self.counts is not None:
            self.counts = np.asarray(self.counts)
            if self.counts.shape != (nb, nb):
                raise ValueError(f"expected counts shape {(nb, nb)}, got {self.counts.shape}")

    def mask(self) -> np.ndarray:
        """Boolean validity mask; all-valid when no counts are attached."""
        if self.counts is None:
            return np.ones((self.grid.n_bins,) * 2, dtype=bool)
        return self.counts > 0


@dataclass
class ScalarField:
    """Node-valued scalar field on the (n_bins+1)^2 grid nodes, zero-mean gauge.

    Periodic solves store the wrap row/column explicitly (last row equals the
    first row), so downstream consumers never need a periodicity flag.
    """

    values: np.ndarray
    grid: Grid2

    def __post_init__(self):
        nn = self.grid.n_nodes
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (nn, nn):
            raise ValueError(f"expected values shape {(nn, nn)}, got {self.values.shape}")
        scale = max(1.0, float(np.abs(self.values).max()))
        if abs(float(self.values.mean())) > 1e-12 * scale:
            raise ValueError("scalar field violates the zero-mean gauge")

    @classmethod
    def gauged(cls, values: np.ndarray, grid: Grid2) -> "ScalarField":
        """Build a field after subtracting the nodal mean."""
        v = np.asarray(values, dtype=float)
        return cls(v - v.mean(), grid)


@dataclass
class WeightField:
    """Strictly positive per-bin weights (a density estimate on the grid)."""

    values: np.ndarray
    grid: Grid2

    def __post_init__(self):
        nb = self.grid.n_bins
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (nb, nb):
            raise ValueError(f"expected values shape {(nb, nb)}, got {self.values.shape}")
        if not np.all(self.values > 0.0):
            raise ValueError("weight field must be strictly positive")

    @classmethod
    def from_histogram(cls, counts: np.ndarray, grid: Grid2, floor: float = 1e-6) -> "WeightField":
        """Turn bin counts into a floored probability density integrating to 1."""
        w = np.asarray(counts, dtype=float)
        w = np.maximum(w, floor * max(1.0, float(w.max())))
        w = w / (w.sum() * grid.delta**2)
        return cls(w, grid)


# ---------------------------------------------------------------------------
# CSV I/O. All floats are serialized with repr() (shortest round-trip form).
# ---------------------------------------------------------------------------

def _grid_header(grid: Grid2) -> str:
    return f"# grid xi_min={float(grid.xi_min)!r} xi_max={float(grid.xi_max)!r} n_bins={int(grid.n_bins)}\n"


def _parse_grid_header(line: str, path: str) -> Grid2:
    try:
        parts = dict(tok.split("=", 1) for tok in line.removeprefix("# grid").split())
        return Grid2(float(parts["xi_min"]), float(parts["xi_max"]), int(parts["n_bins"]))
    except Exception as exc:
        raise ValueError(f"{path}:1: malformed grid header: {line.strip()!r}") from exc


def write_vector_field(path, vf: VectorField2) -> None:
    nb = vf.grid.n_bins
    c = vf.grid.center_coords()
    counts = vf.counts if vf.counts is not None else np.ones((nb, nb), dtype=int)
    with open(path, "w") as fh:
        fh.write(_grid_header(vf.grid))
        fh.write("i,j,z1_center,z2_center,count,F1,F2\n")
        for i in range(nb):
            for j in range(nb):
                fh.write(
                    f"{i},{j},{float(c[i])!r},{float(c[j])!r},{int(counts[i, j])},"
                    f"{float(vf.values[i, j, 0])!r},{float(vf.values[i, j, 1])!r}\n"
                )


def read_vector_field(path) -> VectorField2:
    path = str(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# grid"):
        raise ValueError(f"{path}:1: missing grid header")
    grid = _parse_grid_header(lines[0], path)
    nb = grid.n_bins
    values = np.zeros((nb, nb, 2))
    counts = np.zeros((nb, nb))
    if len(lines) != 2 + nb * nb:
        raise ValueError(f"{path}: expected {2 + nb * nb} lines, found {len(lines)}")
    for ln, line in enumerate(lines[2:], start=3):
        try:
            i_s, j_s, _, _, cnt, f1, f2 = line.split(",")
            i, j = int(i_s), int(j_s)
            counts[i, j] = float(cnt)
            values[i, j] = (float(f1), float(f2))
        except Exception as exc:
            raise ValueError(f"{path}:{ln}: malformed row: {line!r}") from exc
    return VectorField2(values, grid, counts)


def write_scalar_field(path, sf: ScalarField) -> None:
    nn = sf.grid.n_nodes
    x = sf.grid.node_coords()
    with open(path, "w") as fh:
        fh.write(_grid_header(sf.grid))
        fh.write("i,j,x,y,A\n")
        for i in range(nn):
            for j in range(nn):
                fh.write(f"{i},{j},{float(x[i])!r},{float(x[j])!r},{float(sf.values[i, j])!r}\n")


def read_scalar_field(path) -> ScalarField:
    path = str(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# grid"):
        raise ValueError(f"{path}:1: missing grid header")
    grid = _parse_grid_header(lines[0], path)
    nn = grid.n_nodes
    values = np.zeros((nn, nn))
    for ln, line in enumerate(lines[2:], start=3):
        try:
            i_s, j_s, _, _, a = line.split(",")
            values[int(i_s), int(j_s)] = float(a)
        except Exception as exc:
            raise ValueError(f"{path}:{ln}: malformed row: {line!r}") from exc
    return ScalarField(values, grid)


def write_weight_field(path, wf: WeightField) -> None:
    nb = wf.grid.n_bins
    c = wf.grid.center_coords()
    with open(path, "w") as fh:
        fh.write(_grid_header(wf.grid))
        fh.write("i,j,z1_center,z2_center,phi\n")
        for i in range(nb):
            for j in range(nb):
                fh.write(f"{i},{j},{float(c[i])!r},{float(c[j])!r},{float(wf.values[i, j])!r}\n")


def read_weight_field(path) -> WeightField:
    path = str(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# grid"):
        raise ValueError(f"{path}:1: missing grid header")
    grid = _parse_grid_header(lines[0], path)
    nb = grid.n_bins
    values = np.zeros((nb, nb))
    for ln, line in enumerate(lines[2:], start=3):
        try:
            i_s, j_s, _, _, w = line.split(",")
            values[int(i_s), int(j_s)] = float(w)
        except Exception as exc:
            raise ValueError(f"{path}:{ln}: malformed row: {line!r}") from exc
    return WeightField(values, grid)
