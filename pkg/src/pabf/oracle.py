"""Independent reference computations for validating the sampling pipeline.

Three oracles, deliberately kept on separate code paths from the production
modules they check:

* exact toy free energy A(z) = -beta^-1 ln int exp(-beta V(z, x3)) dx3 by
  periodic midpoint quadrature with log-sum-exp stabilization;
* the matching conditional mean force by the same quadrature;
* a dense, loop-assembled version of the gradient projection solved with plain
  numpy factorization, for node-wise comparison against the sparse solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Grid2, ScalarField, VectorField2, WeightField
from .potentials import ToyPotential


@dataclass(frozen=True)
class ToySystem:
    """A toy potential plus inverse temperature; geometry is the unit torus."""

    potential: ToyPotential
    beta: float = 1.0


def _quad_points(n_quad: int) -> np.ndarray:
    # midpoint rule on the circle: spectrally accurate for smooth integrands
    return (np.arange(n_quad) + 0.5) / n_quad


def free_energy_values(toy: ToySystem, z1, z2, n_quad: int = 256) -> np.ndarray:
    """A at arbitrary points (up to an additive constant), broadcast over z1, z2."""
    pot, beta = toy.potential, toy.beta
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if pot.n_dims == 2:
        return np.asarray(pot.potential(z1, z2))
    x3 = _quad_points(n_quad)
    logv = -beta * pot.potential(z1[..., None], z2[..., None], x3)
    m = logv.max(axis=-1)
    lse = m + np.log(np.exp(logv - m[..., None]).sum(axis=-1) / n_quad)
    return -lse / beta


def mean_force_values(toy: ToySystem, z1, z2, n_quad: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """grad A = conditional average of (d1 V, d2 V), broadcast over z1, z2."""
    pot, beta = toy.potential, toy.beta
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if pot.n_dims == 2:
        return pot.grad_z(z1, z2)
    x3 = _quad_points(n_quad)
    logv = -beta * pot.potential(z1[..., None], z2[..., None], x3)
    w = np.exp(logv - logv.max(axis=-1)[..., None])
    w /= w.sum(axis=-1)[..., None]
    g1, g2 = pot.grad_z(z1[..., None], z2[..., None], x3)
    return (w * g1).sum(axis=-1), (w * g2).sum(axis=-1)


def reference_free_energy(toy: ToySystem, grid: Grid2, n_quad: int = 256) -> ScalarField:
    """Nodal free energy on the grid, zero-mean gauge."""
    xn, yn = grid.nodes()
    return ScalarField.gauged(free_energy_values(toy, xn, yn, n_quad), grid)


def reference_mean_force(toy: ToySystem, grid: Grid2, n_quad: int = 256) -> VectorField2:
    """Mean force at bin centers."""
    xc, yc = grid.centers()
    g1, g2 = mean_force_values(toy, xc, yc, n_quad)
    return VectorField2(np.stack([g1, g2], axis=-1), grid)


# ---------------------------------------------------------------------------
# dense linear-algebra cross-check of the projection
# ---------------------------------------------------------------------------

def dense_projection_solve(
    f: VectorField2,
    phi: WeightField | None = None,
    periodic: bool = False,
) -> ScalarField:
    """Gradient projection assembled densely, element by element.

    Same weak form as the sparse path (bin-center quadrature, zero-mean and
    zero-checkerboard constraints) but built from explicit loops and solved
    with numpy's dense factorization, so agreement checks cross two genuinely
    different implementations.
    """
    grid = f.grid
    nb = grid.n_bins
    if grid.n_nodes > 60:
        raise ValueError("dense oracle limited to grids of at most 60x60 nodes")
    delta = grid.delta
    nn = nb + 1
    n_dof = nb * nb if periodic else nn * nn

    def node(a, b):
        if periodic:
            return (a % nb) * nb + (b % nb)
        return a * nn + b

    # per-element accumulation of K and b from the bilinear shape gradients
    # evaluated at the element center: grad(phi_c) = (sx, sy) / (2 delta)
    corners = [((0, 0), -1.0, -1.0), ((1, 0), 1.0, -1.0), ((0, 1), -1.0, 1.0), ((1, 1), 1.0, 1.0)]
    k = np.zeros((n_dof, n_dof))
    b = np.zeros(n_dof)
    for i in range(nb):
        for j in range(nb):
            w = 1.0 if phi is None else float(phi.values[i, j])
            f1, f2 = f.values[i, j]
            ids = [node(i + da, j + db) for (da, db), _, _ in corners]
            for a in range(4):
                _, sxa, sya = corners[a]
                b[ids[a]] += 0.5 * delta * w * (sxa * f1 + sya * f2)
                for c in range(4):
                    _, sxc, syc = corners[c]
                    k[ids[a], ids[c]] += 0.25 * w * (sxa * sxc + sya * syc)

    cons = [np.ones(n_dof)]
    if not periodic or nb % 2 == 0:
        size = nb if periodic else nn
        ci, cj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
        cons.append(((-1.0) ** (ci + cj)).ravel())
    c = np.stack(cons, axis=1)
    m = np.block([[k, c], [c.T, np.zeros((c.shape[1], c.shape[1]))]])
    sol = np.linalg.solve(m, np.concatenate([b, np.zeros(c.shape[1])]))[:n_dof]

    if periodic:
        core = sol.reshape(nb, nb)
        full = np.empty((nn, nn))
        full[:nb, :nb] = core
        full[nb, :nb] = core[0]
        full[:, nb] = full[:, 0]
    else:
        full = sol.reshape(nn, nn)
    return ScalarField.gauged(full, grid)
