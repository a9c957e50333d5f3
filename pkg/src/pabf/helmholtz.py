"""Projection of binned vector field estimates onto discrete gradients.

The estimated mean force lives as one constant 2-vector per bin. Projecting it
onto a gradient means finding the nodal Q1 potential A whose bin-center
gradients are closest to the data:

    A = argmin sum_bins delta^2 phi_bin |grad(A)(center) - F_bin|^2

with phi an optional positive per-bin weight (a density estimate). The normal
equations of this least-squares problem are the Q1 Poisson weak form with
bin-center (one-point) quadrature for BOTH the stiffness matrix and the right
hand side. That choice makes the map F -> grad(A) an exact orthogonal projector
in the (weighted) per-bin inner product: idempotence, the Pythagoras splitting
|F|^2 = |F - grad A|^2 + |grad A|^2 and the variance-reduction identity all
hold to solver precision, and the manufactured-solution L2 error still decays
at second order. (Exact Gauss integration of the stiffness would break these
identities at O(delta^2).)

The one-point gradient operator annihilates two nodal modes: constants and, on
grids with an even number of bins, the checkerboard (-1)^(i+j). The singular
system is regularized by appending one linear constraint per nullvector
(bordered saddle-point system); returned potentials carry the zero-mean gauge
and zero checkerboard content. Geometry is either the closed rectangle
(natural/Neumann boundary) or the periodic torus.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import Grid2, ScalarField, VectorField2, WeightField

_RESIDUAL_TOL = 1e-10

# corner sign patterns for the bilinear shape functions, order n00 n10 n01 n11
_SX = np.array([-1.0, 1.0, -1.0, 1.0])
_SY = np.array([-1.0, -1.0, 1.0, 1.0])


class SolverError(RuntimeError):
    """Linear solve failed or left a residual above tolerance."""


class _Projector:
    """Assembled structure for one (grid, geometry); reusable across solves."""

    def __init__(self, grid: Grid2, periodic: bool):
        self.grid = grid
        self.periodic = periodic
        nb = grid.n_bins
        nn = nb + 1

        ii, jj = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
        if periodic:
            self.n_dof = nb * nb

            def node(a, b):
                return (a % nb) * nb + (b % nb)
        else:
            self.n_dof = nn * nn

            def node(a, b):
                return a * nn + b

        # corner node ids per element, shape (4, nb*nb)
        self.corners = np.stack(
            [node(ii, jj).ravel(), node(ii + 1, jj).ravel(), node(ii, jj + 1).ravel(), node(ii + 1, jj + 1).ravel()]
        )

        # nullspace: constants always; the checkerboard mode (invisible to
        # bin-center gradients) when representable. One zero-sum constraint per
        # nullvector is appended to the system (bordered saddle point).
        cons = [np.ones(self.n_dof)]
        if not periodic or nb % 2 == 0:
            if periodic:
                ci, cj = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
            else:
                ci, cj = np.meshgrid(np.arange(nn), np.arange(nn), indexing="ij")
            cons.append(((-1.0) ** (ci + cj)).ravel())
        self.constraints = cons

        self._unweighted_lu = None
        self._unweighted_m = None

    # -- assembly -----------------------------------------------------------

    def stiffness(self, phi: np.ndarray | None) -> sp.csr_matrix:
        """K = sum_e phi_e delta^2 (gx gx^T + gy gy^T) with bin-center gradients."""
        ne = self.grid.n_bins**2
        w = np.ones(ne) if phi is None else np.asarray(phi, dtype=float).ravel()
        rows, cols, vals = [], [], []
        for a in range(4):
            for b in range(4):
                coef = 0.25 * (_SX[a] * _SX[b] + _SY[a] * _SY[b])
                if coef == 0.0:
                    continue
                rows.append(self.corners[a])
                cols.append(self.corners[b])
                vals.append(coef * w)
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_dof, self.n_dof),
        ).tocsr()

    def rhs(self, f_values: np.ndarray, phi: np.ndarray | None) -> np.ndarray:
        """b = delta^2 D^T (phi F), accumulated per corner."""
        delta = self.grid.delta
        f1 = f_values[..., 0].ravel()
        f2 = f_values[..., 1].ravel()
        if phi is not None:
            w = np.asarray(phi, dtype=float).ravel()
            f1, f2 = f1 * w, f2 * w
        b = np.zeros(self.n_dof)
        for a in range(4):
            b += np.bincount(
                self.corners[a], weights=0.5 * delta * (_SX[a] * f1 + _SY[a] * f2), minlength=self.n_dof
            )
        return b

    # -- solves ---------------------------------------------------------------

    def solve(
        self,
        f_values: np.ndarray,
        phi: np.ndarray | None = None,
        solver: str = "direct",
        tol: float = 1e-12,
    ) -> np.ndarray:
        """Nodal potential (n_bins+1, n_bins+1) for bin data (n_bins, n_bins, 2)."""
        b = self.rhs(f_values, phi)
        if solver == "direct":
            a = self._solve_direct(b, phi)
        elif solver == "cg":
            a = self._solve_cg(b, phi, tol)
        else:
            raise ValueError(f"unknown solver {solver!r}")
        return self._expand(self._gauge(a))

    def _gauge(self, a: np.ndarray) -> np.ndarray:
        for c in self.constraints:
            a = a - (c @ a) / (c @ c) * c
        return a

    def _bordered(self, k: sp.csr_matrix) -> sp.csc_matrix:
        c = sp.csc_matrix(np.stack(self.constraints, axis=1))
        z = sp.csc_matrix((len(self.constraints), len(self.constraints)))
        return sp.bmat([[k, c], [c.T, z]], format="csc")

    def _solve_direct(self, b: np.ndarray, phi: np.ndarray | None) -> np.ndarray:
        rhs = np.concatenate([b, np.zeros(len(self.constraints))])
        if phi is None:
            if self._unweighted_lu is None:
                self._unweighted_m = self._bordered(self.stiffness(None))
                self._unweighted_lu = spla.splu(self._unweighted_m)
            m, lu = self._unweighted_m, self._unweighted_lu
        else:
            m = self._bordered(self.stiffness(phi))
            lu = spla.splu(m)
        x = lu.solve(rhs)
        resid = np.linalg.norm(m @ x - rhs)
        scale = max(np.linalg.norm(rhs), 1e-300)
        if resid / scale > _RESIDUAL_TOL:
            raise SolverError(f"direct solve residual {resid / scale:.3e} above {_RESIDUAL_TOL}")
        return x[: self.n_dof]

    def _solve_cg(self, b: np.ndarray, phi: np.ndarray | None, tol: float) -> np.ndarray:
        k = self.stiffness(phi)
        cons = [c / np.linalg.norm(c) for c in self.constraints]
        alpha = float(k.diagonal().mean())

        def project_out(v):
            for c in cons:
                v = v - (c @ v) * c
            return v

        b = project_out(b)

        def matvec(v):
            r = k @ v
            for c in cons:
                r = r + alpha * (c @ v) * c
            return r

        op = spla.LinearOperator((self.n_dof, self.n_dof), matvec=matvec)
        x, info = spla.cg(op, b, rtol=tol, atol=0.0, maxiter=20 * self.n_dof)
        if info != 0:
            raise SolverError(f"cg failed to converge (info={info})")
        x = project_out(x)
        resid = np.linalg.norm(k @ x - b)
        scale = max(np.linalg.norm(b), 1e-300)
        if resid / scale > max(tol * 100, _RESIDUAL_TOL):
            raise SolverError(f"cg residual {resid / scale:.3e} above tolerance")
        return x

    def _expand(self, a: np.ndarray) -> np.ndarray:
        nb = self.grid.n_bins
        if self.periodic:
            core = a.reshape(nb, nb)
            full = np.empty((nb + 1, nb + 1))
            full[:nb, :nb] = core
            full[nb, :nb] = core[0]
            full[:, nb] = full[:, 0]
        else:
            full = a.reshape(nb + 1, nb + 1)
        return full - full.mean()


_projector_cache: dict[tuple, _Projector] = {}


def _projector(grid: Grid2, periodic: bool) -> _Projector:
    key = (grid.xi_min, grid.xi_max, grid.n_bins, periodic)
    proj = _projector_cache.get(key)
    if proj is None:
        proj = _Projector(grid, periodic)
        _projector_cache[key] = proj
    return proj


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def project_neumann(f: VectorField2, solver: str = "direct", tol: float = 1e-12) -> ScalarField:
    """Project onto a gradient on the closed rectangle (natural boundary)."""
    values = np.asarray(f.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite entries in the field to project")
    proj = _projector(f.grid, periodic=False)
    return ScalarField(proj.solve(values, None, solver, tol), f.grid)


def project_periodic_weighted(
    f: VectorField2,
    phi: WeightField | None = None,
    solver: str = "direct",
    tol: float = 1e-12,
) -> ScalarField:
    """Project onto a gradient on the torus, optionally phi-weighted.

    With phi = None (or uniform) this is the plain periodic Helmholtz
    projection; weights must be strictly positive and enter both the operator
    and the right-hand side, so any global rescaling of phi cancels.
    """
    values = np.asarray(f.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite entries in the field to project")
    proj = _projector(f.grid, periodic=True)
    w = None
    if phi is not None:
        if phi.grid != f.grid:
            raise ValueError("weight grid does not match field grid")
        w = phi.values
    return ScalarField(proj.solve(values, w, solver, tol), f.grid)


def project_1d(values: np.ndarray) -> np.ndarray:
    """1D periodic analogue: a derivative integrates to zero, so subtract the mean."""
    values = np.asarray(values, dtype=float)
    return values - values.mean()


def gradient_at_bins(a: ScalarField) -> VectorField2:
    """Bin-center gradient of a nodal potential (the Q1 shape-function gradient)."""
    v = a.values
    delta = a.grid.delta
    gx = (v[1:, :-1] + v[1:, 1:] - v[:-1, :-1] - v[:-1, 1:]) / (2.0 * delta)
    gy = (v[:-1, 1:] + v[1:, 1:] - v[:-1, :-1] - v[1:, :-1]) / (2.0 * delta)
    return VectorField2(np.stack([gx, gy], axis=-1), a.grid)


def weighted_norm2(f_values: np.ndarray, grid: Grid2, phi: np.ndarray | None = None) -> float:
    """Discrete (weighted) squared L2 norm of a bin field: sum delta^2 phi |F|^2."""
    w = 1.0 if phi is None else phi[..., None]
    return float((grid.delta**2) * np.sum(w * f_values**2))
