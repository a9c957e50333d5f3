"""Pair and angle potentials for the trimer-in-solvent benchmark and toy systems.

The benchmark: N particles in a 2D periodic box of side L. Particles 0,1,2 form
a trimer whose bonds (0-1, 1-2) carry a double-well potential, whose ends (0-2)
interact via Lennard-Jones, and whose bend angle at particle 1 is harmonically
restrained in cos(theta). Everything else (solvent-solvent and solvent-trimer)
interacts through the purely repulsive WCA potential. All pair distances use the
minimum-image convention; with every cutoff well below L/2 that is exact.

Toy systems are smooth trigonometric potentials on the unit torus [0,1)^n used
by the quadrature oracle and the end-to-end sampling checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

_COINCIDENT = 1e-12  # below this separation the force blows up; fail loudly


@numba.njit(cache=True)
def _wca_forces_kernel(x, pi, pj, box, sig2, d02, c24eps, forces):
    """Accumulate WCA pair forces over the pair list; returns min pair d^2."""
    inv_box = 1.0 / box
    min_d2 = 1e300
    for r in range(x.shape[0]):
        for p in range(pi.size):
            i, j = pi[p], pj[p]
            dx = x[r, i, 0] - x[r, j, 0]
            dy = x[r, i, 1] - x[r, j, 1]
            dx -= box * np.rint(dx * inv_box)
            dy -= box * np.rint(dy * inv_box)
            d2 = dx * dx + dy * dy
            if d2 < min_d2:
                min_d2 = d2
            if d2 <= d02:
                inv = sig2 / d2
                s6 = inv * inv * inv
                coef = (c24eps / d2) * (2.0 * s6 * s6 - s6)
                fx = coef * dx
                fy = coef * dy
                forces[r, i, 0] += fx
                forces[r, i, 1] += fy
                forces[r, j, 0] -= fx
                forces[r, j, 1] -= fy
    return min_d2


@numba.njit(cache=True)
def _wca_energy_kernel(x, pi, pj, box, sig2, d02, eps, energies):
    """Accumulate WCA pair energies per replica; returns min pair d^2."""
    inv_box = 1.0 / box
    min_d2 = 1e300
    for r in range(x.shape[0]):
        for p in range(pi.size):
            i, j = pi[p], pj[p]
            dx = x[r, i, 0] - x[r, j, 0]
            dy = x[r, i, 1] - x[r, j, 1]
            dx -= box * np.rint(dx * inv_box)
            dy -= box * np.rint(dy * inv_box)
            d2 = dx * dx + dy * dy
            if d2 < min_d2:
                min_d2 = d2
            if d2 <= d02:
                inv = sig2 / d2
                s6 = inv * inv * inv
                energies[r] += eps + 4.0 * eps * (s6 * s6 - s6)
    return min_d2


@dataclass(frozen=True)
class PairPotentialParams:
    """All trimer-benchmark interaction constants.

    d0 is tied to sigma (WCA cutoff at the LJ minimum, d0 = 2^(1/6) sigma);
    d1 is the compact-bond distance of the double well, omega its half-width
    and h its barrier height.
    """

    sigma: float = 1.0
    epsilon: float = 1.0
    sigma_prime: float = 1.0
    epsilon_prime: float = 0.1
    d0: float = 2.0 ** (1.0 / 6.0)
    d1: float = 2.0 ** (1.0 / 6.0)
    omega: float = 2.0
    h: float = 2.0
    k_theta: float = 1.0
    cos_theta0: float = 1.0 / 3.0

    def __post_init__(self):
        for name in ("sigma", "epsilon", "omega", "h", "k_theta"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not math.isclose(self.d0, 2.0 ** (1.0 / 6.0) * self.sigma, rel_tol=1e-15, abs_tol=0.0):
            raise ValueError("d0 must equal 2^(1/6)*sigma")


@dataclass
class ParticleConfiguration:
    """Positions of N >= 3 particles in [0, L)^2; particles 0,1,2 are the trimer."""

    positions: np.ndarray
    box_length: float

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError(f"positions must be (N, 2), got {self.positions.shape}")
        if self.positions.shape[0] < 3:
            raise ValueError("need at least the 3 trimer particles")
        if self.box_length <= 0.0:
            raise ValueError("box_length must be positive")
        self.positions = np.mod(self.positions, self.box_length)

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]


def minimum_image(dv: np.ndarray, box_length: float) -> np.ndarray:
    """Wrap displacement vectors into [-L/2, L/2]."""
    return dv - box_length * np.rint(dv * (1.0 / box_length))


# ---------------------------------------------------------------------------
# pair/angle terms (scalar or ufunc-style on arrays)
# ---------------------------------------------------------------------------

def wca_energy(d, params: PairPotentialParams):
    """Repulsive WCA pair energy: LJ shifted by epsilon and cut at d0."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("pair distance must be positive")
    s6 = (params.sigma / d) ** 6
    e = params.epsilon + 4.0 * params.epsilon * (s6 * s6 - s6)
    return np.where(d <= params.d0, e, 0.0)[()]


def wca_energy_deriv(d, params: PairPotentialParams):
    """dV_WCA/dd."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("pair distance must be positive")
    s6 = (params.sigma / d) ** 6
    dv = (24.0 * params.epsilon / d) * (s6 - 2.0 * s6 * s6)
    return np.where(d <= params.d0, dv, 0.0)[()]


def double_well_energy(d, params: PairPotentialParams):
    """Bond double well: minima at d1 (compact) and d1+2*omega (stretched), barrier h."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("pair distance must be positive")
    s = (d - params.d1 - params.omega) / params.omega
    return (params.h * (1.0 - s * s) ** 2)[()]


def double_well_energy_deriv(d, params: PairPotentialParams):
    d = np.asarray(d, dtype=float)
    s = (d - params.d1 - params.omega) / params.omega
    return (-4.0 * params.h * (1.0 - s * s) * s / params.omega)[()]


def lj_energy(d, params: PairPotentialParams):
    """Full Lennard-Jones between the trimer end particles."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("pair distance must be positive")
    s6 = (params.sigma_prime / d) ** 6
    return (4.0 * params.epsilon_prime * (s6 * s6 - s6))[()]


def lj_energy_deriv(d, params: PairPotentialParams):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("pair distance must be positive")
    s6 = (params.sigma_prime / d) ** 6
    return ((24.0 * params.epsilon_prime / d) * (s6 - 2.0 * s6 * s6))[()]


def angle_energy(cos_theta, params: PairPotentialParams):
    """Harmonic restraint in cos(theta) on the trimer bend angle."""
    cos_theta = np.asarray(cos_theta, dtype=float)
    if np.any(np.abs(cos_theta) > 1.0 + 1e-12):
        raise ValueError("cosine out of [-1, 1]")
    return (0.5 * params.k_theta * (cos_theta - params.cos_theta0) ** 2)[()]


# ---------------------------------------------------------------------------
# whole-system energy and forces
# ---------------------------------------------------------------------------

class TrimerForceField:
    """Vectorized energy/force kernels for the trimer-in-solvent system.

    Precomputes the WCA pair list (every i<j pair except the three within-trimer
    pairs, which interact only through their bonded terms). Batch methods take
    positions of shape (R, N, 2) for R replicas.
    """

    def __init__(self, params: PairPotentialParams, n_particles: int, box_length: float):
        if n_particles < 3:
            raise ValueError("need at least the 3 trimer particles")
        self.params = params
        self.n_particles = n_particles
        self.box_length = box_length
        iu, ju = np.triu_indices(n_particles, k=1)
        keep = ~((iu < 3) & (ju < 3))
        self._pi = np.ascontiguousarray(iu[keep])
        self._pj = np.ascontiguousarray(ju[keep])

    # -- helpers ----------------------------------------------------------

    def _bond_geometry(self, x: np.ndarray):
        u = minimum_image(x[:, 0] - x[:, 1], self.box_length)   # q1 -> q0
        w = minimum_image(x[:, 1] - x[:, 2], self.box_length)   # q2 -> q1
        lj = minimum_image(x[:, 0] - x[:, 2], self.box_length)
        r01 = np.sqrt(u[:, 0] ** 2 + u[:, 1] ** 2)
        r12 = np.sqrt(w[:, 0] ** 2 + w[:, 1] ** 2)
        r02 = np.sqrt(lj[:, 0] ** 2 + lj[:, 1] ** 2)
        if min(r01.min(), r12.min(), r02.min()) < _COINCIDENT:
            raise ValueError("coincident trimer particles")
        return u, w, lj, r01, r12, r02

    # -- energies ---------------------------------------------------------

    def energy_batch(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        x = np.ascontiguousarray(x, dtype=float)
        e_wca = np.zeros(x.shape[0])
        min_d2 = _wca_energy_kernel(
            x, self._pi, self._pj, self.box_length, p.sigma**2, p.d0**2, p.epsilon, e_wca
        )
        if min_d2 < _COINCIDENT**2:
            raise ValueError("coincident particles (pair distance ~ 0)")
        u, w, lj, r01, r12, r02 = self._bond_geometry(x)
        cos_t = self._cos_theta(u, w, r01, r12)
        return (
            e_wca
            + double_well_energy(r01, p)
            + double_well_energy(r12, p)
            + lj_energy(r02, p)
            + angle_energy(cos_t, p)
        )

    def energy(self, positions: np.ndarray) -> float:
        return float(self.energy_batch(np.asarray(positions, dtype=float)[None])[0])

    # -- forces -----------------------------------------------------------

    def forces_batch(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        x = np.ascontiguousarray(x, dtype=float)
        forces = np.zeros_like(x)

        # WCA pairs: -(dV/dd)/d has a closed polynomial form in 1/d^2
        min_d2 = _wca_forces_kernel(
            x, self._pi, self._pj, self.box_length, p.sigma**2, p.d0**2, 24.0 * p.epsilon, forces
        )
        if min_d2 < _COINCIDENT**2:
            raise ValueError("coincident particles (pair distance ~ 0)")

        # bonded trimer terms
        u, w, lj, r01, r12, r02 = self._bond_geometry(x)
        e01 = u / r01[:, None]
        e12 = w / r12[:, None]
        e02 = lj / r02[:, None]

        g = double_well_energy_deriv(r01, p)[:, None] * e01
        forces[:, 0] -= g
        forces[:, 1] += g
        g = double_well_energy_deriv(r12, p)[:, None] * e12
        forces[:, 1] -= g
        forces[:, 2] += g
        g = lj_energy_deriv(r02, p)[:, None] * e02
        forces[:, 0] -= g
        forces[:, 2] += g

        cos_t, dc0, dc1, dc2 = self._cos_theta_grads(u, w, r01, r12)
        dvdc = (p.k_theta * (cos_t - p.cos_theta0))[:, None]
        forces[:, 0] -= dvdc * dc0
        forces[:, 1] -= dvdc * dc1
        forces[:, 2] -= dvdc * dc2
        return forces

    def forces(self, positions: np.ndarray) -> np.ndarray:
        return self.forces_batch(np.asarray(positions, dtype=float)[None])[0]

    # -- angle geometry ----------------------------------------------------

    @staticmethod
    def _cos_theta(u, w, r01, r12):
        # u = q0-q1 points along the first bond; the second bond vector is -w
        uh = u / r01[:, None]
        vh = -w / r12[:, None]
        return uh[:, 0] * vh[:, 0] + uh[:, 1] * vh[:, 1]

    @staticmethod
    def _cos_theta_grads(u, w, r01, r12):
        uh = u / r01[:, None]
        vh = -w / r12[:, None]
        c = uh[:, 0] * vh[:, 0] + uh[:, 1] * vh[:, 1]
        dc0 = (vh - c[:, None] * uh) / r01[:, None]
        dc2 = (uh - c[:, None] * vh) / r12[:, None]
        dc1 = -dc0 - dc2
        return c, dc0, dc1, dc2


def total_energy(config: ParticleConfiguration, params: PairPotentialParams) -> float:
    """Total potential energy of a configuration (minimum-image distances)."""
    ff = TrimerForceField(params, config.n_particles, config.box_length)
    return ff.energy(config.positions)


def total_forces(config: ParticleConfiguration, params: PairPotentialParams) -> np.ndarray:
    """-grad V per particle, shape (N, 2); analytic derivatives of every term."""
    ff = TrimerForceField(params, config.n_particles, config.box_length)
    return ff.forces(config.positions)


# ---------------------------------------------------------------------------
# toy systems on the unit torus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToyPotential:
    """Smooth periodic potential on [0,1)^n, n in {2,3,4}.

    V = barrier*cos(4 pi x1) + transverse*cos(2 pi x2)
        + axial_well*cos(2 pi x3) + coupling*sin(2 pi x1)*sin(2 pi x3)

    The barrier term is a double well along x1 (minima at 1/4 and 3/4); the
    coupling ties x1 to the integrated-out x3, so the free energy of (x1, x2)
    genuinely differs from the bare (x1, x2) terms.
    """

    n_dims: int = 2
    barrier: float = 1.5
    transverse: float = 0.75
    axial_well: float = 0.0
    coupling: float = 0.0

    def __post_init__(self):
        if self.n_dims not in (2, 3, 4):
            raise ValueError("toy dimension must be 2, 3 or 4")
        if self.n_dims < 3 and (self.axial_well != 0.0 or self.coupling != 0.0):
            raise ValueError("x3 terms require n_dims >= 3")

    def potential(self, x1, x2, x3=0.0):
        """V on broadcastable coordinate arrays (x3 ignored when absent)."""
        two_pi = 2.0 * np.pi
        v = self.barrier * np.cos(2.0 * two_pi * np.asarray(x1)) + self.transverse * np.cos(two_pi * np.asarray(x2))
        if self.n_dims >= 3:
            v = v + self.axial_well * np.cos(two_pi * np.asarray(x3))
            v = v + self.coupling * np.sin(two_pi * np.asarray(x1)) * np.sin(two_pi * np.asarray(x3))
        return v

    def grad_z(self, x1, x2, x3=0.0):
        """(dV/dx1, dV/dx2) on broadcastable arrays; the local mean force integrand."""
        two_pi = 2.0 * np.pi
        g1 = -2.0 * two_pi * self.barrier * np.sin(2.0 * two_pi * np.asarray(x1))
        if self.n_dims >= 3:
            g1 = g1 + two_pi * self.coupling * np.cos(two_pi * np.asarray(x1)) * np.sin(two_pi * np.asarray(x3))
        g2 = -two_pi * self.transverse * np.sin(two_pi * np.asarray(x2))
        return g1, np.broadcast_to(g2, np.broadcast_shapes(np.shape(g1), np.shape(g2))).copy()

    def energy_batch(self, x: np.ndarray) -> np.ndarray:
        """V for coordinates of shape (R, n_dims)."""
        x3 = x[:, 2] if self.n_dims >= 3 else 0.0
        return np.asarray(self.potential(x[:, 0], x[:, 1], x3))

    def grad_batch(self, x: np.ndarray) -> np.ndarray:
        """grad V for coordinates of shape (R, n_dims)."""
        two_pi = 2.0 * np.pi
        g = np.zeros_like(x)
        x3 = x[:, 2] if self.n_dims >= 3 else 0.0
        g1, g2 = self.grad_z(x[:, 0], x[:, 1], x3)
        g[:, 0] = g1
        g[:, 1] = g2
        if self.n_dims >= 3:
            g[:, 2] = -two_pi * self.axial_well * np.sin(two_pi * x[:, 2]) + two_pi * self.coupling * np.sin(
                two_pi * x[:, 0]
            ) * np.cos(two_pi * x[:, 2])
        return g
