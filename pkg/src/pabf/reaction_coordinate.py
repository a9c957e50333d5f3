"""Reaction coordinates: values, gradients, the Gram matrix G and the local mean force.

Two variants, both with m = 2 output dimensions:

* identity: xi(x) = (x1, x2), the first two coordinates of the flat configuration
  vector. G is the identity, the divergence correction vanishes, and the local
  mean force is simply (d1 V, d2 V).

* trimer bonds: xi_i = (|bond_i| - d0) / (2 omega) for the two trimer bonds.
  The bonds share particle 1, so G has an off-diagonal entry cos(theta)/(2w)^2
  and the full formula

      f_i = sum_j Ginv_ij grad(xi_j).grad(V) - beta^-1 div(sum_j Ginv_ij grad(xi_j))

  is evaluated with analytic derivatives (including the G-inverse gradient part
  of the divergence). det G = (4 - cos^2 theta)/(2w)^4 is bounded away from
  zero, so the degeneracy guard never fires for this coordinate.

The integrator evaluates xi, the local mean force, and the bias pushforward at
the same positions every step; rc_state() packages the shared bond geometry so
it is computed once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .potentials import ParticleConfiguration, TrimerForceField, minimum_image

_DET_FLOOR = 1e-10


class DegenerateCoordinateError(ValueError):
    """Gram matrix of the reaction coordinate is numerically singular."""


@dataclass(frozen=True)
class LocalMeanForceSample:
    """One (xi value, local mean force) pair deposited into the estimator."""

    z: np.ndarray
    f: np.ndarray


@dataclass
class RCState:
    """Per-step reaction-coordinate geometry shared by deposit, bias and wall."""

    z: np.ndarray                     # (R, 2)
    e01: np.ndarray | None = None     # unit q0 - q1, trimer only
    e12: np.ndarray | None = None     # unit q1 - q2, trimer only
    r01: np.ndarray | None = None
    r12: np.ndarray | None = None


class IdentityCoordinate:
    """xi = (x1, x2) on a flat coordinate vector; the theory setting."""

    m = 2

    def __init__(self, box_length: float = 1.0):
        self.box_length = box_length

    def rc_state(self, x: np.ndarray) -> RCState:
        return RCState(z=x[:, :2].copy())

    def xi_batch(self, x: np.ndarray) -> np.ndarray:
        return x[:, :2].copy()

    def xi(self, coords: np.ndarray) -> np.ndarray:
        return np.asarray(coords, dtype=float)[:2].copy()

    def grad_xi(self, coords: np.ndarray) -> np.ndarray:
        n = np.asarray(coords).size
        g = np.zeros((2, n))
        g[0, 0] = 1.0
        g[1, 1] = 1.0
        return g

    def local_mean_force_batch(self, x, grad_v, beta, state: RCState | None = None) -> np.ndarray:
        return grad_v[:, :2].copy()

    def apply_rc_forces_batch(self, x, weights, forces, state: RCState | None = None) -> None:
        """Add sum_i weights[:, i] * grad(xi_i) to a (R, n) force array in place."""
        forces[:, 0] += weights[:, 0]
        forces[:, 1] += weights[:, 1]


class TrimerBondCoordinate:
    """Normalized trimer bond lengths; scaled so 0 = compact, 1 = stretched."""

    m = 2

    def __init__(self, d0: float, omega: float, box_length: float):
        self.d0 = d0
        self.omega = omega
        self.box_length = box_length

    def rc_state(self, x: np.ndarray) -> RCState:
        u = minimum_image(x[:, 0] - x[:, 1], self.box_length)
        w = minimum_image(x[:, 1] - x[:, 2], self.box_length)
        r01 = np.sqrt(u[:, 0] ** 2 + u[:, 1] ** 2)
        r12 = np.sqrt(w[:, 0] ** 2 + w[:, 1] ** 2)
        if min(r01.min(), r12.min()) < 1e-12:
            raise ValueError("zero-length trimer bond")
        z = np.empty((x.shape[0], 2))
        z[:, 0] = (r01 - self.d0) / (2.0 * self.omega)
        z[:, 1] = (r12 - self.d0) / (2.0 * self.omega)
        return RCState(z=z, e01=u / r01[:, None], e12=w / r12[:, None], r01=r01, r12=r12)

    def xi_batch(self, x: np.ndarray) -> np.ndarray:
        return self.rc_state(x).z

    def xi(self, config: ParticleConfiguration) -> np.ndarray:
        return self.rc_state(config.positions[None]).z[0]

    def grad_xi(self, config: ParticleConfiguration) -> np.ndarray:
        """Dense (2, 2N) gradients; xi_1 is supported on particles 0,1 and xi_2 on 1,2."""
        s = self.rc_state(config.positions[None])
        n = config.n_particles
        g = np.zeros((2, 2 * n))
        g[0, 0:2] = s.e01[0] / (2.0 * self.omega)
        g[0, 2:4] = -s.e01[0] / (2.0 * self.omega)
        g[1, 2:4] = s.e12[0] / (2.0 * self.omega)
        g[1, 4:6] = -s.e12[0] / (2.0 * self.omega)
        return g

    def local_mean_force_batch(self, x, grad_v, beta, state: RCState | None = None) -> np.ndarray:
        """Local mean force per replica, shape (R, 2); grad_v is (R, N, 2)."""
        if state is None:
            state = self.rc_state(x)
        two_w = 2.0 * self.omega
        e01, e12, r01, r12 = state.e01, state.e12, state.r01, state.r12
        cos_t = -(e01[:, 0] * e12[:, 0] + e01[:, 1] * e12[:, 1])

        g_diag = 2.0 / two_w**2
        g_off = cos_t / two_w**2
        det = g_diag * g_diag - g_off * g_off
        if det.min() < _DET_FLOOR:
            raise DegenerateCoordinateError(f"|det G| = {det.min():.3e} below {_DET_FLOOR}")
        inv00 = g_diag / det
        inv01 = -g_off / det

        # grad(xi_j) . grad(V)
        d01 = grad_v[:, 0] - grad_v[:, 1]
        d12 = grad_v[:, 1] - grad_v[:, 2]
        a1 = (e01[:, 0] * d01[:, 0] + e01[:, 1] * d01[:, 1]) / two_w
        a2 = (e12[:, 0] * d12[:, 0] + e12[:, 1] * d12[:, 1]) / two_w

        # Laplacians of xi (2D bond lengths: Delta r = 2/r)
        lap1 = 2.0 / (r01 * two_w)
        lap2 = 2.0 / (r12 * two_w)

        # grad(G_12) . grad(xi_j) through grad(cos theta); uh, vh point along the bonds
        uh = e01
        vh = -e12
        dc0 = (vh - cos_t[:, None] * uh) / r01[:, None]
        dc2 = (uh - cos_t[:, None] * vh) / r12[:, None]
        dc1 = -dc0 - dc2
        d0c = dc0 - dc1
        d1c = dc1 - dc2
        t1 = (d0c[:, 0] * e01[:, 0] + d0c[:, 1] * e01[:, 1]) / two_w**3
        t2 = (d1c[:, 0] * e12[:, 0] + d1c[:, 1] * e12[:, 1]) / two_w**3

        # M = Ginv E Ginv with E the off-diagonal flip; grad(Ginv) = -M x grad(G12)
        m00 = 2.0 * inv00 * inv01
        m01 = inv00 * inv00 + inv01 * inv01

        div1 = -(m00 * t1 + m01 * t2) + inv00 * lap1 + inv01 * lap2
        div2 = -(m01 * t1 + m00 * t2) + inv01 * lap1 + inv00 * lap2

        f = np.empty((x.shape[0], 2))
        f[:, 0] = inv00 * a1 + inv01 * a2 - div1 / beta
        f[:, 1] = inv01 * a1 + inv00 * a2 - div2 / beta
        return f

    def apply_rc_forces_batch(self, x, weights, forces, state: RCState | None = None) -> None:
        """Add sum_i weights[:, i] * grad(xi_i) to a (R, N, 2) force array in place."""
        if state is None:
            state = self.rc_state(x)
        two_w = 2.0 * self.omega
        b1 = weights[:, 0, None] * state.e01 / two_w
        b2 = weights[:, 1, None] * state.e12 / two_w
        forces[:, 0] += b1
        forces[:, 1] += b2 - b1
        forces[:, 2] -= b2


def local_mean_force(
    config: ParticleConfiguration,
    coordinate: TrimerBondCoordinate,
    forcefield: TrimerForceField,
    beta: float,
) -> np.ndarray:
    """Single-configuration local mean force for the trimer coordinate."""
    x = config.positions[None]
    grad_v = -forcefield.forces_batch(x)
    return coordinate.local_mean_force_batch(x, grad_v, beta)[0]
