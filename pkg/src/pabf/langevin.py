"""Euler-Maruyama integration of the biased overdamped dynamics over a replica
ensemble, with the simulation loop shared by the unbiased, ABF and PABF modes.

Each step advances every replica by

    x <- x + (-grad V + sum_i B_i(xi(x)) grad xi_i - grad(W o xi)) dt
           + sqrt(2 dt / beta) g,

where B is the per-bin bias table (zero for mode "none"; the estimated mean
force for "abf"; the projected gradient for "pabf") looked up piecewise
constant at the replica's bin (clamped to the boundary bin outside the grid),
and W is the quadratic confining wall acting only when the reaction coordinate
leaves the grid (never for periodic toy geometries).

The loop order is: evaluate forces -> deposit local-mean-force samples at the
current positions -> refresh the bias every projection_stride steps -> move.
Every replica draws from its own counter-based (Philox) stream, so
trajectories are reproducible and independent of replica processing order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import helmholtz
from .diagnostics import DiagnosticsRow, TransitionCounter, l2_gradient_error, marginal_histograms, occupancy_histogram
from .fields import Grid2, ScalarField, VectorField2, WeightField
from .force_estimator import BinnedForceAccumulator
from .potentials import PairPotentialParams, ToyPotential, TrimerForceField
from .reaction_coordinate import IdentityCoordinate, TrimerBondCoordinate

BIAS_MODES = ("none", "abf", "pabf")


class UnstableStepError(RuntimeError):
    """A replica produced a non-finite coordinate (time step too large)."""


def confining_energy(z, bounds: tuple[float, float]):
    """Quadratic wall outside [lo, hi]^2: returns (W, grad W) per row of z."""
    lo, hi = bounds
    z = np.asarray(z, dtype=float)
    above = np.maximum(z - hi, 0.0)
    below = np.minimum(z - lo, 0.0)
    w = (above**2 + below**2).sum(axis=-1)
    return w, 2.0 * (above + below)


# ---------------------------------------------------------------------------
# systems the integrator can drive
# ---------------------------------------------------------------------------

class TrimerModel:
    """Trimer in WCA solvent; rectangle RC geometry with confining wall."""

    periodic_rc = False

    def __init__(self, params: PairPotentialParams, n_particles: int, box_length: float):
        self.params = params
        self.n_particles = n_particles
        self.box_length = box_length
        self.forcefield = TrimerForceField(params, n_particles, box_length)
        self.coordinate = TrimerBondCoordinate(params.d0, params.omega, box_length)

    def initial_coords(self, rng: np.random.Generator) -> np.ndarray:
        """Compact trimer at the equilibrium angle, solvent on a jittered lattice."""
        p = self.params
        n, box = self.n_particles, self.box_length
        x = np.zeros((n, 2))
        center = np.array([box / 2.0, box / 2.0])
        theta0 = math.acos(p.cos_theta0)
        x[1] = center
        x[0] = center + p.d0 * np.array([1.0, 0.0])
        x[2] = center + p.d0 * np.array([math.cos(theta0), math.sin(theta0)])

        m = math.ceil(math.sqrt(n + 4))
        spacing = box / m
        min_d2 = (0.9 * p.sigma) ** 2
        placed = 3
        for a in range(m):
            for b in range(m):
                if placed == n:
                    break
                site = (np.array([a, b]) + 0.5) * spacing + rng.uniform(-0.1, 0.1, size=2) * spacing
                dv = x[:placed] - site
                dv -= box * np.round(dv / box)
                if (dv**2).sum(axis=1).min() > min_d2:
                    x[placed] = site
                    placed += 1
        if placed < n:
            raise ValueError(f"could not place {n} particles in box {box}; lower the density")
        return np.mod(x, box)

    def forces_batch(self, x):
        return self.forcefield.forces_batch(x)

    def rc_state(self, x):
        return self.coordinate.rc_state(x)

    def xi_batch(self, x):
        return self.coordinate.xi_batch(x)

    def lmf_batch(self, x, grad_v, beta, state=None):
        return self.coordinate.local_mean_force_batch(x, grad_v, beta, state)

    def apply_rc_forces_batch(self, x, weights, forces, state=None):
        self.coordinate.apply_rc_forces_batch(x, weights, forces, state)


class ToyModel:
    """Smooth periodic potential on the unit torus; identity reaction coordinate."""

    periodic_rc = True

    def __init__(self, potential: ToyPotential):
        self.potential = potential
        self.box_length = 1.0
        self.coordinate = IdentityCoordinate()

    def initial_coords(self, rng: np.random.Generator) -> np.ndarray:
        # the deep well of every shipped term: x1 = 1/4, the rest at 1/2
        x = np.full(self.potential.n_dims, 0.5)
        x[0] = 0.25
        return x

    def forces_batch(self, x):
        return -self.potential.grad_batch(x)

    def rc_state(self, x):
        return self.coordinate.rc_state(x)

    def xi_batch(self, x):
        return self.coordinate.xi_batch(x)

    def lmf_batch(self, x, grad_v, beta, state=None):
        return self.coordinate.local_mean_force_batch(x, grad_v, beta, state)

    def apply_rc_forces_batch(self, x, weights, forces, state=None):
        self.coordinate.apply_rc_forces_batch(x, weights, forces, state)


# ---------------------------------------------------------------------------
# replica ensemble
# ---------------------------------------------------------------------------

@dataclass
class ReplicaEnsemble:
    """Stacked replica coordinates plus one Philox stream per replica."""

    coords: np.ndarray
    rngs: list[np.random.Generator]
    time: float = 0.0

    @property
    def n_replicas(self) -> int:
        return self.coords.shape[0]

    @classmethod
    def create(cls, model, n_replicas: int, seed: int) -> "ReplicaEnsemble":
        children = np.random.SeedSequence(seed).spawn(n_replicas + 1)
        init_rng = np.random.Generator(np.random.Philox(children[0]))
        x0 = model.initial_coords(init_rng)
        coords = np.broadcast_to(x0, (n_replicas,) + x0.shape).copy()
        rngs = [np.random.Generator(np.random.Philox(c)) for c in children[1:]]
        return cls(coords, rngs)


# ---------------------------------------------------------------------------
# one Euler-Maruyama step
# ---------------------------------------------------------------------------

def step(
    ensemble: ReplicaEnsemble,
    bias_values: np.ndarray | None,
    mode: str,
    model,
    grid: Grid2,
    beta: float,
    dt: float,
    noise: np.ndarray | None = None,
    forces: np.ndarray | None = None,
    rc_state=None,
) -> ReplicaEnsemble:
    """Advance all replicas by dt in place (returned for chaining).

    bias_values is the (n_bins, n_bins, 2) bias table (a VectorField2 is also
    accepted); it is ignored for mode "none". noise is an optional
    preallocated buffer; forces and rc_state, when given, must match the
    current coordinates (the forces buffer is consumed as the drift
    accumulator).
    """
    if mode not in BIAS_MODES:
        raise ValueError(f"unknown bias mode {mode!r}")
    if isinstance(bias_values, VectorField2):
        bias_values = bias_values.values
    x = ensemble.coords
    drift = model.forces_batch(x) if forces is None else forces

    if mode != "none":
        if rc_state is None:
            rc_state = model.rc_state(x)
        z = rc_state.z
        rc_w = np.zeros((x.shape[0], 2))
        if bias_values is not None:
            ij = np.floor((z - grid.xi_min) / grid.delta).astype(np.int64)
            np.clip(ij, 0, grid.n_bins - 1, out=ij)
            rc_w += bias_values[ij[:, 0], ij[:, 1]]
        if not model.periodic_rc:
            _, grad_w = confining_energy(z, (grid.xi_min, grid.xi_max))
            rc_w -= grad_w
        model.apply_rc_forces_batch(x, rc_w, drift, rc_state)

    if noise is None:
        noise = np.empty_like(x)
    for k, rng in enumerate(ensemble.rngs):
        rng.standard_normal(out=noise[k])

    x += dt * drift
    x += math.sqrt(2.0 * dt / beta) * noise
    np.mod(x, model.box_length, out=x)
    ensemble.time += dt

    if not np.isfinite(x).all():
        ok = np.isfinite(x.reshape(x.shape[0], -1)).all(axis=1)
        bad = int(np.nonzero(~ok)[0][0])
        raise UnstableStepError(f"non-finite coordinate in replica {bad} at time {ensemble.time:g}")
    return ensemble


# ---------------------------------------------------------------------------
# full simulation loop
# ---------------------------------------------------------------------------

@dataclass
class RunSetup:
    """Everything langevin.run needs, resolved from a SystemConfig."""

    model: TrimerModel | ToyModel
    grid: Grid2
    mode: str
    beta: float
    dt: float
    n_steps: int
    n_replicas: int
    seed: int
    projection_stride: int = 10     # 0 = never refresh the bias
    weighted: bool = False
    solver: str = "direct"
    solver_tol: float = 1e-12
    diag_stride: int = 0            # steps between diagnostics; 0 = final only
    distance_stride: int = 10
    reference: VectorField2 | None = None


@dataclass
class RunRecord:
    """Snapshot emitted at each diagnostics trigger.

    Field and diagnostics entries are freshly computed copies; ensemble and
    accumulator are live references that later steps keep mutating.
    """

    step: int
    time: float
    mean_force: VectorField2
    bias: VectorField2
    free_energy: ScalarField | None
    diagnostics: DiagnosticsRow
    ensemble: ReplicaEnsemble
    accumulator: BinnedForceAccumulator
    distances: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None


def run(setup: RunSetup) -> Iterator[RunRecord]:
    """Drive the simulation, yielding snapshots at the diagnostics cadence.

    Yields an initial record at t = 0 before any step, then one record every
    diag_stride steps and a final one. Deterministic for a fixed setup: two
    generators built from equal setups produce identical records.
    """
    model, grid, mode = setup.model, setup.grid, setup.mode
    if mode not in BIAS_MODES:
        raise ValueError(f"unknown bias mode {mode!r}")
    ensemble = ReplicaEnsemble.create(model, setup.n_replicas, setup.seed)
    acc = BinnedForceAccumulator(grid)
    bias_values = np.zeros((grid.n_bins, grid.n_bins, 2))
    noise = np.empty_like(ensemble.coords)

    is_trimer = isinstance(model, TrimerModel)
    counters = None
    dist_t: list[float] = []
    dist_1: list[float] = []
    dist_2: list[float] = []
    if is_trimer:
        p = model.params
        low, high = p.d1 + p.omega / 2.0, p.d1 + 3.0 * p.omega / 2.0
        counters = (TransitionCounter(low, high), TransitionCounter(low, high))

    def project_current(f_t: VectorField2, rc_state) -> ScalarField:
        if model.periodic_rc:
            phi = None
            if setup.weighted:
                phi = WeightField.from_histogram(occupancy_histogram(rc_state.z, grid), grid)
            return helmholtz.project_periodic_weighted(f_t, phi, setup.solver, setup.solver_tol)
        return helmholtz.project_neumann(f_t, setup.solver, setup.solver_tol)

    def snapshot(step_idx: int, rc_state) -> RunRecord:
        f_t = acc.mean_force_field()
        a_now = None
        if mode == "pabf":
            a_now = project_current(f_t, rc_state)
            bias_now = helmholtz.gradient_at_bins(a_now)
        elif mode == "abf":
            bias_now = f_t
        else:
            bias_now = VectorField2(np.zeros_like(f_t.values), grid)

        est = bias_now if mode == "pabf" else f_t
        err = l2_gradient_error(est, setup.reference) if setup.reference is not None else None
        m1, m2 = marginal_histograms(occupancy_histogram(rc_state.z, grid))
        trans = (counters[0].count, counters[1].count) if counters else (0, 0)
        row = DiagnosticsRow(time=ensemble.time, l2_error=err, marginal1=m1, marginal2=m2, transitions=trans)
        distances = (np.array(dist_t), np.array(dist_1), np.array(dist_2)) if is_trimer else None
        return RunRecord(
            step=step_idx,
            time=ensemble.time,
            mean_force=f_t,
            bias=bias_now,
            free_energy=a_now,
            diagnostics=row,
            ensemble=ensemble,
            accumulator=acc,
            distances=distances,
        )

    def track_distances(step_idx: int, rc_state):
        # xi already carries the bond lengths: r = d0 + 2*omega*xi, replica 0
        p = model.params
        r01 = p.d0 + 2.0 * p.omega * float(rc_state.z[0, 0])
        r12 = p.d0 + 2.0 * p.omega * float(rc_state.z[0, 1])
        counters[0].update(r01)
        counters[1].update(r12)
        if step_idx % setup.distance_stride == 0:
            dist_t.append(ensemble.time)
            dist_1.append(r01)
            dist_2.append(r12)

    state = model.rc_state(ensemble.coords)
    if is_trimer:
        track_distances(0, state)
    yield snapshot(0, state)

    for k in range(setup.n_steps):
        forces = model.forces_batch(ensemble.coords)
        acc.deposit_batch(state.z, model.lmf_batch(ensemble.coords, -forces, setup.beta, state))

        if mode != "none" and setup.projection_stride > 0 and k % setup.projection_stride == 0:
            f_t = acc.mean_force_field()
            if mode == "pabf":
                bias_values = helmholtz.gradient_at_bins(project_current(f_t, state)).values
            else:
                bias_values = f_t.values

        step(ensemble, bias_values, mode, model, grid, setup.beta, setup.dt, noise, forces, state)
        ensemble.time = (k + 1) * setup.dt  # avoid accumulated += rounding
        state = model.rc_state(ensemble.coords)

        if is_trimer:
            track_distances(k + 1, state)

        at_diag = setup.diag_stride > 0 and (k + 1) % setup.diag_stride == 0
        if (at_diag and k + 1 < setup.n_steps) or k + 1 == setup.n_steps:
            yield snapshot(k + 1, state)
