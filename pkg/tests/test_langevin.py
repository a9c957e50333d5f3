import numpy as np
import pytest

from pabf.fields import Grid2
from pabf.langevin import (
    ReplicaEnsemble,
    RunSetup,
    ToyModel,
    TrimerModel,
    UnstableStepError,
    confining_energy,
    run,
    step,
)
from pabf.potentials import PairPotentialParams, ToyPotential

TOY_GRID = Grid2(0.0, 1.0, 16)
TRIMER_GRID = Grid2(-0.2, 1.2, 50)


def toy_setup(**kw):
    base = dict(
        model=ToyModel(ToyPotential(2, barrier=1.0, transverse=0.5)),
        grid=TOY_GRID,
        mode="abf",
        beta=1.0,
        dt=5e-4,
        n_steps=200,
        n_replicas=8,
        seed=3,
        projection_stride=10,
        diag_stride=0,
    )
    base.update(kw)
    return RunSetup(**base)


class TestConfiningEnergy:
    BOUNDS = (-0.2, 1.2)

    def test_zero_inside(self):
        w, g = confining_energy(np.array([[0.5, 0.5]]), self.BOUNDS)
        assert w[0] == 0.0
        np.testing.assert_array_equal(g, 0.0)

    def test_one_side_active(self):
        w, g = confining_energy(np.array([[1.3, 0.5]]), self.BOUNDS)
        assert w[0] == pytest.approx(0.01)
        np.testing.assert_allclose(g[0], [0.2, 0.0], atol=1e-15)

    def test_both_components_active(self):
        w, _ = confining_energy(np.array([[-0.3, 1.4]]), self.BOUNDS)
        assert w[0] == pytest.approx(0.05)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        h = 1e-7
        z = rng.uniform(-0.6, 1.6, size=(40, 2))
        _, g = confining_energy(z, self.BOUNDS)
        for k in range(2):
            zp, zm = z.copy(), z.copy()
            zp[:, k] += h
            zm[:, k] -= h
            wp, _ = confining_energy(zp, self.BOUNDS)
            wm, _ = confining_energy(zm, self.BOUNDS)
            np.testing.assert_allclose(g[:, k], (wp - wm) / (2 * h), atol=1e-6)


class TestStep:
    def test_mode_none_ignores_bias(self):
        model = ToyModel(ToyPotential(2, barrier=1.0, transverse=0.5))
        e1 = ReplicaEnsemble.create(model, 4, seed=1)
        e2 = ReplicaEnsemble.create(model, 4, seed=1)
        huge = np.full((16, 16, 2), 1e3)
        step(e1, huge, "none", model, TOY_GRID, beta=1.0, dt=1e-3)
        step(e2, None, "none", model, TOY_GRID, beta=1.0, dt=1e-3)
        np.testing.assert_array_equal(e1.coords, e2.coords)

    def test_deterministic_drift_free_limit(self):
        model = ToyModel(ToyPotential(2, barrier=0.0, transverse=0.0))
        ens = ReplicaEnsemble.create(model, 4, seed=1)
        x0 = ens.coords.copy()
        step(ens, None, "none", model, TOY_GRID, beta=np.inf, dt=1e-3)
        np.testing.assert_array_equal(ens.coords, x0)

    def test_brownian_variance_law(self):
        # V = 0, beta = 1: Var per coordinate after n steps is 2 n dt
        model = ToyModel(ToyPotential(2, barrier=0.0, transverse=0.0))
        n_rep, n_steps, dt = 60_000, 10, 5e-4
        ens = ReplicaEnsemble.create(model, n_rep, seed=9)
        x0 = ens.coords.copy()
        noise = np.empty_like(ens.coords)
        for _ in range(n_steps):
            step(ens, None, "none", model, TOY_GRID, beta=1.0, dt=dt, noise=noise)
        disp = ens.coords - x0
        disp -= np.rint(disp)  # minimum image on the unit torus
        var = disp.var(axis=0).mean()
        assert var == pytest.approx(2 * n_steps * dt, rel=0.05)

    def test_positions_stay_wrapped(self):
        model = ToyModel(ToyPotential(2, barrier=2.0, transverse=1.0))
        ens = ReplicaEnsemble.create(model, 8, seed=2)
        for _ in range(50):
            step(ens, None, "abf", model, TOY_GRID, beta=1.0, dt=1e-3)
        assert np.all(ens.coords >= 0.0) and np.all(ens.coords < 1.0)

    def test_nonfinite_coordinates_raise_with_replica(self):
        model = ToyModel(ToyPotential(2, barrier=1.0, transverse=0.5))
        ens = ReplicaEnsemble.create(model, 4, seed=1)
        ens.coords[2, 0] = np.inf
        with np.errstate(invalid="ignore"):  # sin(inf) en route to the guard
            with pytest.raises(UnstableStepError, match="replica 2"):
                step(ens, None, "none", model, TOY_GRID, beta=1.0, dt=1e-3)

    def test_unknown_mode_rejected(self):
        model = ToyModel(ToyPotential(2))
        ens = ReplicaEnsemble.create(model, 2, seed=1)
        with pytest.raises(ValueError):
            step(ens, None, "metadynamics", model, TOY_GRID, beta=1.0, dt=1e-3)


class TestRun:
    def test_zero_steps_returns_initial_state(self):
        setup = toy_setup(n_steps=0)
        records = list(run(setup))
        assert len(records) == 1
        assert records[0].time == 0.0
        model = setup.model
        fresh = ReplicaEnsemble.create(model, setup.n_replicas, setup.seed)
        np.testing.assert_array_equal(records[0].ensemble.coords, fresh.coords)

    def test_determinism_bit_identical(self):
        recs1 = list(run(toy_setup(mode="pabf", diag_stride=50)))
        recs2 = list(run(toy_setup(mode="pabf", diag_stride=50)))
        assert len(recs1) == len(recs2)
        for r1, r2 in zip(recs1, recs2):
            np.testing.assert_array_equal(r1.ensemble.coords, r2.ensemble.coords)
            np.testing.assert_array_equal(r1.mean_force.values, r2.mean_force.values)
            np.testing.assert_array_equal(r1.bias.values, r2.bias.values)

    def test_zero_bias_equivalence(self):
        # potential independent of (x1, x2): every deposited sample is zero, so
        # the abf bias stays zero and the trajectory matches mode none exactly
        pot = ToyPotential(3, barrier=0.0, transverse=0.0, axial_well=1.0, coupling=0.0)
        rec_abf = list(run(toy_setup(model=ToyModel(pot), mode="abf", n_steps=300)))[-1]
        rec_none = list(run(toy_setup(model=ToyModel(pot), mode="none", n_steps=300)))[-1]
        np.testing.assert_array_equal(rec_abf.ensemble.coords, rec_none.ensemble.coords)
        assert np.all(rec_abf.mean_force.values == 0.0)

    def test_stride_zero_keeps_bias_off(self):
        pot = ToyPotential(2, barrier=1.0, transverse=0.5)
        rec_abf = list(run(toy_setup(model=ToyModel(pot), mode="abf", projection_stride=0, n_steps=300)))[-1]
        rec_none = list(run(toy_setup(model=ToyModel(pot), mode="none", n_steps=300)))[-1]
        np.testing.assert_array_equal(rec_abf.ensemble.coords, rec_none.ensemble.coords)

    def test_diag_cadence_and_final_record(self):
        recs = list(run(toy_setup(n_steps=100, diag_stride=30)))
        assert [r.step for r in recs] == [0, 30, 60, 90, 100]
        times = [r.time for r in recs]
        assert times == sorted(times)

    def test_deposits_accumulate_across_run(self):
        rec = list(run(toy_setup(n_steps=100)))[-1]
        assert rec.accumulator.total_deposits == 100 * 8

    def test_pabf_produces_free_energy_snapshots(self):
        rec = list(run(toy_setup(mode="pabf", n_steps=100)))[-1]
        assert rec.free_energy is not None
        assert abs(rec.free_energy.values.mean()) < 1e-12
        assert rec.bias.values.shape == (16, 16, 2)

    def test_marginals_are_probability_vectors(self):
        rec = list(run(toy_setup(n_steps=50)))[-1]
        assert rec.diagnostics.marginal1.sum() == pytest.approx(1.0, abs=1e-12)
        assert rec.diagnostics.marginal2.sum() == pytest.approx(1.0, abs=1e-12)


class TestTrimerRun:
    def test_short_run_tracks_distances_and_wraps(self):
        model = TrimerModel(PairPotentialParams(), 12, 15.0)
        setup = RunSetup(
            model=model, grid=TRIMER_GRID, mode="pabf", beta=1.0, dt=2.5e-4,
            n_steps=100, n_replicas=4, seed=5, projection_stride=20,
            diag_stride=50, distance_stride=10,
        )
        recs = list(run(setup))
        rec = recs[-1]
        t, r1, r2 = rec.distances
        assert len(t) == 11  # steps 0, 10, ..., 100
        assert np.all(r1 > 0) and np.all(r2 > 0)
        assert np.all(rec.ensemble.coords >= 0) and np.all(rec.ensemble.coords < 15.0)
        assert rec.diagnostics.transitions == (0, 0)

    def test_initial_trimer_geometry(self):
        model = TrimerModel(PairPotentialParams(), 20, 15.0)
        rng = np.random.Generator(np.random.Philox(1))
        x = model.initial_coords(rng)
        p = model.params
        assert np.linalg.norm(x[0] - x[1]) == pytest.approx(p.d0, rel=1e-12)
        assert np.linalg.norm(x[2] - x[1]) == pytest.approx(p.d0, rel=1e-12)
        u = (x[0] - x[1]) / p.d0
        v = (x[2] - x[1]) / p.d0
        assert u @ v == pytest.approx(p.cos_theta0, rel=1e-12)
        # solvent safely away from everything
        dv = x[:, None] - x[None, :]
        dv -= 15.0 * np.round(dv / 15.0)
        d = np.sqrt((dv**2).sum(-1)) + np.eye(20) * 1e9
        assert d[3:, :].min() > 0.9 * p.sigma

    def test_replica_zero_trajectory_independent_of_ensemble_size(self):
        # per-replica Philox streams: adding replicas must not change stream 0
        params = PairPotentialParams()
        recs = {}
        for n_rep in (2, 6):
            model = TrimerModel(params, 10, 15.0)
            setup = RunSetup(
                model=model, grid=TRIMER_GRID, mode="none", beta=1.0, dt=2.5e-4,
                n_steps=50, n_replicas=n_rep, seed=7, diag_stride=0,
            )
            recs[n_rep] = list(run(setup))[-1].ensemble.coords[0]
        np.testing.assert_array_equal(recs[2], recs[6])
