import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcl.evolution import (
    CollisionConfig,
    LeakageError,
    NoiseSpec,
    apparent_temperature_distribution,
    collide_cascade,
    collide_single,
    collide_via_unitary,
    iterate_states,
    run_stochastic_ensemble,
    run_trajectory,
    steady_state_analytic,
    steps_to_band,
)
from pcl.fock import (
    CavityState,
    HilbertSpec,
    effective_temperature,
    mean_photon_number,
    partial_trace,
    product_state,
    thermal_state,
    trace_distance,
)
from pcl.kraus import kraus_cascade, kraus_single
from pcl.phaseonium import NoSteadyStateError, PhaseoniumParams, make_phaseonium, steady_temperature

from conftest import interior_state

HOT = PhaseoniumParams(0.25, 2.404315987)
COLD = PhaseoniumParams(0.25, 1.585589386)


class TestCollideSingle:
    def test_gibbs_fixed_point(self):
        space = HilbertSpec(40, 2)
        rho = steady_state_analytic(HOT, space)
        out = collide_single(rho, kraus_single(HOT, 0.4, space))
        assert np.max(np.abs(out.matrix - rho.matrix)) < 1e-12
        assert trace_distance(out, rho) < 1e-11

    def test_theta_zero(self, rng):
        space = HilbertSpec(12, 2)
        rho = interior_state(space, rng)
        out = collide_single(rho, kraus_single(HOT, 0.0, space), leakage_threshold=1.0)
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-15)

    def test_vacuum_heats(self):
        space = HilbertSpec(10, 2)
        vac = thermal_state(0.0, space)
        theta = 0.4
        out = collide_single(vac, kraus_single(HOT, theta, space))
        via_unitary, _ = collide_via_unitary(vac, make_phaseonium(HOT), theta)
        expected = HOT.gamma_alpha * np.sin(theta * np.sqrt(2)) ** 2 / 2
        assert mean_photon_number(out) == pytest.approx(expected, abs=1e-15)
        assert mean_photon_number(via_unitary) == pytest.approx(expected, abs=1e-14)
        assert expected > 0

    def test_agrees_with_unitary(self, rng):
        space = HilbertSpec(20, 2)
        params = PhaseoniumParams(0.3, 1.0)
        rho = interior_state(space, rng)
        out = collide_single(rho, kraus_single(params, 0.5, space), leakage_threshold=1.0)
        ref, _ = collide_via_unitary(rho, make_phaseonium(params), 0.5)
        assert np.max(np.abs(out.matrix - ref.matrix)) < 1e-10

    def test_leakage_abort(self):
        space = HilbertSpec(6, 1)
        top = np.zeros((6, 6), dtype=complex)
        top[4, 4] = 1.0
        with pytest.raises(LeakageError):
            collide_single(CavityState(top, space), kraus_single(HOT, 0.4, space))

    def test_mode_mismatch(self):
        space = HilbertSpec(6, 1)
        with pytest.raises(ValueError):
            collide_single(thermal_state(0.5, space), kraus_cascade(HOT, 0.4, space))


class TestCollideCascade:
    def test_gibbs_product_fixed_point(self):
        space = HilbertSpec(20, 2)
        star = steady_state_analytic(COLD, space)
        rho = product_state(star, star)
        out = collide_cascade(rho, kraus_cascade(COLD, 0.4, space))
        assert np.max(np.abs(out.matrix - rho.matrix)) < 1e-11

    def test_theta_zero(self, rng):
        space = HilbertSpec(6, 1)
        rho = interior_state(space, rng, 2)
        out = collide_cascade(rho, kraus_cascade(HOT, 0.0, space), leakage_threshold=1.0)
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-15)

    def test_reduced_first_cavity(self, rng):
        space = HilbertSpec(8, 2)
        rho = interior_state(space, rng, 2)
        out = collide_cascade(rho, kraus_cascade(HOT, 0.7, space), leakage_threshold=1.0)
        single = collide_single(partial_trace(rho, 0), kraus_single(HOT, 0.7, space), leakage_threshold=1.0)
        assert np.max(np.abs(partial_trace(out, 0).matrix - single.matrix)) < 1e-10


class TestCollideViaUnitary:
    def test_ancilla_populations_at_gibbs(self):
        space = HilbertSpec(30, 2)
        rho = steady_state_analytic(HOT, space)
        _, eta = collide_via_unitary(rho, make_phaseonium(HOT), 0.4)
        np.testing.assert_allclose(np.diag(eta.matrix), np.diag(make_phaseonium(HOT).matrix), atol=1e-12)
        assert abs(eta.matrix[1, 2] - make_phaseonium(HOT).matrix[1, 2]) > 1e-3

    def test_theta_zero(self, rng):
        space = HilbertSpec(8, 2)
        rho = interior_state(space, rng)
        eta = make_phaseonium(HOT)
        out, post = collide_via_unitary(rho, eta, 0.0)
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-15)
        np.testing.assert_allclose(post.matrix, eta.matrix, atol=1e-15)

    def test_too_large(self):
        with pytest.raises(ValueError):
            collide_via_unitary(thermal_state(0.5, HilbertSpec(80, 2)), make_phaseonium(HOT), 0.1)


class TestSteadyStateAnalytic:
    def test_ratio(self):
        p = steady_state_analytic(HOT, HilbertSpec(40, 2)).populations()
        np.testing.assert_allclose(p[1:] / p[:-1], HOT.ratio, rtol=1e-12)

    def test_vacuum(self):
        p = steady_state_analytic(PhaseoniumParams(0.0, 1.0), HilbertSpec(10, 2)).populations()
        np.testing.assert_array_equal(p, np.eye(10)[0])

    @pytest.mark.parametrize("params", [HOT, COLD, PhaseoniumParams(0.4, 0.3)])
    def test_temperature(self, params):
        t = steady_temperature(params)
        assert t <= 1.5 + 1e-6
        assert abs(effective_temperature(steady_state_analytic(params, HilbertSpec(40, 2))) - t) < 1e-6

    def test_invalid(self):
        with pytest.raises(NoSteadyStateError):
            steady_state_analytic(PhaseoniumParams(0.8, 0.0), HilbertSpec(10, 2))

    @given(
        alpha=st.floats(min_value=0.05, max_value=0.5),
        phi=st.floats(min_value=-2.5, max_value=2.5),
        theta=st.floats(min_value=0.05, max_value=2.5),
    )
    def test_fixed_point_property(self, alpha, phi, theta):
        params = PhaseoniumParams(alpha, phi)
        if not params.ratio < 0.5:
            return
        space = HilbertSpec(40, 2)
        rho = steady_state_analytic(params, space)
        out = collide_single(rho, kraus_single(params, theta, space))
        assert trace_distance(out, rho) < 1e-11


class TestConfig:
    def test_rejects(self):
        with pytest.raises(ValueError):
            CollisionConfig(HOT, dt=0.0)
        with pytest.raises(ValueError):
            CollisionConfig(HOT, dt=0.1, n_steps=0)
        with pytest.raises(ValueError):
            CollisionConfig(HOT, dt=0.1, initial_temperatures=(1.0, 1.0, 1.0))

    def test_noise_bounds(self):
        assert NoiseSpec("dt", 0.2).bounds == (0.02, np.inf)
        assert NoiseSpec("phi", 0.2).bounds == pytest.approx((-(np.pi - 0.05), np.pi - 0.05))
        for bad in ({"target": "omega", "sigma": 0.1}, {"target": "dt", "sigma": -1},
                    {"target": "dt", "sigma": 0.1, "low": 0.0}, {"target": "phi", "sigma": 0.1, "high": 3.2}):
            with pytest.raises(ValueError):
                NoiseSpec(**bad)


class TestTrajectory:
    def test_heating_cascade(self):
        config = CollisionConfig(HOT, dt=0.4, initial_temperatures=(1.0, 1.0), space=HilbertSpec(24, 2))
        rec = run_trajectory(config)
        assert rec.converged_at is not None
        assert abs(rec.T1[-1] - 1.5) < 0.015 and abs(rec.T2[-1] - 1.5) < 0.015
        assert steps_to_band(rec.T1, 1.5) < steps_to_band(rec.T2, 1.5)
        assert len(rec) == rec.n_steps + 1 < config.n_steps + 1

    def test_start_at_target(self):
        t = steady_temperature(COLD)
        config = CollisionConfig(COLD, dt=0.4, n_steps=200, initial_temperatures=(t, t),
                                 space=HilbertSpec(20, 2), stop_on_convergence=False)
        rec = run_trajectory(config)
        assert len(rec) == 201
        assert np.max(np.abs(rec.T1 - t)) < 1e-6 and np.max(np.abs(rec.T2 - t)) < 1e-6
        assert rec.converged_at == 0

    def test_full_length_without_early_exit(self):
        config = CollisionConfig(COLD, dt=0.4, n_steps=120, initial_temperatures=(1.0,), stop_on_convergence=False)
        rec = run_trajectory(config)
        assert len(rec) == 121
        assert np.all(np.isnan(rec.T2))

    def test_state_invariants(self):
        config = CollisionConfig(HOT, dt=0.7, n_steps=60, initial_temperatures=(0.3, 2.0), space=HilbertSpec(30, 2),
                                 stop_on_convergence=False)
        for k, state in iterate_states(config, every=20):
            state.validate(trace_tol=1e-6)

    def test_sector_matches_sparse(self):
        config = CollisionConfig(HOT, dt=0.9, n_steps=80, initial_temperatures=(0.6, 1.0), space=HilbertSpec(24, 2),
                                 stop_on_convergence=False)
        a = run_trajectory(config, method="sector")
        b = run_trajectory(config, method="sparse")
        assert np.max(np.abs(a.T1 - b.T1)) < 1e-12 and np.max(np.abs(a.T2 - b.T2)) < 1e-12
        assert np.max(np.abs(a.purity - b.purity)) < 1e-12
        assert np.max(np.abs(a.final_state.matrix - b.final_state.matrix)) < 1e-13

    def test_correlated_initial_state(self, rng):
        space = HilbertSpec(8, 2)
        rho = interior_state(space, rng, 2)
        config = CollisionConfig(COLD, dt=0.4, n_steps=5, initial_temperatures=(1.0, 1.0), space=space,
                                 stop_on_convergence=False, leakage_threshold=1.0)
        rec = run_trajectory(config, state=rho)
        expected = rho
        for _ in range(5):
            expected = collide_cascade(expected, kraus_cascade(COLD, 0.4, space), leakage_threshold=1.0)
        np.testing.assert_allclose(rec.final_state.matrix, expected.matrix, atol=1e-13)

    def test_reduced_matches_single_run(self):
        space = HilbertSpec(20, 2)
        two = run_trajectory(CollisionConfig(COLD, dt=0.6, n_steps=300, initial_temperatures=(1.0, 0.7), space=space,
                                             stop_on_convergence=False))
        one = run_trajectory(CollisionConfig(COLD, dt=0.6, n_steps=300, initial_temperatures=(1.0,), space=space,
                                             stop_on_convergence=False))
        assert np.max(np.abs(two.n1 - one.n1)) < 1e-9

    def test_mixing(self, rng):
        space = HilbertSpec(40, 2)
        config = CollisionConfig(COLD, dt=0.4, n_steps=600, initial_temperatures=(1.0,), space=space,
                                 stop_on_convergence=False)
        diag = rng.random(40) * np.exp(-np.arange(40) / 1.2)
        starts = [
            thermal_state(0.0, space),
            thermal_state(2.0, space),
            CavityState(np.diag(diag / diag.sum()).astype(complex), space),
        ]
        finals = [run_trajectory(config, state=s).final_state for s in starts]
        for a, b in itertools.combinations(finals, 2):
            assert trace_distance(a, b) < 1e-4

    def test_dt_independent_final_temperature(self):
        temps = []
        for dt in (0.1, 0.4, 1.25):
            config = CollisionConfig(COLD, dt=dt, n_steps=8000, initial_temperatures=(1.0,), space=HilbertSpec(40, 2),
                                     tol=1e-4)
            rec = run_trajectory(config)
            assert rec.converged_at is not None
            temps.append(rec.T1[-1])
        assert max(temps) - min(temps) < 1e-3

    def test_runaway_heating_aborts(self):
        config = CollisionConfig(PhaseoniumParams(0.8, 0.5), dt=0.4, initial_temperatures=(0.5,), space=HilbertSpec(20, 2))
        assert config.target_temperature is None
        with pytest.raises(LeakageError):
            run_trajectory(config)


class TestSteps:
    def test_band(self):
        assert steps_to_band([2.0, 1.6, 1.505, 1.499, 1.5], 1.5) == 2
        assert steps_to_band([1.5, 1.5], 1.5) == 0
        assert steps_to_band([1.0, 1.2, 1.4], 1.5) is None
        assert steps_to_band([1.0, 1.5, 1.3, 1.5], 1.5) == 3


class TestEnsemble:
    def test_requires_noise(self):
        with pytest.raises(ValueError):
            run_stochastic_ensemble(CollisionConfig(HOT, dt=0.4))

    @pytest.mark.parametrize("target", ["dt", "phi"])
    def test_zero_sigma_matches_trajectory(self, target):
        base = CollisionConfig(COLD, dt=0.4, n_steps=60, initial_temperatures=(0.5, 0.5), space=HilbertSpec(16, 2),
                               stop_on_convergence=False)
        ens = run_stochastic_ensemble(
            CollisionConfig(**{**base.__dict__, "noise": NoiseSpec(target, 0.0, n_runs=2, tail=10)})
        )
        ref = run_trajectory(base)
        for run in ens.runs:
            np.testing.assert_array_equal(run.T1, ref.T1)
            np.testing.assert_array_equal(run.T2, ref.T2)
        assert ens.final_T1[1] == 0.0

    def test_worker_count_irrelevant(self):
        config = CollisionConfig(COLD, dt=0.4, n_steps=40, initial_temperatures=(0.5, 0.5), space=HilbertSpec(16, 2),
                                 noise=NoiseSpec("dt", 0.2, n_runs=3, seed=7, tail=10))
        serial = run_stochastic_ensemble(config, jobs=1)
        parallel = run_stochastic_ensemble(config, jobs=2)
        for a, b in zip(serial.runs, parallel.runs):
            np.testing.assert_array_equal(a.T1, b.T1)
            np.testing.assert_array_equal(a.T2, b.T2)
        np.testing.assert_array_equal(serial.mean_T1, parallel.mean_T1)

    def test_runs_differ(self):
        config = CollisionConfig(COLD, dt=0.4, n_steps=30, initial_temperatures=(1.0,), space=HilbertSpec(20, 2),
                                 noise=NoiseSpec("phi", 0.3, n_runs=2, seed=1, tail=10))
        ens = run_stochastic_ensemble(config)
        assert not np.array_equal(ens.runs[0].T1, ens.runs[1].T1)
        assert len(ens.mean_T1) == 31


class TestApparentDistribution:
    def test_degenerate(self):
        summary = apparent_temperature_distribution(HOT, 0.0, n_samples=1000)
        assert summary.mean == pytest.approx(steady_temperature(HOT), abs=1e-12)
        assert summary.mode == pytest.approx(steady_temperature(HOT), abs=1e-12)
        assert summary.skewness == 0.0 and summary.n_rejected == 0

    def test_right_skewed(self):
        summary = apparent_temperature_distribution(HOT, 0.2, n_samples=200_000, seed=3)
        assert summary.skewness > 0
        assert summary.mode < summary.mean

    def test_jensen_gap(self):
        summary = apparent_temperature_distribution(HOT, 0.2, n_samples=1_000_000, seed=5)
        assert summary.mean > summary.temperature_at_mean_phi

    def test_rejections_counted(self):
        summary = apparent_temperature_distribution(HOT, 0.5, n_samples=10_000, seed=2)
        assert summary.n_rejected > 0
        assert summary.n_accepted + summary.n_rejected == 10_000
