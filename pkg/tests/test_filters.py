"""Filter construction and the sequential estimation loop."""

import numpy as np
import pytest

from gaussfilt import (
    FilterKind,
    Gaussian,
    JointGaussian,
    ObservationModel,
    condition,
    conventional_step,
    run_filter,
    smoothing_step,
)
from gaussfilt.diagnostics import Diagnostics
from gaussfilt.filters import ALL_FAMILIES
from gaussfilt.models import ObsFunction, ProcessModel, augment, composed_observation
from gaussfilt.updates import measurement_update_linear

A, GAMMA, R = 0.9, 0.1, 0.5


def scalar_linear_model():
    process = ProcessModel(
        propagate=lambda n, x, xi: A * x + xi,
        noise_cov=np.array([[GAMMA]]),
        state_dim=1,
        noise_dim=1,
        jacobian=lambda n, x, xi: np.array([[A, 1.0]]),
        vectorized=True,
    )
    obs = ObservationModel(
        observe=lambda n, x: np.asarray(x, dtype=float),
        obs_cov=np.array([[R]]),
        obs_dim=1,
        jacobian=lambda n, x: np.array([[1.0]]),
        vectorized=True,
    )
    return process, obs


def kalman_steps(mean, var, ys):
    """Closed-form scalar Kalman recursion for the test model."""
    out = []
    for y in ys:
        mean, var = A * mean, A * A * var + GAMMA
        gain = var / (var + R)
        mean = mean + gain * (y - mean)
        var = (1.0 - gain) * var
        out.append((mean, var))
    return out


class TestFilterKind:
    def test_labels(self):
        assert FilterKind("LGF").label() == "LGF"
        assert FilterKind("CGF", rule_degree=5).label() == "CGF5"
        assert FilterKind("PGSF", sample_count=200).label() == "PGSF200"

    def test_validation(self):
        with pytest.raises(ValueError):
            FilterKind("EKF")
        with pytest.raises(ValueError):
            FilterKind("CGF", rule_degree=4)
        with pytest.raises(ValueError):
            FilterKind("PGF", sample_count=1)

    def test_family_partitions(self):
        assert FilterKind("LGSF").is_smoothing
        assert not FilterKind("LGF").is_smoothing
        assert FilterKind("CGF").uses_points
        assert FilterKind("PGSF").uses_rng
        assert not FilterKind("CGSF").uses_rng


class TestSingleStep:
    def test_lgf_matches_hand_kalman(self):
        process, obs = scalar_linear_model()
        prior = Gaussian([0.0], [[1.0]])
        out = conventional_step(FilterKind("LGF"), prior, process, obs, [1.0], 0)
        (mean, var), = kalman_steps(0.0, 1.0, [1.0])
        # predictive N(0, 0.91), gain 0.91/1.41
        assert np.isclose(mean, 0.91 / 1.41)
        assert np.isclose(out.mean[0], mean)
        assert np.isclose(out.cov[0, 0], var)

    def test_cgf_matches_lgf_on_linear_model(self):
        process, obs = scalar_linear_model()
        prior = Gaussian([0.0], [[1.0]])
        lgf = conventional_step(FilterKind("LGF"), prior, process, obs, [1.0], 0)
        cgf = conventional_step(FilterKind("CGF"), prior, process, obs, [1.0], 0)
        assert np.max(np.abs(cgf.mean - lgf.mean)) <= 1e-10
        assert np.max(np.abs(cgf.cov - lgf.cov)) <= 1e-10

    def test_uninformative_observation_gives_predictive(self):
        process, _ = scalar_linear_model()
        obs = ObservationModel(
            observe=lambda n, x: np.asarray(x, dtype=float),
            obs_cov=np.array([[1e15]]),
            obs_dim=1,
            jacobian=lambda n, x: np.array([[1.0]]),
        )
        prior = Gaussian([0.0], [[1.0]])
        out = conventional_step(FilterKind("LGF"), prior, process, obs, [5.0], 0)
        assert abs(out.mean[0]) <= 1e-6
        assert abs(out.cov[0, 0] - 0.91) <= 1e-6

    def test_smoothing_step_matches_conventional_on_linear_model(self):
        process, obs = scalar_linear_model()
        prior = Gaussian([0.0], [[1.0]])
        conv = conventional_step(FilterKind("LGF"), prior, process, obs, [1.0], 0)
        smth = smoothing_step(FilterKind("LGSF"), prior, process, obs, [1.0], 0)
        assert np.max(np.abs(smth.mean - conv.mean)) <= 1e-9
        assert np.max(np.abs(smth.cov - conv.cov)) <= 1e-9

    def test_noise_block_mean_nonzero_after_conditioning(self):
        # Conditioning [x; xi] on the next observation leaves a biased noise
        # block whenever the innovation and cross-covariance are nonzero.
        process, obs = scalar_linear_model()
        prior = Gaussian([0.0], [[1.0]])
        aug = augment(prior, process, 0)
        psi = composed_observation(process, obs, 0)
        conditioned = measurement_update_linear(aug.belief, psi, [3.0], obs.obs_cov)
        assert abs(conditioned.mean[1]) > 0.01

    def test_smoothing_bias_analytic_value(self):
        # Random-walk model Phi(x, xi) = x + xi, identity observation,
        # prior N(0,1), Gamma = R = 1, y = 3: the conditioned noise mean is
        # Gamma (C + Gamma + R)^{-1} (y - xbar) = 1.  Cross-checked against
        # exact conditioning of the joint (x, xi, y).
        process = ProcessModel(
            propagate=lambda n, x, xi: x + xi,
            noise_cov=np.array([[1.0]]),
            state_dim=1,
            noise_dim=1,
            jacobian=lambda n, x, xi: np.array([[1.0, 1.0]]),
        )
        obs = ObservationModel(
            observe=lambda n, x: np.asarray(x, dtype=float),
            obs_cov=np.array([[1.0]]),
            obs_dim=1,
            jacobian=lambda n, x: np.array([[1.0]]),
        )
        aug = augment(Gaussian([0.0], [[1.0]]), process, 0)
        psi = composed_observation(process, obs, 0)
        conditioned = measurement_update_linear(aug.belief, psi, [3.0], obs.obs_cov)
        assert abs(conditioned.mean[1] - 1.0) <= 1e-9

        # independent oracle: exact conditioning of the 3-variable joint
        joint = JointGaussian(
            np.zeros(3),
            np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 3.0]]),
            split=2,
        )
        oracle = condition(joint, [3.0])
        assert abs(oracle.mean[1] - 1.0) <= 1e-12
        assert np.max(np.abs(conditioned.mean[:2] - oracle.mean)) <= 1e-9


class TestRunFilter:
    @pytest.mark.parametrize("family", ["LGF", "VGF", "CGF", "LGSF", "VGSF", "CGSF"])
    def test_deterministic_families_match_kalman(self, family):
        process, obs = scalar_linear_model()
        ys = [1.0, -0.3, 0.7, 0.2]
        traj = run_filter(FilterKind(family), process, obs, Gaussian([0.0], [[1.0]]), ys)
        assert traj.error is None
        oracle = kalman_steps(0.0, 1.0, ys)
        for rec, (mean, var) in zip(traj.records[1:], oracle):
            assert abs(rec.posterior.mean[0] - mean) <= 1e-6
            assert abs(rec.posterior.cov[0, 0] - var) <= 1e-6

    def test_two_step_values_frozen(self):
        # First step of the hand recursion: mean 0.91/1.41, var 0.91*0.5/1.41
        oracle = kalman_steps(0.0, 1.0, [1.0, 1.0])
        assert np.isclose(oracle[0][0], 0.6453900709219859)
        assert np.isclose(oracle[0][1], 0.32269503546099293)
        process, obs = scalar_linear_model()
        traj = run_filter(FilterKind("LGF"), process, obs, Gaussian([0.0], [[1.0]]), [1.0, 1.0])
        assert np.isclose(traj.records[1].posterior.mean[0], oracle[0][0])
        assert np.isclose(traj.records[1].posterior.cov[0, 0], oracle[0][1])
        assert np.isclose(traj.records[2].posterior.mean[0], oracle[1][0])

    def test_record_count_and_prior_record(self):
        process, obs = scalar_linear_model()
        prior = Gaussian([0.0], [[1.0]])
        traj = run_filter(FilterKind("LGF"), process, obs, prior, [1.0, 2.0, 3.0])
        assert len(traj.records) == 4
        assert traj.records[0].step == 0
        assert np.array_equal(traj.records[0].posterior.mean, prior.mean)

    def test_empty_observations_rejected(self):
        process, obs = scalar_linear_model()
        with pytest.raises(ValueError):
            run_filter(FilterKind("LGF"), process, obs, Gaussian([0.0], [[1.0]]), [])

    @pytest.mark.parametrize("family", ["PGF", "PGSF"])
    def test_sampling_filters_deterministic_given_seed(self, family):
        process, obs = scalar_linear_model()
        prior = Gaussian([0.0], [[1.0]])
        ys = [1.0, -0.3, 0.7]
        kind = FilterKind(family, sample_count=500)
        a = run_filter(kind, process, obs, prior, ys, np.random.default_rng(42))
        b = run_filter(kind, process, obs, prior, ys, np.random.default_rng(42))
        assert np.array_equal(a.means(), b.means())
        assert np.array_equal(a.covariances(), b.covariances())

    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_posterior_covariances_psd(self, family):
        process, obs = scalar_linear_model()
        traj = run_filter(
            FilterKind(family, sample_count=300),
            process,
            obs,
            Gaussian([0.0], [[1.0]]),
            [1.0, -0.5, 0.2],
            np.random.default_rng(0),
        )
        assert traj.error is None
        for rec in traj.records:
            assert np.linalg.eigvalsh(rec.posterior.cov)[0] >= -1e-9

    def test_variational_fallback_recorded(self):
        # An observation map whose misfit gradient explodes forces the
        # optimizer to give up; the filter must fall back to the linear
        # update and count the event instead of aborting.
        process, _ = scalar_linear_model()
        obs = ObservationModel(
            observe=lambda n, x: np.atleast_1d(1e8 * np.sin(1e8 * x[0])),
            obs_cov=np.array([[1.0]]),
            obs_dim=1,
        )
        from gaussfilt.updates import VariationalSettings

        kind = FilterKind("VGF", variational=VariationalSettings(grad_tol=1e-12, max_iter=2))
        traj = run_filter(kind, process, obs, Gaussian([0.0], [[1.0]]), [0.5])
        assert traj.error is None
        assert traj.records[1].diagnostics.fallbacks == 1


class TestDiagnostics:
    def test_merge(self):
        a = Diagnostics(jitters=1, fallbacks=2, bfgs_iterations=3)
        b = Diagnostics(jitters=4, fallbacks=0, bfgs_iterations=5)
        a.merge(b)
        assert (a.jitters, a.fallbacks, a.bfgs_iterations) == (5, 2, 8)
