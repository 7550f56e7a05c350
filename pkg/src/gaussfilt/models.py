"""Forward/observation model abstractions and SDE discretization.

A ProcessModel maps (step, state, noise) to the next state; an
ObservationModel maps (step, state) to the observation space.  The driving
noise is augmented onto the state so that the same propagation code serves
both the conventional filters and the filters that condition the noise on
the next observation.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch
from .gaussian import Gaussian

_SQRT_EPS = np.sqrt(np.finfo(float).eps)


def finite_difference_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian with per-coordinate step sqrt(eps)*(1+|x_i|)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.shape[0]):
        h = _SQRT_EPS * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((np.atleast_1d(fn(xp)) - np.atleast_1d(fn(xm))) / (2.0 * h))
    return np.column_stack(cols)


@dataclass(frozen=True)
class ProcessModel:
    """Forward map x_{n+1} = propagate(n, x, xi) with xi ~ N(0, noise_cov).

    When ``vectorized`` is set, propagate also accepts stacked inputs of
    shape (m, d) / (m, D) and returns (m, d).
    """

    propagate: Callable
    noise_cov: np.ndarray
    state_dim: int
    noise_dim: int
    jacobian: Callable | None = None  # (n, x, xi) -> d x (d+D)
    vectorized: bool = False

    def full_jacobian(self, n: int, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """d x (d+D) Jacobian of the forward map in the augmented variable."""
        if self.jacobian is not None:
            return np.atleast_2d(self.jacobian(n, x, xi))
        d = self.state_dim

        def fn(z):
            return self.propagate(n, z[:d], z[d:])

        return finite_difference_jacobian(fn, np.concatenate([x, xi]))


@dataclass(frozen=True)
class ObservationModel:
    """Observation map y_n = observe(n, x) + eta_n with eta ~ N(0, obs_cov).

    ``innovation`` computes the residual between an observed and a predicted
    observation; the default is plain subtraction, and models with angular
    components substitute a wrapping residual.  ``wrap_observation``
    normalizes synthetic observations after noise is added.
    """

    observe: Callable
    obs_cov: np.ndarray
    obs_dim: int
    jacobian: Callable | None = None  # (n, x) -> d' x d
    innovation: Callable | None = None
    wrap_observation: Callable | None = None
    vectorized: bool = False

    def at_step(self, n: int) -> "ObsFunction":
        """The observation map frozen at step n, for measurement updates."""
        jac = None
        if self.jacobian is not None:
            jac = lambda x: np.atleast_2d(self.jacobian(n, x))
        return ObsFunction(
            fn=lambda x: np.atleast_1d(self.observe(n, x)),
            jacobian=jac,
            innovation=self.innovation,
            vectorized=self.vectorized,
            out_dim=self.obs_dim,
        )


@dataclass(frozen=True)
class ObsFunction:
    """A concrete observation map handed to the measurement-update kernels."""

    fn: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    innovation: Callable | None = None
    vectorized: bool = False
    out_dim: int | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fn(x)

    def residual(self, y: np.ndarray, predicted: np.ndarray) -> np.ndarray:
        if self.innovation is not None:
            return self.innovation(y, predicted)
        return y - predicted

    def jac(self, x: np.ndarray) -> np.ndarray:
        if self.jacobian is not None:
            return np.atleast_2d(self.jacobian(x))
        return np.atleast_2d(finite_difference_jacobian(lambda z: self.fn(z), np.asarray(x, float)))


@dataclass(frozen=True)
class AugmentedGaussian:
    """Joint belief over the stacked vector [x; xi]."""

    belief: Gaussian
    state_dim: int

    @property
    def noise_dim(self) -> int:
        return self.belief.dim - self.state_dim

    def state_marginal(self) -> Gaussian:
        d = self.state_dim
        return Gaussian(self.belief.mean[:d], self.belief.cov[:d, :d])


@dataclass(frozen=True)
class SdeSpec:
    """Ito SDE dx = b(t,x) dt + s(t,x) dB with simulation step dt and
    ``substeps`` integration steps per observation interval."""

    drift: Callable[[float, np.ndarray], np.ndarray]
    volatility: Callable[[float, np.ndarray], np.ndarray]  # (t, x) -> d x N
    brownian_dim: int
    dt: float
    substeps: int = 1
    state_dim: int = 1
    drift_jacobian: Callable[[float, np.ndarray], np.ndarray] | None = None
    volatility_state_independent: bool = False
    vectorized: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


def discretize_sde(spec: SdeSpec) -> ProcessModel:
    """Euler-Maruyama discretization composed over ``substeps`` increments.

    The noise vector stacks the per-substep Brownian increments, each with
    covariance dt * I_N; state-dependent scaling stays inside the map so the
    noise covariance is constant even for multiplicative noise.
    """
    d, n_brown, m_steps, dt = spec.state_dim, spec.brownian_dim, spec.substeps, spec.dt

    def propagate(n, x, xi):
        x = np.asarray(x, dtype=float)
        for m in range(m_steps):
            t = (n * m_steps + m) * dt
            w = xi[..., m * n_brown:(m + 1) * n_brown]
            if spec.vectorized:
                x = x + dt * spec.drift(t, x) + np.einsum(
                    "...ij,...j->...i", np.broadcast_to(spec.volatility(t, x), x.shape[:-1] + (d, n_brown)), w
                )
            else:
                x = x + dt * spec.drift(t, x) + spec.volatility(t, x) @ w
        return x

    jacobian = None
    if spec.drift_jacobian is not None and spec.volatility_state_independent:
        def jacobian(n, x, xi):
            # Chain rule over substeps: each substep has state Jacobian
            # A_m = I + dt * db/dx and injects s(t_m) into its own noise block.
            jx = np.eye(d)
            noise_cols = np.zeros((d, m_steps * n_brown))
            x = np.asarray(x, dtype=float)
            for m in range(m_steps):
                t = (n * m_steps + m) * dt
                a = np.eye(d) + dt * np.atleast_2d(spec.drift_jacobian(t, x))
                s = np.atleast_2d(spec.volatility(t, x)).reshape(d, n_brown)
                noise_cols = a @ noise_cols
                noise_cols[:, m * n_brown:(m + 1) * n_brown] = s
                jx = a @ jx
                x = x + dt * spec.drift(t, x) + s @ xi[m * n_brown:(m + 1) * n_brown]
            return np.hstack([jx, noise_cols])

    noise_dim = m_steps * n_brown
    return ProcessModel(
        propagate=propagate,
        noise_cov=dt * np.eye(noise_dim),
        state_dim=d,
        noise_dim=noise_dim,
        jacobian=jacobian,
        vectorized=spec.vectorized,
    )


def augment(prior: Gaussian, model: ProcessModel, n: int) -> AugmentedGaussian:
    """Stack the state belief with the (zero-mean) driving noise for step n."""
    if prior.dim != model.state_dim:
        raise DimensionMismatch(
            f"prior dim {prior.dim} does not match model state dim {model.state_dim}"
        )
    dd = model.noise_dim
    mean = np.concatenate([prior.mean, np.zeros(dd)])
    cov = np.zeros((prior.dim + dd, prior.dim + dd))
    cov[:prior.dim, :prior.dim] = prior.cov
    if dd:
        cov[prior.dim:, prior.dim:] = model.noise_cov
    return AugmentedGaussian(Gaussian(mean, cov), prior.dim)


def composed_observation(process: ProcessModel, obs: ObservationModel, n: int) -> ObsFunction:
    """The observation seen through one forward step: X = [x; xi] maps to the
    predicted observation at step n+1.  Nonlinear whenever the dynamics are,
    even for a linear measurement function."""
    d = process.state_dim

    def fn(z):
        return np.atleast_1d(obs.observe(n + 1, process.propagate(n, z[..., :d], z[..., d:])))

    def jacobian(z):
        x, xi = z[:d], z[d:]
        jp = process.full_jacobian(n, x, xi)
        x_next = process.propagate(n, x, xi)
        if obs.jacobian is not None:
            jo = np.atleast_2d(obs.jacobian(n + 1, x_next))
        else:
            jo = finite_difference_jacobian(lambda v: np.atleast_1d(obs.observe(n + 1, v)), x_next)
        return jo @ jp

    return ObsFunction(
        fn=fn,
        jacobian=jacobian,
        innovation=obs.innovation,
        vectorized=process.vectorized and obs.vectorized,
        out_dim=obs.obs_dim,
    )
