"""Benchmark systems: bistable scalar SDE, Lorenz-63, coordinated-turn radar.

Each builder returns a (ProcessModel, ObservationModel) pair; simulate_truth
rolls out a synthetic truth with observations for twin experiments.
"""

from dataclasses import dataclass, field

import numpy as np

from .models import ObservationModel, ProcessModel, SdeSpec, discretize_sde

IDENTITY_OBS = "identity"
SHIFTED_QUADRATIC_OBS = "shifted_quadratic"
QUADRATIC_SHIFT = 0.05


@dataclass(frozen=True)
class BistableSpec:
    """Double-well diffusion dx = beta x (1 - x^2) dt + sigma dB."""

    beta: float = 10.0
    sigma: float = 0.5
    dt: float = 0.01
    substeps: int = 20
    obs_kind: str = IDENTITY_OBS
    obs_var: float = 0.03

    def __post_init__(self):
        if self.beta <= 0 or self.obs_var <= 0:
            raise ValueError("beta and obs_var must be positive")
        if self.obs_kind not in (IDENTITY_OBS, SHIFTED_QUADRATIC_OBS):
            raise ValueError(f"unknown obs_kind {self.obs_kind!r}")


@dataclass(frozen=True)
class Lorenz63Spec:
    """Noisy Lorenz-63 with range observation from a shifted origin."""

    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    g: tuple = (0.0, 0.0, 0.5)
    dt: float = 0.01
    obs_shift: float = 0.5
    obs_var: float = 0.5

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class TurnModelSpec:
    """Planar coordinated turn at an unknown turn rate, range/bearing radar."""

    dt: float = 1.0
    q: float = 1.75e-3
    range_var: float = 100.0
    bearing_var: float = 1e-5

    def __post_init__(self):
        if self.q < 0 or self.range_var <= 0 or self.bearing_var <= 0:
            raise ValueError("q must be >= 0 and observation variances positive")


@dataclass(frozen=True)
class TruthRun:
    """A simulated truth trajectory with one observation per transition."""

    truth: np.ndarray        # (steps + 1, d)
    observations: np.ndarray  # (steps, d')
    seed: int | None = None


def wrap_angle(theta):
    """Wrap angles into (-pi, pi]."""
    out = np.asarray(theta, dtype=float)
    out = -((-out + np.pi) % (2.0 * np.pi) - np.pi)
    return out


def bistable_models(spec: BistableSpec) -> tuple[ProcessModel, ObservationModel]:
    beta, sigma = spec.beta, spec.sigma
    vol = np.array([[sigma]])

    sde = SdeSpec(
        drift=lambda t, x: beta * x * (1.0 - x * x),
        volatility=lambda t, x: vol,
        brownian_dim=1,
        dt=spec.dt,
        substeps=spec.substeps,
        state_dim=1,
        drift_jacobian=lambda t, x: np.array([[beta * (1.0 - 3.0 * x[0] ** 2)]]),
        volatility_state_independent=True,
        vectorized=True,
    )
    process = discretize_sde(sde)

    r = np.array([[spec.obs_var]])
    if spec.obs_kind == IDENTITY_OBS:
        obs = ObservationModel(
            observe=lambda n, x: np.asarray(x, dtype=float),
            obs_cov=r,
            obs_dim=1,
            jacobian=lambda n, x: np.array([[1.0]]),
            vectorized=True,
        )
    else:
        c = QUADRATIC_SHIFT
        obs = ObservationModel(
            observe=lambda n, x: (np.asarray(x, dtype=float) - c) ** 2,
            obs_cov=r,
            obs_dim=1,
            jacobian=lambda n, x: np.array([[2.0 * (x[0] - c)]]),
            vectorized=True,
        )
    return process, obs


def lorenz63_models(spec: Lorenz63Spec) -> tuple[ProcessModel, ObservationModel]:
    s, rho, b = spec.sigma, spec.rho, spec.beta
    vol = np.diag(spec.g).astype(float)

    def drift(t, x):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return np.stack(
            [s * (x2 - x1), rho * x1 - x2 - x1 * x3, x1 * x2 - b * x3], axis=-1
        )

    def drift_jacobian(t, x):
        x1, x2, x3 = x
        return np.array(
            [[-s, s, 0.0], [rho - x3, -1.0, -x1], [x2, x1, -b]]
        )

    sde = SdeSpec(
        drift=drift,
        volatility=lambda t, x: vol,
        brownian_dim=3,
        dt=spec.dt,
        substeps=1,
        state_dim=3,
        drift_jacobian=drift_jacobian,
        volatility_state_independent=True,
        vectorized=True,
    )
    process = discretize_sde(sde)

    shift = spec.obs_shift

    def observe(n, x):
        x = np.asarray(x, dtype=float)
        r = np.asarray(
            np.sqrt((x[..., 0] - shift) ** 2 + x[..., 1] ** 2 + x[..., 2] ** 2)
        )
        return r[..., None]

    def obs_jacobian(n, x):
        rho_x = float(np.sqrt((x[0] - shift) ** 2 + x[1] ** 2 + x[2] ** 2))
        rho_x = max(rho_x, 1e-12)
        return np.array([[(x[0] - shift) / rho_x, x[1] / rho_x, x[2] / rho_x]])

    obs = ObservationModel(
        observe=observe,
        obs_cov=np.array([[spec.obs_var]]),
        obs_dim=1,
        jacobian=obs_jacobian,
        vectorized=True,
    )
    return process, obs


_OMEGA_SMALL = 1e-8


def turn_transition_matrix(omega: float, dt: float) -> np.ndarray:
    """The 5x5 coordinated-turn matrix; entries use their limits near
    omega = 0 (sin(w dt)/w -> dt, (cos(w dt)-1)/w -> 0)."""
    if abs(omega) < _OMEGA_SMALL:
        swo, cwo_m1, one_m_cwo = dt, 0.0, 0.0
        c, s = 1.0, 0.0
    else:
        wd = omega * dt
        c, s = np.cos(wd), np.sin(wd)
        swo = s / omega
        cwo_m1 = (c - 1.0) / omega
        one_m_cwo = (1.0 - c) / omega
    return np.array(
        [
            [1.0, swo, 0.0, cwo_m1, 0.0],
            [0.0, c, 0.0, -s, 0.0],
            [0.0, one_m_cwo, 1.0, swo, 0.0],
            [0.0, s, 0.0, c, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0],
        ]
    )


def turn_models(spec: TurnModelSpec) -> tuple[ProcessModel, ObservationModel]:
    dt = spec.dt
    gamma = np.array(
        [
            [dt**3 / 3.0, dt**2 / 2.0, 0.0, 0.0, 0.0],
            [dt**2 / 2.0, dt, 0.0, 0.0, 0.0],
            [0.0, 0.0, dt**3 / 3.0, dt**2 / 2.0, 0.0],
            [0.0, 0.0, dt**2 / 2.0, dt, 0.0],
            [0.0, 0.0, 0.0, 0.0, spec.q * dt],
        ]
    )

    def propagate(n, x, xi):
        x = np.asarray(x, dtype=float)
        om = x[..., 4]
        small = np.abs(om) < _OMEGA_SMALL
        om_safe = np.where(small, 1.0, om)
        wd = om * dt
        c, s = np.cos(wd), np.sin(wd)
        swo = np.where(small, dt, s / om_safe)
        cwo_m1 = np.where(small, 0.0, (c - 1.0) / om_safe)
        one_m_cwo = np.where(small, 0.0, (1.0 - c) / om_safe)
        px, vx, py, vy = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
        out = np.stack(
            [
                px + swo * vx + cwo_m1 * vy,
                c * vx - s * vy,
                py + one_m_cwo * vx + swo * vy,
                s * vx + c * vy,
                om,
            ],
            axis=-1,
        )
        return out + xi

    def observe(n, x):
        x = np.asarray(x, dtype=float)
        rng_ = np.sqrt(x[..., 0] ** 2 + x[..., 2] ** 2)
        brg = np.arctan2(x[..., 2], x[..., 0])
        return np.stack([rng_, brg], axis=-1)

    def obs_jacobian(n, x):
        px, py = x[0], x[2]
        rho = max(float(np.hypot(px, py)), 1e-12)
        return np.array(
            [
                [px / rho, 0.0, py / rho, 0.0, 0.0],
                [-py / rho**2, 0.0, px / rho**2, 0.0, 0.0],
            ]
        )

    def innovation(y, predicted):
        res = np.asarray(y, dtype=float) - np.asarray(predicted, dtype=float)
        res = np.array(res, dtype=float)
        res[..., 1] = wrap_angle(res[..., 1])
        return res

    def wrap_observation(y):
        y = np.array(y, dtype=float)
        y[..., 1] = wrap_angle(y[..., 1])
        return y

    process = ProcessModel(
        propagate=propagate,
        noise_cov=gamma,
        state_dim=5,
        noise_dim=5,
        vectorized=True,
    )
    obs = ObservationModel(
        observe=observe,
        obs_cov=np.diag([spec.range_var, spec.bearing_var]),
        obs_dim=2,
        jacobian=obs_jacobian,
        innovation=innovation,
        wrap_observation=wrap_observation,
        vectorized=True,
    )
    return process, obs


def psd_sqrt(c: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix via eigendecomposition;
    exact zeros stay exactly zero (needed for degenerate noise blocks)."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    if not c.size:
        return c
    vals, vecs = np.linalg.eigh(0.5 * (c + c.T))
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def simulate_truth(
    process: ProcessModel,
    obs: ObservationModel,
    x0: np.ndarray,
    steps: int,
    rng: np.random.Generator,
    seed: int | None = None,
) -> TruthRun:
    """Roll out the truth and synthetic observations for a twin experiment."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    s_gamma = psd_sqrt(process.noise_cov)
    s_r = psd_sqrt(obs.obs_cov)
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    truth = [x]
    ys = []
    for n in range(steps):
        xi = s_gamma @ rng.standard_normal(process.noise_dim)
        x = np.atleast_1d(process.propagate(n, x, xi))
        y = np.atleast_1d(obs.observe(n + 1, x)) + s_r @ rng.standard_normal(obs.obs_dim)
        if obs.wrap_observation is not None:
            y = obs.wrap_observation(y)
        truth.append(x)
        ys.append(np.atleast_1d(y))
    return TruthRun(np.array(truth), np.array(ys), seed)
