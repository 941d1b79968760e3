"""Diffusion-model numerics with analytic Gaussian stand-ins for the network.

The decoupled model used throughout is the constant-drift instance:
``x_t = (1 - t) x_0 + sqrt(t) eps`` on ``t in [0, 1]``, i.e. attenuation
``gamma_t = 1 - t``, noise variance ``delta_t^2 = t``, and drift ``-x_0``.
Every function takes its noise from the caller; nothing here draws random
numbers on its own.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import (
    BadTimeStep,
    DegenerateAlphaBar,
    DimensionMismatch,
    KindMismatch,
    TimeOutOfRange,
    ValueOutOfRange,
)

ArrayLike = Union[float, np.ndarray]


class ScheduleKind(enum.Enum):
    CONSTANT_DRIFT_DDM = "ddm"
    DDPM = "ddpm"


@dataclass(frozen=True, eq=False)
class Schedule:
    """Noise schedule.

    For ``DDPM`` the arrays are indexed by step ``k = 0..T-1``; ``alphas`` is the
    mean coefficient of ``q(x_k | x_{k-1}) = N(alpha_k x_{k-1}, beta_k I)``
    (``alpha_k = sqrt(1 - beta_k)``) and ``alpha_bars`` the cumulative product of
    ``alpha_k^2``.  The DDM kind has no arrays; use the ``gamma``/``delta_sq``/
    ``drift_coef``/``diffusion_sq`` methods.
    """

    kind: ScheduleKind
    betas: Optional[np.ndarray] = None
    alphas: Optional[np.ndarray] = None
    alpha_bars: Optional[np.ndarray] = None

    @classmethod
    def ddm(cls) -> "Schedule":
        return cls(ScheduleKind.CONSTANT_DRIFT_DDM)

    @classmethod
    def ddpm(cls, betas) -> "Schedule":
        betas = np.asarray(betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise ValueOutOfRange("betas must be a non-empty 1D array")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ValueOutOfRange("betas must lie in (0, 1)")
        alphas = np.sqrt(1.0 - betas)
        alpha_bars = np.cumprod(1.0 - betas)
        return cls(ScheduleKind.DDPM, betas, alphas, alpha_bars)

    @classmethod
    def linear_ddpm(cls, T: int = 1000, beta_start: float = 1e-4,
                    beta_end: float = 0.02) -> "Schedule":
        return cls.ddpm(np.linspace(beta_start, beta_end, T))

    def _require(self, kind: ScheduleKind):
        if self.kind is not kind:
            raise KindMismatch(f"operation needs a {kind.value} schedule, got {self.kind.value}")

    # continuous DDM coefficients
    def gamma(self, t):
        self._require(ScheduleKind.CONSTANT_DRIFT_DDM)
        return 1.0 - np.asarray(t, dtype=np.float64)

    def delta_sq(self, t):
        self._require(ScheduleKind.CONSTANT_DRIFT_DDM)
        return np.asarray(t, dtype=np.float64)

    def drift_coef(self, t):
        """f_t = d log(gamma_t) / dt; diverges at t = 1."""
        self._require(ScheduleKind.CONSTANT_DRIFT_DDM)
        return -1.0 / (1.0 - np.asarray(t, dtype=np.float64))

    def diffusion_sq(self, t):
        """g_t^2 = d(delta_t^2)/dt - 2 f_t delta_t^2."""
        t = np.asarray(t, dtype=np.float64)
        return 1.0 - 2.0 * self.drift_coef(t) * self.delta_sq(t)


@dataclass
class DiffusionState:
    x: np.ndarray
    t: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if not np.all(np.isfinite(self.x)):
            raise ValueOutOfRange("state must be finite")


@dataclass(frozen=True)
class DenoiserOutput:
    f_hat: np.ndarray
    eps_hat: np.ndarray

    def __post_init__(self):
        if np.shape(self.f_hat) != np.shape(self.eps_hat):
            raise DimensionMismatch("f_hat and eps_hat shapes differ")


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0

    def __post_init__(self):
        w = (self.lambda1, self.lambda2, self.lambda3)
        if min(w) < 0:
            raise ValueOutOfRange("loss weights must be nonnegative")
        if max(w) == 0:
            raise ValueOutOfRange("at least one loss weight must be positive")


# --- DDPM --------------------------------------------------------------------

def ddpm_forward_step(x_prev, step: int, schedule: Schedule, noise):
    schedule._require(ScheduleKind.DDPM)
    a = schedule.alphas[step]
    b = schedule.betas[step]
    return a * np.asarray(x_prev, dtype=np.float64) + math.sqrt(b) * np.asarray(noise)


def score_from_eps(eps_hat, abar_t: float):
    """Score estimate ``-eps_hat / sqrt(1 - abar_t)``."""
    if not 0.0 < abar_t < 1.0:
        raise DegenerateAlphaBar(f"alpha_bar must be in (0, 1), got {abar_t}")
    return -np.asarray(eps_hat, dtype=np.float64) / math.sqrt(1.0 - abar_t)


# --- constant-drift DDM ------------------------------------------------------

def ddm_forward_sample(x0, t: float, noise):
    if not 0.0 <= t <= 1.0:
        raise TimeOutOfRange(f"t must be in [0, 1], got {t}")
    return (1.0 - t) * np.asarray(x0, dtype=np.float64) + math.sqrt(t) * np.asarray(noise)


def ddm_reverse_mean_std(x_t, t: float, dt: float, out: DenoiserOutput):
    if not (0.0 < dt <= t <= 1.0):
        raise BadTimeStep(f"need 0 < dt <= t <= 1, got t={t}, dt={dt}")
    x_t = np.asarray(x_t, dtype=np.float64)
    # integral of a constant drift from t down to t - dt is -dt * f_hat
    mean = x_t - dt * out.f_hat - (dt / math.sqrt(t)) * out.eps_hat
    std = math.sqrt(max(dt * (t - dt) / t, 0.0))
    return mean, std


def ddm_reverse_step(x_t, t: float, dt: float, out: DenoiserOutput, noise):
    mean, std = ddm_reverse_mean_std(x_t, t, dt, out)
    if std == 0.0:
        return mean
    return mean + std * np.asarray(noise)


def gaussian_posterior(x_t, t: float, mu0: float, var0: float):
    """Mean and variance of x_0 given x_t when x_0 ~ N(mu0, var0) per coordinate."""
    x_t = np.asarray(x_t, dtype=np.float64)
    g = 1.0 - t
    denom = g * g * var0 + t
    mean = mu0 + g * var0 * (x_t - g * mu0) / denom
    var = var0 * t / denom
    return mean, var


def gaussian_oracle_denoiser(x_t, t: float, mu0: float, var0: float,
                             noise=None) -> DenoiserOutput:
    """Exact denoiser for a Gaussian data distribution N(mu0, var0).

    Without ``noise`` the estimate of x_0 is the posterior mean.  With
    ``noise`` (standard normal, same shape as ``x_t``) it is a posterior draw
    ``mean + sqrt(var) * noise``; chaining :func:`ddm_reverse_step` on posterior
    draws reproduces the forward marginals exactly at every step size, whereas
    the posterior-mean plug-in under-disperses for coarse steps.
    """
    if var0 < 0:
        raise ValueOutOfRange("var0 must be nonnegative")
    if not 0.0 < t <= 1.0:
        raise TimeOutOfRange(f"t must be in (0, 1], got {t}")
    x_t = np.asarray(x_t, dtype=np.float64)
    x0_hat, post_var = gaussian_posterior(x_t, t, mu0, var0)
    if noise is not None:
        x0_hat = x0_hat + math.sqrt(post_var) * np.asarray(noise)
    eps_hat = (x_t - (1.0 - t) * x0_hat) / math.sqrt(t)
    return DenoiserOutput(-x0_hat, eps_hat)


def ddm_sample_chain(x1, steps: int, denoiser: Callable, rng: np.random.Generator,
                     callback: Optional[Callable] = None, posterior_noise: bool = True):
    """Run ``steps`` uniform reverse steps from t = 1 to t = 0.

    ``denoiser(x, t, noise)`` returns a :class:`DenoiserOutput`; ``noise`` is
    ``None`` unless ``posterior_noise`` is set.  ``callback(k, t, x)`` is called
    after every step with the new time.
    """
    if steps < 1:
        raise BadTimeStep("need at least one step")
    x = np.asarray(x1, dtype=np.float64)
    dt = 1.0 / steps
    for k in range(steps):
        t = 1.0 - k * dt
        # land exactly on 0 at the final step
        step_dt = t if k == steps - 1 else dt
        z_post = rng.standard_normal(x.shape) if posterior_noise else None
        out = denoiser(x, t, z_post)
        x = ddm_reverse_step(x, t, step_dt, out, rng.standard_normal(x.shape))
        if callback is not None:
            callback(k + 1, t - step_dt, x)
    return x


# --- continuous SDE / ODE integrators ----------------------------------------

def reverse_sde_step(x, t: float, dt: float, drift_f, diffusion_g, score, noise):
    """Euler-Maruyama step of the reverse-time SDE, moving from t to t - dt.

    ``drift_f`` and ``score`` may be arrays or callables ``(x, t)``;
    ``diffusion_g`` may be a scalar or a callable ``(t)``.
    """
    if not dt > 0:
        raise BadTimeStep("dt must be positive")
    x = np.asarray(x, dtype=np.float64)
    f = drift_f(x, t) if callable(drift_f) else drift_f
    g = diffusion_g(t) if callable(diffusion_g) else diffusion_g
    s = score(x, t) if callable(score) else score
    return x - (f - g * g * s) * dt + g * math.sqrt(dt) * np.asarray(noise)


def pf_ode_step(x, t: float, dt: float, drift_f, diffusion_g, score):
    """Explicit Euler step of the probability-flow ODE, moving from t to t - dt."""
    if not dt > 0:
        raise BadTimeStep("dt must be positive")
    x = np.asarray(x, dtype=np.float64)
    f = drift_f(x, t) if callable(drift_f) else drift_f
    g = diffusion_g(t) if callable(diffusion_g) else diffusion_g
    s = score(x, t) if callable(score) else score
    return x - (f - 0.5 * g * g * s) * dt


# --- training losses ---------------------------------------------------------

def _mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def loss_drift(f_hat, x0) -> float:
    """Mean of (f_hat + x0)^2: the drift target is -x0."""
    return _mse(f_hat, -np.asarray(x0, dtype=np.float64))


def loss_noise(eps_hat, eps) -> float:
    return _mse(eps_hat, eps)


def loss_recon(z0_hat, z0) -> float:
    return _mse(z0_hat, z0)


def loss_total(ld: float, ln: float, lr: float, weights: LossWeights = LossWeights()) -> float:
    return weights.lambda1 * ld + weights.lambda2 * ln + weights.lambda3 * lr


def kl_std_normal(mu, logvar) -> float:
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    return float(0.5 * np.sum(mu * mu + np.exp(logvar) - 1.0 - logvar))


def vae_loss(recon_sq_err: float, mu, logvar) -> float:
    """Squared-error reconstruction plus KL(N(mu, exp(logvar)) || N(0, I))."""
    return float(recon_sq_err) + kl_std_normal(mu, logvar)
