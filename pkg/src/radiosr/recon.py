"""Edge-guided variational super-resolution of radio maps.

The unknown is the high-resolution amplitude ``A`` (power is ``A**2``).  The
energy is quadratic in ``A``:

    E(A) = l_d * mean_lr (A[s*i, s*j] - sqrt(P_LR[i, j]))^2
         + l_s * mean_hr  w * ((D_x A)^2 + (D_y A)^2)
         + l_h * mean_hr  (1 - K) * (lap(A) + k^2 A)^2

with forward differences ``D`` and the 5-point Laplacian, both using
replicate borders.  ``w`` lowers the smoothness weight on guidance edges and
``(1 - K)`` switches the Helmholtz residual off there.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, ValueOutOfRange
from .grid import Grid2D, RadioMap, amplitude, as_grid
from .helm_edge import EdgeParams, canny, k_edge_map, laplacian5_array, lbp_edge
from .resample import upsample_bilinear


@dataclass(frozen=True)
class FixedStep:
    eta: float


@dataclass(frozen=True)
class BacktrackingLineSearch:
    armijo_c: float = 1e-4
    shrink: float = 0.5
    grow: float = 2.0


@dataclass(frozen=True)
class SrConfig:
    lambda_data: float = 1.0
    lambda_smooth: float = 0.1
    lambda_helm: float = 0.0
    k_eff: float = 0.0
    edge_weight_floor: float = 0.05
    max_iters: int = 500
    grad_tol: float = 1e-6
    step_rule: Union[FixedStep, BacktrackingLineSearch] = field(
        default_factory=BacktrackingLineSearch)

    def __post_init__(self):
        if min(self.lambda_data, self.lambda_smooth, self.lambda_helm, self.k_eff) < 0:
            raise ValueOutOfRange("energy weights and k_eff must be nonnegative")
        if not 0.0 <= self.edge_weight_floor < 1.0:
            raise ValueOutOfRange("edge_weight_floor must be in [0, 1)")
        if self.max_iters < 1 or not self.grad_tol > 0:
            raise ValueOutOfRange("max_iters and grad_tol must be positive")


@dataclass
class SrResult:
    p_hat: RadioMap
    iterations: int
    final_energy: float
    energy_trace: np.ndarray
    converged: bool
    amplitude: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SrProblem:
    """Arrays that stay fixed during one reconstruction."""

    target: np.ndarray       # sqrt(P_LR), n x n
    stride: int
    weights: np.ndarray      # smoothness weights, N x N
    helm_mask: np.ndarray    # 1 - K, N x N
    spacing_h: float = 1.0

    @property
    def hr_shape(self) -> Tuple[int, int]:
        return self.weights.shape

    def check(self, A: np.ndarray):
        s = self.stride
        if A.shape != self.hr_shape or self.helm_mask.shape != self.hr_shape:
            raise DimensionMismatch(f"A {A.shape} vs weights {self.hr_shape}")
        if (self.target.shape[0] * s, self.target.shape[1] * s) != A.shape:
            raise DimensionMismatch(
                f"P_LR {self.target.shape} with stride {s} does not tile {A.shape}")


def build_edge_weights(K, floor: float) -> Grid2D:
    """Smoothness weights ``floor + (1 - floor) * (1 - K)``."""
    g = as_grid(K)
    if g.values.min() < 0.0 or g.values.max() > 1.0:
        raise ValueOutOfRange("guidance values must lie in [0, 1]")
    if not 0.0 <= floor < 1.0:
        raise ValueOutOfRange("floor must be in [0, 1)")
    return g.with_values(floor + (1.0 - floor) * (1.0 - g.values))


def _forward_diffs(A):
    dx = np.zeros_like(A)
    dy = np.zeros_like(A)
    dx[:, :-1] = A[:, 1:] - A[:, :-1]
    dy[:-1, :] = A[1:, :] - A[:-1, :]
    return dx, dy


def _laplacian_adjoint(u: np.ndarray, h: float) -> np.ndarray:
    """Transpose of the replicate-padded 5-point Laplacian applied to ``u``."""
    y = -4.0 * u
    # shift-down neighbor A[min(i+1, H-1)]
    y[1:, :] += u[:-1, :]
    y[-1, :] += u[-1, :]
    # shift-up neighbor A[max(i-1, 0)]
    y[:-1, :] += u[1:, :]
    y[0, :] += u[0, :]
    y[:, 1:] += u[:, :-1]
    y[:, -1] += u[:, -1]
    y[:, :-1] += u[:, 1:]
    y[:, 0] += u[:, 0]
    return y / (h * h)


def _energy_terms(A, prob: SrProblem, config: SrConfig):
    s = prob.stride
    r_data = A[::s, ::s] - prob.target
    dx, dy = _forward_diffs(A)
    r_helm = laplacian5_array(A, prob.spacing_h) + config.k_eff ** 2 * A
    return r_data, dx, dy, r_helm


def energy(A: np.ndarray, prob: SrProblem, config: SrConfig) -> float:
    r_data, dx, dy, r_helm = _energy_terms(A, prob, config)
    e = config.lambda_data * np.mean(r_data * r_data)
    e += config.lambda_smooth * np.mean(prob.weights * (dx * dx + dy * dy))
    if config.lambda_helm:
        e += config.lambda_helm * np.mean(prob.helm_mask * r_helm * r_helm)
    return float(e)


def energy_grad(A: np.ndarray, prob: SrProblem, config: SrConfig) -> np.ndarray:
    s = prob.stride
    n_hr = A.size
    r_data, dx, dy, r_helm = _energy_terms(A, prob, config)
    grad = np.zeros_like(A)
    grad[::s, ::s] += (2.0 * config.lambda_data / r_data.size) * r_data
    c = 2.0 * config.lambda_smooth / n_hr
    gx = c * prob.weights * dx
    gy = c * prob.weights * dy
    grad[:, :-1] -= gx[:, :-1]
    grad[:, 1:] += gx[:, :-1]
    grad[:-1, :] -= gy[:-1, :]
    grad[1:, :] += gy[:-1, :]
    if config.lambda_helm:
        u = (2.0 * config.lambda_helm / n_hr) * prob.helm_mask * r_helm
        grad += _laplacian_adjoint(u, prob.spacing_h) + config.k_eff ** 2 * u
    return grad


def _problem(P_LR, s: int, weights=None, guidance=None, spacing_h=None) -> SrProblem:
    plr = as_grid(P_LR)
    N = (plr.height * s, plr.width * s)
    h = plr.spacing_h / s if spacing_h is None else spacing_h
    K = np.zeros(N) if guidance is None else as_grid(guidance).values
    W = np.ones(N) if weights is None else as_grid(weights).values
    if plr.values.min() < 0.0:
        raise ValueOutOfRange("P_LR must be nonnegative")
    return SrProblem(np.sqrt(plr.values), s, W, 1.0 - K, h)


def sr_energy(A, P_LR, weights, config: SrConfig, s: int, guidance=None) -> float:
    """Energy of amplitude field ``A`` (N x N) for observations ``P_LR`` (n x n).

    ``weights`` are the smoothness weights (None means all ones) and
    ``guidance`` the high-resolution K map masking the Helmholtz term.
    """
    Ag = as_grid(A)
    prob = _problem(P_LR, s, weights, guidance, Ag.spacing_h)
    prob.check(Ag.values)
    return energy(Ag.values, prob, config)


def sr_energy_grad(A, P_LR, weights, config: SrConfig, s: int, guidance=None) -> Grid2D:
    Ag = as_grid(A)
    prob = _problem(P_LR, s, weights, guidance, Ag.spacing_h)
    prob.check(Ag.values)
    return Ag.with_values(energy_grad(Ag.values, prob, config))


def _lipschitz_bound(prob: SrProblem, config: SrConfig) -> float:
    n_lr = prob.target.size
    n_hr = prob.weights.size
    h2 = prob.spacing_h ** 2
    L = 2.0 * config.lambda_data / n_lr
    L += 2.0 * config.lambda_smooth * 8.0 * float(prob.weights.max()) / n_hr
    L += 2.0 * config.lambda_helm * (8.0 / h2 + config.k_eff ** 2) ** 2 / n_hr
    return L


def lift_guidance(guidance, hr_shape) -> Grid2D:
    """Bring an LR guidance map to HR size with align-corners bilinear."""
    g = as_grid(guidance)
    if g.shape == tuple(hr_shape):
        return g
    return upsample_bilinear(g, hr_shape)


def minimize(A0: np.ndarray, prob: SrProblem, config: SrConfig):
    """Projected gradient descent on ``energy`` subject to ``A >= 0``.

    Returns ``(A, trace, iterations, converged)``.
    """
    A = np.maximum(A0, 0.0)
    E = energy(A, prob, config)
    trace = [E]
    rule = config.step_rule
    fixed = isinstance(rule, FixedStep)
    L = _lipschitz_bound(prob, config)
    eta = rule.eta if fixed else (1.0 / L if L > 0 else 1.0)
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        g = energy_grad(A, prob, config)
        pg = np.where((A > 0) | (g < 0), g, 0.0)
        if np.max(np.abs(pg)) < config.grad_tol:
            converged = True
            it -= 1
            break
        if fixed:
            A_new = np.maximum(A - eta * g, 0.0)
            E_new = energy(A_new, prob, config)
            if not math.isfinite(E_new):
                break
        else:
            step = eta
            while True:
                A_new = np.maximum(A - step * g, 0.0)
                E_new = energy(A_new, prob, config)
                if math.isfinite(E_new) and E_new <= E + rule.armijo_c * float(np.sum(g * (A_new - A))):
                    break
                step *= rule.shrink
                if step < 1e-30:
                    A_new = None
                    break
            if A_new is None:
                break
            eta = step * rule.grow
        A, E = A_new, E_new
        trace.append(E)
    else:
        g = energy_grad(A, prob, config)
        pg = np.where((A > 0) | (g < 0), g, 0.0)
        converged = bool(np.max(np.abs(pg)) < config.grad_tol)
        it = config.max_iters
    return A, np.asarray(trace), it, converged


def reconstruct(P_LR, guidance=None, s: int = 4, config: SrConfig = SrConfig(),
                tx_pos=(0.0, 0.0), freq_hz: float = 5.9e9,
                norm_bounds=(0.0, 1.0)) -> SrResult:
    """Reconstruct the N x N power map (N = s * n) from ``P_LR``.

    ``guidance`` is an optional edge map in [0, 1] at LR or HR size.
    """
    plr = as_grid(P_LR)
    if plr.values.min() < 0.0 or plr.values.max() > 1.0:
        raise ValueOutOfRange("P_LR must lie in [0, 1]")
    N = (plr.height * s, plr.width * s)
    if guidance is not None:
        K = lift_guidance(guidance, N)
        K = K.with_values(np.clip(K.values, 0.0, 1.0))
        weights = build_edge_weights(K, config.edge_weight_floor)
    else:
        K = None
        weights = None
    A0 = upsample_bilinear(amplitude(plr).grid, N, stride=s)
    prob = _problem(plr, s, weights, K, A0.spacing_h)
    A, trace, iters, converged = minimize(A0.values, prob, config)
    p = np.clip(A * A, 0.0, 1.0)
    p_hat = RadioMap(Grid2D(p, A0.spacing_h), tx_pos, freq_hz, norm_bounds)
    return SrResult(p_hat, iters, float(trace[-1]), trace, converged, A)


class GuidanceMethod(enum.Enum):
    KEDGE = "kedge"
    LBP = "lbp"
    CANNY = "canny"
    NONE = "base"

    @classmethod
    def parse(cls, name) -> "GuidanceMethod":
        if isinstance(name, cls):
            return name
        key = str(name).lower()
        for m in cls:
            if m.value == key or m.name.lower() == key:
                return m
        if key == "none":
            return cls.NONE
        raise ValueError(f"unknown guidance method {name!r}")


def guidance_from_method(P, method, params: EdgeParams = EdgeParams()) -> Optional[Grid2D]:
    """Edge guidance from a power map; ``None`` for the unguided baseline."""
    m = GuidanceMethod.parse(method)
    g = as_grid(P)
    if m is GuidanceMethod.NONE:
        return None
    if m is GuidanceMethod.KEDGE:
        mask = k_edge_map(amplitude(g), params)
    elif m is GuidanceMethod.LBP:
        mask = lbp_edge(g, params)
    else:
        mask = canny(g, params)
    return mask.to_grid(g.spacing_h)
