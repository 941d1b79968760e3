import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radiosr.diffusion import (
    DenoiserOutput,
    LossWeights,
    Schedule,
    ddm_forward_sample,
    ddm_reverse_step,
    ddm_sample_chain,
    ddpm_forward_step,
    gaussian_oracle_denoiser,
    kl_std_normal,
    loss_drift,
    loss_noise,
    loss_recon,
    loss_total,
    pf_ode_step,
    reverse_sde_step,
    score_from_eps,
    vae_loss,
)
from radiosr.errors import (
    BadTimeStep,
    DegenerateAlphaBar,
    DimensionMismatch,
    KindMismatch,
    TimeOutOfRange,
    ValueOutOfRange,
)


def within_4se(samples, mean, var):
    n = samples.size
    se_mean = math.sqrt(var / n)
    se_var = var * math.sqrt(2.0 / (n - 1))
    return (abs(samples.mean() - mean) <= 4 * se_mean
            and abs(samples.var(ddof=1) - var) <= 4 * se_var)


# --- schedules -----------------------------------------------------------------

def test_ddpm_schedule_consistency():
    s = Schedule.linear_ddpm(50)
    np.testing.assert_allclose(s.alphas ** 2 + s.betas, 1.0, atol=1e-12)
    np.testing.assert_allclose(s.alpha_bars, np.cumprod(s.alphas ** 2), rtol=1e-12)
    with pytest.raises(ValueOutOfRange):
        Schedule.ddpm([0.1, 1.0])


def test_ddm_coefficients():
    s = Schedule.ddm()
    assert s.gamma(0.25) == 0.75 and s.delta_sq(0.25) == 0.25
    # d(t)/dt - 2 f t with f = -1/(1-t)
    assert s.diffusion_sq(0.5) == pytest.approx(1 + 2 * 0.5 / 0.5)
    with pytest.raises(KindMismatch):
        Schedule.linear_ddpm(5).gamma(0.5)


def test_ddpm_forward_trivial():
    s = Schedule.ddpm([0.3])
    one = Schedule.ddpm([1 - 1e-16])
    x = np.array([1.0, -2.0])
    assert np.array_equal(ddpm_forward_step(x, 0, Schedule.ddpm([1e-300]), np.zeros(2)), x)
    z = np.array([0.4, 0.7])
    np.testing.assert_allclose(ddpm_forward_step(np.zeros(2), 0, one, z), z, rtol=1e-15)
    with pytest.raises(KindMismatch):
        ddpm_forward_step(x, 0, Schedule.ddm(), z)
    assert s.alphas[0] == math.sqrt(0.7)


def test_ddpm_forward_moments():
    rng = np.random.default_rng(1)
    s = Schedule.ddpm([0.2, 0.3])
    out = ddpm_forward_step(np.full(100_000, 1.5), 1, s, rng.standard_normal(100_000))
    assert within_4se(out, s.alphas[1] * 1.5, 0.3)


# --- score ---------------------------------------------------------------------

def test_score_from_eps_values():
    assert np.all(score_from_eps(np.zeros(3), 0.5) == 0.0)
    assert score_from_eps(np.array([1.0]), 0.75).tolist() == [-2.0]
    for abar in (0.0, 1.0):
        with pytest.raises(DegenerateAlphaBar):
            score_from_eps(np.array([1.0]), abar)


@pytest.mark.parametrize("abar", [0.01, 0.3, 0.75, 0.999])
def test_score_matches_gaussian_score(abar):
    rng = np.random.default_rng(2)
    x = rng.normal(0, math.sqrt(1 - abar), size=1000)
    eps = x / math.sqrt(1 - abar)
    np.testing.assert_allclose(score_from_eps(eps, abar), -x / (1 - abar), rtol=0, atol=1e-12)


# --- constant-drift DDM --------------------------------------------------------

def test_ddm_forward_endpoints():
    x0 = np.array([0.3, -1.0])
    z = np.array([1.1, 0.2])
    assert np.array_equal(ddm_forward_sample(x0, 0.0, z), x0)
    assert np.array_equal(ddm_forward_sample(x0, 1.0, z), z)
    with pytest.raises(TimeOutOfRange):
        ddm_forward_sample(x0, 1.5, z)


def test_ddm_forward_moments():
    rng = np.random.default_rng(3)
    out = ddm_forward_sample(2.0, 0.5, rng.standard_normal(100_000))
    assert within_4se(out, 1.0, 0.5)


def test_reverse_step_trivial_cases():
    x = np.array([0.5, -0.25])
    zero = DenoiserOutput(np.zeros(2), np.zeros(2))
    assert np.array_equal(ddm_reverse_step(x, 0.5, 0.1, zero, np.zeros(2)), x)
    with pytest.raises(BadTimeStep):
        ddm_reverse_step(x, 0.5, 0.6, zero, np.zeros(2))
    with pytest.raises(BadTimeStep):
        ddm_reverse_step(x, 0.5, 0.0, zero, np.zeros(2))


def test_reverse_final_step_is_exact():
    rng = np.random.default_rng(4)
    x0 = rng.normal(size=20)
    eps = rng.normal(size=20)
    t = 0.3
    xt = ddm_forward_sample(x0, t, eps)
    out = ddm_reverse_step(xt, t, t, DenoiserOutput(-x0, eps), rng.normal(size=20))
    np.testing.assert_allclose(out, x0, atol=1e-14)


def test_reverse_conditional_mean_identity():
    rng = np.random.default_rng(5)
    x0 = rng.normal(size=50)
    eps = rng.normal(size=50)
    t, dt = 0.8, 0.3
    xt = ddm_forward_sample(x0, t, eps)
    mean = ddm_reverse_step(xt, t, dt, DenoiserOutput(-x0, eps), np.zeros(50))
    np.testing.assert_allclose(mean, (1 - t + dt) * x0 + eps * (t - dt) / math.sqrt(t), atol=1e-13)


@pytest.mark.parametrize("t,dt", [(1.0, 0.5), (0.5, 0.25), (0.8, 0.1)])
def test_reverse_marginal_consistency(t, dt):
    rng = np.random.default_rng(6)
    n, x0 = 100_000, 2.0
    eps = rng.standard_normal(n)
    xt = ddm_forward_sample(x0, t, eps)
    out = ddm_reverse_step(xt, t, dt, DenoiserOutput(np.full(n, -x0), eps), rng.standard_normal(n))
    assert within_4se(out, (1 - t + dt) * x0, t - dt)


# --- Gaussian oracle -----------------------------------------------------------

def test_oracle_degenerate_prior():
    x = np.array([-3.0, 0.0, 5.0])
    out = gaussian_oracle_denoiser(x, 0.4, 1.5, 0.0)
    np.testing.assert_allclose(-out.f_hat, 1.5)


def test_oracle_at_t1_returns_prior_mean():
    out = gaussian_oracle_denoiser(np.array([-3.0, 7.0]), 1.0, 1.5, 0.25)
    np.testing.assert_allclose(-out.f_hat, 1.5)
    with pytest.raises(TimeOutOfRange):
        gaussian_oracle_denoiser(np.zeros(1), 0.0, 0.0, 1.0)


def test_oracle_eps_consistent():
    x = np.array([0.2, 1.0])
    t = 0.36
    out = gaussian_oracle_denoiser(x, t, 1.5, 0.25)
    np.testing.assert_allclose((1 - t) * (-out.f_hat) + math.sqrt(t) * out.eps_hat, x, atol=1e-15)


def test_oracle_posterior_matches_regression():
    # empirical E[x0 | x_t] by binning a joint sample
    rng = np.random.default_rng(7)
    n, t, mu0, v0 = 400_000, 0.6, 1.5, 0.25
    x0 = rng.normal(mu0, math.sqrt(v0), n)
    xt = ddm_forward_sample(x0, t, rng.standard_normal(n))
    slope, intercept = np.polyfit(xt, x0, 1)
    grid = np.array([-1.0, 0.0, 1.0])
    pred = -gaussian_oracle_denoiser(grid, t, mu0, v0).f_hat
    np.testing.assert_allclose(pred, slope * grid + intercept, atol=5e-3)


def test_chain_with_posterior_draws_recovers_target():
    rng = np.random.default_rng(8)
    x1 = rng.standard_normal(10_000)
    den = lambda x, t, z: gaussian_oracle_denoiser(x, t, 1.5, 0.25, z)
    out = ddm_sample_chain(x1, 200, den, rng)
    assert within_4se(out, 1.5, 0.25)


def test_chain_with_posterior_mean_is_under_dispersed():
    # the exact variance of the mean plug-in chain is deterministic given the
    # step count; compute it by pushing the Gaussian law through each step
    steps, mu0, v0 = 200, 1.5, 0.25
    m, v = 0.0, 1.0
    dt = 1.0 / steps
    for k in range(steps):
        t = 1.0 - k * dt
        h = t if k == steps - 1 else dt
        g = 1 - t
        a = g * v0 / (g * g * v0 + t)          # x0_hat = mu0 + a (x - g mu0)
        b0 = mu0 - a * g * mu0
        # mean = x + h x0_hat - h/sqrt(t) * (x - g x0_hat)/sqrt(t)
        cx = 1 - h / t + (h + h * g / t) * a
        c0 = (h + h * g / t) * b0
        m, v = cx * m + c0, cx * cx * v + h * (t - h) / t
    assert abs(m - mu0) < 1e-9
    assert 0.2 < v < 0.24
    rng = np.random.default_rng(9)
    den = lambda x, t, z: gaussian_oracle_denoiser(x, t, mu0, v0)
    out = ddm_sample_chain(rng.standard_normal(10_000), steps, den, rng, posterior_noise=False)
    assert within_4se(out, m, v)


def test_chain_callback_and_errors():
    seen = []
    rng = np.random.default_rng(0)
    den = lambda x, t, z: gaussian_oracle_denoiser(x, t, 0.0, 1.0, z)
    ddm_sample_chain(np.zeros(3), 4, den, rng, callback=lambda k, t, x: seen.append((k, t)))
    assert [k for k, _ in seen] == [1, 2, 3, 4]
    assert seen[-1][1] == 0.0
    with pytest.raises(BadTimeStep):
        ddm_sample_chain(np.zeros(3), 0, den, rng)


# --- SDE / ODE integrators -----------------------------------------------------

def test_sde_trivial():
    x = np.array([1.0, 2.0])
    assert np.array_equal(reverse_sde_step(x, 1.0, 0.1, 0.0, 0.0, 0.0, np.ones(2)), x)
    det = reverse_sde_step(x, 1.0, 0.1, 0.3 * x, 1.2, -x, np.zeros(2))
    np.testing.assert_allclose(det, x - (0.3 * x + 1.44 * x) * 0.1)


def test_pf_ode_half_score():
    x = np.array([0.4, -1.0])
    s = np.array([0.7, 0.2])
    assert np.array_equal(pf_ode_step(x, 1.0, 0.1, 0.0, 0.5, 0.0), x)
    sde = reverse_sde_step(x, 1.0, 0.1, 0.0, 2.0, s, np.zeros(2))
    ode = pf_ode_step(x, 1.0, 0.1, 0.0, 2.0, s)
    np.testing.assert_allclose(sde - x, 2 * (ode - x), rtol=1e-15)


def _stationary_var(f, steps=20_000, chains=2_000, dt=1e-3, seed=10):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(chains)
    acc = []
    for k in range(steps):
        x = reverse_sde_step(x, 1.0, dt, f, 1.0, lambda y, t: -y, rng.standard_normal(chains))
        if k >= steps // 2 and k % 50 == 0:
            acc.append(x.var())
    return float(np.mean(acc))


def test_sde_ou_stationarity():
    # forward dx = -x/2 dt + dW keeps N(0,1); its reverse chain does too
    v = _stationary_var(lambda y, t: -0.5 * y)
    assert abs(v - 1.0) < 0.05


def test_sde_zero_drift_stationary_variance():
    # with f = 0 the Euler chain is x <- (1 - dt) x + sqrt(dt) z, whose
    # stationary variance is 1 / (2 - dt), not 1
    dt = 1e-3
    v = _stationary_var(0.0, dt=dt)
    assert abs(v - 1.0 / (2.0 - dt)) < 0.025


def test_pf_ode_preserves_gaussian_quantiles():
    # forward dx = -x/2 dt + dW from N(0, v0): var(t) = 1 + (v0 - 1) e^{-t}
    v0, dt = 0.25, 1e-3
    var = lambda t: 1 + (v0 - 1) * math.exp(-t)
    q = np.array([-2.0, -1.0, -0.3, 0.5, 1.5, 2.5])
    x = q * math.sqrt(var(1.0))
    t = 1.0
    for _ in range(1000):
        x = pf_ode_step(x, t, dt, lambda y, s: -0.5 * y, 1.0, lambda y, s: -y / var(s))
        t -= dt
    np.testing.assert_allclose(x, q * math.sqrt(v0), rtol=0.01)


# --- losses --------------------------------------------------------------------

def test_loss_values():
    x0 = np.array([0.5, -1.0])
    assert loss_drift(-x0, x0) == 0.0
    eps = np.array([0.3, 0.1, -2.0])
    assert loss_noise(eps + 1, eps) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DimensionMismatch):
        loss_recon(np.zeros(2), np.zeros(3))


def test_losses_match_loop_oracle(rng):
    a, b = rng.normal(size=37), rng.normal(size=37)
    ref = sum((a[i] - b[i]) ** 2 for i in range(37)) / 37
    ref_drift = sum((a[i] + b[i]) ** 2 for i in range(37)) / 37
    assert abs(loss_noise(a, b) - ref) < 1e-12
    assert abs(loss_recon(a, b) - ref) < 1e-12
    assert abs(loss_drift(a, b) - ref_drift) < 1e-12


def test_loss_total():
    assert loss_total(0.1, 0.2, 0.3, LossWeights(1, 2, 3)) == pytest.approx(1.4, abs=1e-15)
    assert loss_total(0.7, 0.2, 0.3, LossWeights(1, 0, 0)) == 0.7
    assert loss_total(0.0, 0.0, 0.0) == 0.0
    with pytest.raises(ValueOutOfRange):
        LossWeights(0, 0, 0)


def test_vae_loss():
    assert vae_loss(0.0, np.zeros(4), np.zeros(4)) == 0.0
    assert vae_loss(0.0, np.array([1.0]), np.array([0.0])) == 0.5
    assert vae_loss(0.25, np.array([1.0]), np.array([0.0])) == 0.75


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-10, 10)),
       arrays(np.float64, 6, elements=st.floats(-10, 10)))
def test_kl_nonnegative(mu, logvar):
    assert kl_std_normal(mu, logvar) >= 0.0
