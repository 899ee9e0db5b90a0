"""Machine checks of the likelihood-loss properties and the autocorrelation tools.

Each check compares an implementation path against an independent oracle
(grid search, golden-section search, central finite differences,
Monte-Carlo) and reports the worst observed discrepancy against its
tolerance. Loss functions are looked up on their modules at call time so a
deliberately broken implementation makes the matching check fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics, reward_model, theory
from .reward_model import Family, RewardDistributionParams, RewardModel, Trajectory

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class CheckResult:
    name: str
    tolerance: float
    observed: float
    passed: bool

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34} observed={self.observed:.3e}  tol={self.tolerance:.1e}"


# -- oracles ----------------------------------------------------------------

def golden_section_min(f, a, b, tol=1e-12, max_iter=500):
    """Minimizer of a unimodal ``f`` on ``[a, b]`` by golden-section search."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def relative_error(a, b, floor=1e-8):
    """``|a - b| / max(|a|, |b|)``, or 0 when ``|a - b|`` is under ``floor``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = np.abs(a - b)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    return np.where(diff <= floor, 0.0, diff / scale)


def _gauss_loss(sigma, delta):
    return reward_model.gaussian_nll(delta, RewardDistributionParams(0.0, sigma))


def _skew_loss(mu, sigma, lam, r_tilde):
    return reward_model.skew_normal_nll(r_tilde, RewardDistributionParams(mu, sigma, lam))


# -- checks -----------------------------------------------------------------

def _random_model(family, rng, state_dim, action_dim, hidden=8):
    model = RewardModel.create(family, state_dim, action_dim, hidden_sizes=(hidden, hidden), rng=rng)
    for b in model.net.biases:
        b[...] = rng.normal(scale=0.3, size=b.shape)
    model.net.mark_updated()
    return model


def _random_trajectory(rng, T, state_dim, action_dim, scale=1.0):
    return Trajectory(rng.normal(size=(T, state_dim)), rng.normal(size=(T, action_dim)),
                      float(rng.normal(scale=scale * math.sqrt(T))))


def check_fixed_sigma_equivalence(n=50, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        sd, ad = int(rng.integers(1, 5)), int(rng.integers(1, 3))
        model = _random_model(Family.FIXED_SIGMA_MSE, rng, sd, ad, hidden=int(rng.integers(4, 17)))
        traj = _random_trajectory(rng, int(rng.integers(1, 21)), sd, ad, scale=3.0)
        loss, _ = reward_model.trajectory_loss(model, traj)
        mse = reward_model.mse_rd_loss(model, traj)
        worst = max(worst, float(relative_error(2.0 * loss, mse, floor=1e-300)))
    return CheckResult("fixed_sigma_equals_mse", 1e-12, worst, worst <= 1e-12)


def check_gaussian_grid_argmin(n=100, seed=1):
    rng = np.random.default_rng(seed)
    grid = np.logspace(-3, 2, 20001)
    worst = 0.0
    for delta in rng.uniform(0.01, 10.0, size=n):
        values = _gauss_loss(grid, delta)
        k = int(np.argmin(values))
        cell = grid[min(k + 1, len(grid) - 1)] - grid[max(k - 1, 0)]
        worst = max(worst, abs(grid[k] - abs(delta)) / (cell / 2.0))
    return CheckResult("gaussian_sigma_grid_argmin", 1.0, worst, worst <= 1.0)


def check_gaussian_alpha(seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for delta in rng.uniform(0.01, 10.0, size=20):
        def loss(alpha, delta=delta):
            return float(_gauss_loss(alpha * abs(delta), delta))
        worst = max(worst, abs(golden_section_min(loss, 0.05, 20.0) - 1.0))
    return CheckResult("gaussian_reparam_alpha_is_one", 1e-6, worst, worst <= 1e-6)


def _grad_draws(n, seed):
    rng = np.random.default_rng(seed)
    delta = rng.uniform(-5.0, 5.0, size=n)
    sigma = np.exp(rng.uniform(np.log(1e-2), np.log(10.0), size=n))
    lam = rng.uniform(-5.0, 5.0, size=n)
    return delta, sigma, lam


def check_gaussian_gradients(n=1000, seed=3, rtol=1e-6):
    delta, sigma, _ = _grad_draws(n, seed)
    d_mu, d_sigma = theory.analytic_grads_gaussian(delta, sigma)
    h = 1e-5 * sigma
    fd_mu = (_gauss_loss(sigma, delta - h) - _gauss_loss(sigma, delta + h)) / (2 * h)
    fd_sigma = (_gauss_loss(sigma + h, delta) - _gauss_loss(sigma - h, delta)) / (2 * h)
    worst = float(max(relative_error(d_mu, fd_mu).max(), relative_error(d_sigma, fd_sigma).max()))
    return CheckResult("gaussian_grads_vs_fd", rtol, worst, worst <= rtol)


def check_skew_gradients(n=1000, seed=4, rtol=1e-6):
    delta, sigma, lam = _grad_draws(n, seed)
    d_mu, d_sigma = theory.analytic_grads_skew(delta, sigma, lam)
    h = 1e-5 * sigma
    fd_mu = (_skew_loss(h, sigma, lam, delta) - _skew_loss(-h, sigma, lam, delta)) / (2 * h)
    fd_sigma = (_skew_loss(0.0, sigma + h, lam, delta) - _skew_loss(0.0, sigma - h, lam, delta)) / (2 * h)
    worst = float(max(relative_error(d_mu, fd_mu).max(), relative_error(d_sigma, fd_sigma).max()))
    return CheckResult("skew_grads_vs_fd", rtol, worst, worst <= rtol)


def _skew_grid():
    return np.linspace(0.1, 10.0, 20), np.concatenate([np.linspace(-5, -0.25, 10),
                                                       np.linspace(0.25, 5, 10)])


def check_skew_stationarity():
    deltas, lams = _skew_grid()
    worst = 0.0
    for d in deltas:
        for lam in lams:
            s = theory.optimal_sigma_skew(d, lam)
            _, g = theory.analytic_grads_skew(d, s, lam)
            worst = max(worst, abs(float(g)))
    return CheckResult("skew_sigma_stationarity", 1e-8, worst, worst <= 1e-8)


def check_skew_golden():
    deltas, lams = _skew_grid()
    worst = 0.0
    for d in deltas:
        for lam in lams:
            s = theory.optimal_sigma_skew(d, lam)
            ref = golden_section_min(lambda x: float(theory.skew_sigma_loss(x, d, lam)),
                                     1e-3 * d, 50.0 * d, tol=1e-14)
            worst = max(worst, abs(s - ref) / d)
    return CheckResult("skew_fixed_point_vs_golden", 1e-6, worst, worst <= 1e-6)


def check_skew_signs():
    deltas, lams = _skew_grid()
    bad = 0
    for d in deltas:
        for lam in lams:
            s = theory.optimal_sigma_skew(d, lam)
            if (lam > 0 and not s < d) or (lam < 0 and not s > d):
                bad += 1
        if theory.optimal_sigma_skew(d, 0.0) != d:
            bad += 1
    return CheckResult("skew_sigma_sign_and_lambda0", 0.0, float(bad), bad == 0)


def check_lambda0_reduction(n=1000, seed=5):
    rng = np.random.default_rng(seed)
    delta = rng.uniform(-10, 10, size=n)
    sigma = np.exp(rng.uniform(np.log(1e-2), np.log(10.0), size=n))
    a = reward_model.skew_normal_nll(delta, RewardDistributionParams(0.0, sigma, np.zeros(n)))
    b = reward_model.gaussian_nll(delta, RewardDistributionParams(0.0, sigma))
    worst = float(np.max(np.abs(a - b)))
    return CheckResult("lambda0_skew_equals_gaussian", 1e-12, worst, worst <= 1e-12)


def end_to_end_gradient_error(family, seed, T=None, h=1e-6):
    """Worst relative error between backprop and finite differences of
    ``trajectory_loss`` with frozen noise on a width-8 network."""
    rng = np.random.default_rng(seed)
    sd, ad = 3, 2
    model = _random_model(family, rng, sd, ad, hidden=8)
    T = T or int(rng.integers(1, 6))
    traj = _random_trajectory(rng, T, sd, ad)
    noise = rng.standard_normal((T, T))
    _, ctx = reward_model.trajectory_loss(model, traj, noise=noise)
    grads = reward_model.loss_gradients(model, ctx)
    worst = 0.0
    for p, g in zip(model.net.params(), grads):
        fd = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            model.net.mark_updated()
            up, _ = reward_model.trajectory_loss(model, traj, noise=noise)
            p[idx] = old - h
            model.net.mark_updated()
            down, _ = reward_model.trajectory_loss(model, traj, noise=noise)
            p[idx] = old
            model.net.mark_updated()
            fd[idx] = (up - down) / (2 * h)
        # floor at the round-off level of an h = 1e-6 central difference
        worst = max(worst, float(relative_error(g, fd, floor=1e-9).max()))
    return worst


def check_end_to_end_gradients(n=6, rtol=1e-5):
    worst = 0.0
    for k in range(n):
        for family in (Family.GAUSSIAN, Family.SKEW_NORMAL, Family.FIXED_SIGMA_MSE):
            worst = max(worst, end_to_end_gradient_error(family, seed=100 + k))
    return CheckResult("end_to_end_loss_gradients", rtol, worst, worst <= rtol)


def check_gradient_monotonicity(seed=6):
    rng = np.random.default_rng(seed)
    bad = 0
    sigmas = np.logspace(-2, 1, 200)
    for delta in rng.uniform(-5, 5, size=50):
        d_mu, d_sigma = theory.analytic_grads_gaussian(delta, sigmas)
        if not np.all(np.diff(np.abs(d_mu)) < 0):
            bad += 1
        if not np.array_equal(d_sigma < 0, sigmas < abs(delta)):
            bad += 1
    return CheckResult("gaussian_update_directions", 0.0, float(bad), bad == 0)


def check_determinism(seed=7):
    rng = np.random.default_rng(seed)
    model = _random_model(Family.GAUSSIAN, rng, 3, 2)
    traj = _random_trajectory(rng, 5, 3, 2)
    a, _ = reward_model.trajectory_loss(model, traj, np.random.default_rng(11))
    b, _ = reward_model.trajectory_loss(model, traj, np.random.default_rng(11))
    return CheckResult("loss_seed_determinism", 0.0, abs(a - b), a == b)


def check_autocorr(seed=8):
    rng = np.random.default_rng(seed)
    n = 100_000
    eps = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = eps[0] / math.sqrt(1 - 0.81)
    for t in range(1, n):
        x[t] = 0.9 * x[t - 1] + eps[t]
    rho = diagnostics.lag1_autocorr(x)
    alt = diagnostics.lag1_autocorr(np.tile([1.0, -1.0], 50))
    err = max(abs(rho - 0.9) if 0.88 <= rho <= 0.92 else 1.0, abs(alt + 1.0))
    return CheckResult("lag1_ar1_and_alternating", 0.02, err, err <= 0.02 and abs(alt + 1) <= 1e-9)


def check_autocorr_invariances(seed=9):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(50):
        x = np.cumsum(rng.standard_normal(int(rng.integers(5, 200))))
        r = diagnostics.lag1_autocorr(x)
        bad += not -1.0 <= r <= 1.0
        for a in (-3.0, 0.5, 7.0):
            bad += abs(diagnostics.lag1_autocorr(a * x + 2.0) - r) > 1e-9
    widths = [np.diff(diagnostics.autocorr_ci(0.5, n))[0] for n in (10, 50, 100, 1000, 10_000)]
    bad += not np.all(np.diff(widths) < 0)
    return CheckResult("lag1_range_affine_ci_width", 0.0, float(bad), bad == 0)


CHECKS = (
    check_fixed_sigma_equivalence,
    check_gaussian_grid_argmin,
    check_gaussian_alpha,
    check_gaussian_gradients,
    check_skew_gradients,
    check_skew_stationarity,
    check_skew_golden,
    check_skew_signs,
    check_lambda0_reduction,
    check_end_to_end_gradients,
    check_gradient_monotonicity,
    check_determinism,
    check_autocorr,
    check_autocorr_invariances,
)


def verify_propositions(checks=CHECKS):
    """Run every check; returns the list of :class:`CheckResult`."""
    return [check() for check in checks]
