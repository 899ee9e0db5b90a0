import math

import numpy as np
import pytest

from lrr import reward_model as rm
from lrr.errors import NumericError, ShapeError
from lrr.reward_model import Family, RewardDistributionParams as P, Trajectory
from lrr.verify import end_to_end_gradient_error

# 0.5 - ln(2 * Phi(1)), Phi(1) by 50-digit quadrature of the normal density (mpmath)
SKEW_NLL_LAMBDA1 = -0.020393401536495420


def make_traj(rng, T=5, sd=3, ad=2, ret=None):
    ret = rng.normal() * 3 if ret is None else ret
    return Trajectory(rng.normal(size=(T, sd)), rng.normal(size=(T, ad)), ret)


def zero_model(family, sd=3, ad=2):
    return rm.RewardModel.create(family, sd, ad, hidden_sizes=(8, 8), zero=True)


# -- predict_params / sampling ---------------------------------------------

@pytest.mark.parametrize("family", list(Family))
def test_zero_network_params(family):
    p = rm.predict_params(zero_model(family), np.ones(3), np.ones(2))
    assert p.mu == 0.0 and p.sigma == 1.0
    assert p.lam == (0.0 if family is Family.SKEW_NORMAL else None)


def test_sigma_clamped_at_lower_bound():
    model = zero_model(Family.GAUSSIAN)
    model.net.biases[-1][1] = -20.0
    model.net.mark_updated()
    assert rm.predict_params(model, np.ones(3), np.ones(2)).sigma == 1e-4


def test_predict_params_shape_error():
    with pytest.raises(ShapeError):
        rm.predict_params(zero_model(Family.GAUSSIAN), np.ones(4), np.ones(2))


def test_predict_params_pure(rng):
    model = rm.RewardModel.create(Family.SKEW_NORMAL, 3, 2, hidden_sizes=(8, 8), rng=rng)
    s, a = rng.normal(size=3), rng.normal(size=2)
    assert rm.predict_params(model, s, a) == rm.predict_params(model, s, a)


@pytest.mark.parametrize("mu,sigma,eps,expected", [(0.3, 2.0, 0.0, 0.3), (1.0, 2.0, -1.0, -1.0),
                                                   (0.0, 1.0, 1.5, 1.5)])
def test_sample_step_reward(mu, sigma, eps, expected):
    assert rm.sample_step_reward(P(mu, sigma), eps) == expected


# -- leave-one-out return ---------------------------------------------------

def test_loo_return_substitution(rng):
    traj = make_traj(rng, T=3, ret=6.0)
    assert rm.loo_return(traj, [1.0, np.nan, 3.0], 1) == 2.0


def test_loo_return_single_step(rng):
    traj = make_traj(rng, T=1, ret=-4.25)
    assert rm.loo_return(traj, [123.0], 0) == -4.25


def test_loo_return_recovers_true_reward(rng):
    true = rng.normal(size=7)
    traj = make_traj(rng, T=7, ret=true.sum())
    for i in range(7):
        assert rm.loo_return(traj, true, i) == pytest.approx(true[i], abs=1e-12)


def test_loo_return_index_error(rng):
    with pytest.raises(IndexError):
        rm.loo_return(make_traj(rng, T=3), np.zeros(3), 3)


def test_loo_samples_record_noise(rng):
    model = rm.RewardModel.create(Family.GAUSSIAN, 3, 2, hidden_sizes=(8, 8), rng=rng)
    traj = make_traj(rng, T=4)
    samples = rm.loo_samples(model, traj, np.random.default_rng(3))
    raw = np.random.default_rng(3).standard_normal((4, 4))
    p = rm.predict_params(model, traj.states, traj.actions)
    for s in samples:
        assert np.array_equal(s.noise, raw[s.index])
        expect = rm.loo_return(traj, p.mu + raw[s.index] * p.sigma, s.index)
        assert s.loo_return == expect


# -- per-step likelihoods ---------------------------------------------------

@pytest.mark.parametrize("delta,sigma,expected", [
    (0.0, 1.0, 0.0),
    (2.0, 2.0, math.log(2) + 0.5),
    (1.0, 0.5, math.log(0.5) + 2.0),
])
def test_gaussian_nll_values(delta, sigma, expected):
    assert rm.gaussian_nll(0.7 + delta, P(0.7, sigma)) == pytest.approx(expected, abs=1e-12)


def test_skew_nll_lambda_one():
    assert rm.skew_normal_nll(1.0, P(0.0, 1.0, 1.0)) == pytest.approx(SKEW_NLL_LAMBDA1, abs=1e-13)


def test_skew_nll_lambda_zero_matches_gaussian(rng):
    delta = rng.uniform(-10, 10, 1000)
    sigma = np.exp(rng.uniform(-5, 2.5, 1000))
    a = rm.skew_normal_nll(delta, P(0.0, sigma, np.zeros(1000)))
    b = rm.gaussian_nll(delta, P(0.0, sigma))
    assert np.max(np.abs(a - b)) <= 1e-12


def test_skew_nll_far_left_tail_finite():
    # lam * z = -25; log Phi(-25) = -316.63940800802026 (mpmath, 50 digits)
    val = rm.skew_normal_nll(1.0, P(0.0, 1.0, -25.0))
    expected = 0.5 - (math.log(2) - 316.63940800802026)
    assert np.isfinite(val)
    assert val == pytest.approx(expected, rel=1e-6)


# -- trajectory loss --------------------------------------------------------

def test_fixed_sigma_loss_is_half_mse(rng):
    for _ in range(20):
        model = rm.RewardModel.create(Family.FIXED_SIGMA_MSE, 3, 2, hidden_sizes=(8, 8), rng=rng)
        traj = make_traj(rng, T=int(rng.integers(1, 15)))
        loss, _ = rm.trajectory_loss(model, traj)
        mu = rm.redistribute(model, traj)
        assert loss == pytest.approx((traj.episodic_return - mu.sum()) ** 2 / 2, rel=1e-12)
        assert 2 * loss == pytest.approx(rm.mse_rd_loss(model, traj), rel=1e-12)


def test_single_step_gaussian_loss(rng):
    model = rm.RewardModel.create(Family.GAUSSIAN, 3, 2, hidden_sizes=(8, 8), rng=rng)
    traj = make_traj(rng, T=1)
    loss, _ = rm.trajectory_loss(model, traj, np.random.default_rng(0))
    p = rm.predict_params(model, traj.states[0], traj.actions[0])
    expected = math.log(p.sigma) + (traj.episodic_return - p.mu) ** 2 / (2 * p.sigma**2)
    assert loss == pytest.approx(expected, rel=1e-12)


def test_loss_matches_explicit_loop(rng):
    """Vectorized loss equals a literal per-index leave-one-out computation."""
    for family, nll in ((Family.GAUSSIAN, rm.gaussian_nll), (Family.SKEW_NORMAL, rm.skew_normal_nll)):
        model = rm.RewardModel.create(family, 3, 2, hidden_sizes=(8, 8), rng=rng)
        traj = make_traj(rng, T=6)
        noise = rng.standard_normal((6, 6))
        loss, _ = rm.trajectory_loss(model, traj, noise=noise)
        p = rm.predict_params(model, traj.states, traj.actions)
        terms = []
        for i in range(6):
            draws = p.mu + noise[i] * p.sigma
            r_tilde = rm.loo_return(traj, draws, i)
            lam_i = None if p.lam is None else p.lam[i]
            terms.append(nll(r_tilde, P(p.mu[i], p.sigma[i], lam_i)))
        assert loss == pytest.approx(np.mean(terms), rel=1e-12)


def test_loss_deterministic_given_seed(rng):
    model = rm.RewardModel.create(Family.SKEW_NORMAL, 3, 2, hidden_sizes=(8, 8), rng=rng)
    traj = make_traj(rng, T=8)
    a, _ = rm.trajectory_loss(model, traj, np.random.default_rng(7))
    b, _ = rm.trajectory_loss(model, traj, np.random.default_rng(7))
    assert a == b


def test_shared_noise_reuses_one_vector(rng):
    model = rm.RewardModel.create(Family.GAUSSIAN, 3, 2, hidden_sizes=(8, 8), rng=rng,
                                  shared_noise=True)
    _, ctx = rm.trajectory_loss(model, make_traj(rng, T=5), np.random.default_rng(1))
    noise = ctx.noises[0]
    assert np.all(noise == noise[0])


@pytest.mark.parametrize("family", list(Family))
@pytest.mark.parametrize("seed", range(4))
def test_end_to_end_gradients(family, seed):
    assert end_to_end_gradient_error(family, seed) <= 1e-5


# -- mse / training / redistribution ---------------------------------------

def test_mse_rd_loss_values(rng):
    model = zero_model(Family.GAUSSIAN)
    assert rm.mse_rd_loss(model, make_traj(rng, T=4, ret=5.0)) == 25.0
    model.net.biases[-1][0] = 1.25
    model.net.mark_updated()
    assert rm.mse_rd_loss(model, make_traj(rng, T=4, ret=5.0)) == 0.0


def test_train_step_zero_lr_keeps_params(rng):
    model = rm.RewardModel.create(Family.GAUSSIAN, 3, 2, hidden_sizes=(8, 8), rng=rng)
    before = [p.copy() for p in model.net.params()]
    rm.train_step(model, [make_traj(rng), make_traj(rng)], 0.0, rng)
    assert all(np.array_equal(a, b) for a, b in zip(before, model.net.params()))


def test_train_step_returns_pre_update_loss(rng):
    model = rm.RewardModel.create(Family.GAUSSIAN, 3, 2, hidden_sizes=(8, 8), rng=rng)
    batch = [make_traj(rng, T=3), make_traj(rng, T=6)]
    # noise is drawn trajectory by trajectory from the same stream
    g = np.random.default_rng(4)
    n1, n2 = g.standard_normal((3, 3)), g.standard_normal((6, 6))
    expected = (rm.trajectory_loss(model, batch[0], noise=n1)[0]
                + rm.trajectory_loss(model, batch[1], noise=n2)[0]) / 2
    loss = rm.train_step(model, batch, 1e-3, np.random.default_rng(4))
    assert loss == pytest.approx(expected, rel=1e-12)
    assert model.update_index == 1


def test_train_step_empty_minibatch(rng):
    with pytest.raises(ValueError):
        rm.train_step(zero_model(Family.GAUSSIAN), [], 1e-3, rng)


def test_train_step_non_finite_aborts(rng):
    model = rm.RewardModel.create(Family.GAUSSIAN, 3, 2, hidden_sizes=(8, 8), rng=rng)
    model.net.weights[0][0, 0] = np.inf
    model.net.mark_updated()
    with pytest.raises(NumericError, match="trajectory 0"):
        rm.train_step(model, [make_traj(rng)], 1e-3, rng)


def test_train_step_bitwise_reproducible():
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(9)
        model = rm.RewardModel.create(Family.GAUSSIAN, 3, 2, hidden_sizes=(8, 8), rng=rng)
        trajs = [make_traj(rng, T=5) for _ in range(3)]
        losses = [rm.train_step(model, trajs, 1e-3, rng) for _ in range(5)]
        runs.append((losses, b"".join(p.tobytes() for p in model.net.params())))
    assert runs[0] == runs[1]


def test_gaussian_training_decreases_loss():
    rng = np.random.default_rng(21)
    model = rm.RewardModel.create(Family.GAUSSIAN, 3, 2, hidden_sizes=(16, 16), rng=rng)
    traj = make_traj(rng, T=6, ret=4.0)
    losses = [rm.train_step(model, [traj], 3e-3, rng) for _ in range(500)]
    trailing = np.convolve(losses, np.ones(100) / 100, mode="valid")
    # the LOO loss is stochastic; judge the trend at 100-step resolution
    assert np.all(np.diff(trailing[::100]) <= 0)
    assert trailing[-1] < trailing[0]


def test_fixed_sigma_training_fits_return():
    rng = np.random.default_rng(22)
    model = rm.RewardModel.create(Family.FIXED_SIGMA_MSE, 3, 2, hidden_sizes=(16, 16), rng=rng)
    traj = make_traj(rng, T=8, ret=5.0)
    for _ in range(2000):
        rm.train_step(model, [traj, traj, traj, traj], 3e-4, rng)
    assert abs(rm.redistribute(model, traj).sum() - 5.0) < 1e-2


def test_redistribute_zero_and_head_independence(rng):
    model = zero_model(Family.SKEW_NORMAL)
    traj = make_traj(rng, T=5)
    assert np.array_equal(rm.redistribute(model, traj), np.zeros(5))
    model.net.biases[-1][1:] = [3.0, -2.0]
    model.net.mark_updated()
    assert np.array_equal(rm.redistribute(model, traj), np.zeros(5))


def test_model_checkpoint_roundtrip(rng):
    model = rm.RewardModel.create(Family.SKEW_NORMAL, 3, 2, hidden_sizes=(8, 8), rng=rng)
    back = rm.loads_model(rm.dumps_model(model))
    assert back.family is Family.SKEW_NORMAL and back.sigma_min == 1e-4
    traj = make_traj(rng)
    assert np.array_equal(rm.redistribute(back, traj), rm.redistribute(model, traj))


def test_head_width_validated(rng):
    from lrr.nn import DenseNet
    with pytest.raises(ShapeError):
        rm.RewardModel(Family.SKEW_NORMAL, DenseNet([5, 4, 2], rng=rng))
