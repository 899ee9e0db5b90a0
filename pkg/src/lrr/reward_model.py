"""Probabilistic per-step reward models trained by a leave-one-out likelihood.

A reward network maps ``concat(state, action)`` to the parameters of a
per-step reward distribution. For a trajectory with episodic return ``R``,
the return assigned to step ``i`` is what is left of ``R`` after subtracting
reparameterized draws ``mu_t + eps_{i,t} * sigma_t`` at every other step::

    r_tilde_i = R - sum_{t != i} (mu_t + eps_{i,t} sigma_t)

and the trajectory loss is the mean over ``i`` of the negative log-likelihood
of ``r_tilde_i`` under step ``i``'s distribution. Gradients reach ``mu`` and
``sigma`` of every step, through the density at ``i`` and through the draws
at ``t != i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import nn, normal
from .errors import NumericError, ShapeError

SIGMA_MIN = 1e-4
SIGMA_MAX = 1e2
_LOG2 = np.log(2.0)


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    SKEW_NORMAL = "skew_normal"
    FIXED_SIGMA_MSE = "fixed_sigma_mse"

    @property
    def head_width(self):
        return {"gaussian": 2, "skew_normal": 3, "fixed_sigma_mse": 1}[self.value]


@dataclass
class Trajectory:
    states: np.ndarray  # (T, state_dim)
    actions: np.ndarray  # (T, action_dim)
    episodic_return: float

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=np.float64))
        self.actions = np.atleast_2d(np.asarray(self.actions, dtype=np.float64))
        self.episodic_return = float(self.episodic_return)
        if len(self.states) < 1 or len(self.states) != len(self.actions):
            raise ShapeError("a trajectory needs T >= 1 matching states and actions")
        if not (np.all(np.isfinite(self.states)) and np.all(np.isfinite(self.actions))
                and np.isfinite(self.episodic_return)):
            raise NumericError("trajectory contains non-finite values")

    def __len__(self):
        return len(self.states)

    @property
    def inputs(self):
        return np.concatenate([self.states, self.actions], axis=1)


@dataclass
class RewardDistributionParams:
    mu: np.ndarray | float
    sigma: np.ndarray | float
    lam: np.ndarray | float | None = None


@dataclass
class LooSample:
    index: int
    noise: np.ndarray
    loo_return: float


class RewardModel:
    def __init__(self, family, net, adam=None, sigma_min=SIGMA_MIN, sigma_max=SIGMA_MAX,
                 shared_noise=False):
        self.family = Family(family)
        if net.n_out != self.family.head_width:
            raise ShapeError(f"{self.family.value} needs {self.family.head_width} outputs, "
                             f"net has {net.n_out}")
        if not 0 < sigma_min < sigma_max:
            raise ValueError("need 0 < sigma_min < sigma_max")
        self.net = net
        self.adam = adam if adam is not None else nn.AdamState.for_params(net.params())
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        self.shared_noise = bool(shared_noise)
        self.update_index = 0
        self.last_stats = {}

    @classmethod
    def create(cls, family, state_dim, action_dim, hidden_sizes=(256, 256), rng=None,
               zero=False, **kw):
        family = Family(family)
        sizes = [state_dim + action_dim, *hidden_sizes, family.head_width]
        return cls(family, nn.DenseNet(sizes, rng=rng, zero=zero), **kw)

    def _heads(self, x):
        out, cache = nn.forward(self.net, x)
        out = np.atleast_2d(out)
        mu = out[:, 0]
        if self.family is Family.FIXED_SIGMA_MSE:
            sigma = np.ones_like(mu)
            dsig_draw = np.zeros_like(mu)
            lam = None
        else:
            raw = out[:, 1]
            sigma = np.clip(np.exp(raw), self.sigma_min, self.sigma_max)
            inside = (raw > np.log(self.sigma_min)) & (raw < np.log(self.sigma_max))
            dsig_draw = np.where(inside, sigma, 0.0)
            lam = out[:, 2] if self.family is Family.SKEW_NORMAL else None
        return mu, sigma, lam, dsig_draw, cache


def _model_input(model, state, action):
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    x = np.concatenate([np.atleast_2d(state), np.atleast_2d(action)], axis=1)
    if x.shape[1] != model.net.n_in:
        raise ShapeError(f"state+action width {x.shape[1]} != model input {model.net.n_in}")
    return x, state.ndim == 1


def predict_params(model: RewardModel, state, action) -> RewardDistributionParams:
    """Distribution parameters for one ``(state, action)`` or a batch of rows."""
    x, single = _model_input(model, state, action)
    mu, sigma, lam, _, _ = model._heads(x)
    if single:
        return RewardDistributionParams(float(mu[0]), float(sigma[0]),
                                        None if lam is None else float(lam[0]))
    return RewardDistributionParams(mu, sigma, lam)


def sample_step_reward(params: RewardDistributionParams, epsilon):
    return params.mu + epsilon * params.sigma


def loo_return(traj: Trajectory, sampled_rewards, i):
    T = len(traj)
    if not 0 <= i < T:
        raise IndexError(f"step {i} out of range for trajectory of length {T}")
    r = np.asarray(sampled_rewards, dtype=np.float64)
    others = np.concatenate([r[:i], r[i + 1:]])
    return traj.episodic_return - others.sum()


def gaussian_nll(r_tilde, params: RewardDistributionParams):
    """``log sigma + (r_tilde - mu)^2 / (2 sigma^2)`` (the 1/2 log 2pi term dropped)."""
    d = r_tilde - params.mu
    return np.log(params.sigma) + d * d / (2.0 * params.sigma**2)


def skew_normal_nll(r_tilde, params: RewardDistributionParams):
    """Skew-normal NLL, shifted so that ``lam = 0`` gives :func:`gaussian_nll` exactly."""
    z = (r_tilde - params.mu) / params.sigma
    return gaussian_nll(r_tilde, params) - (_LOG2 + normal.log_cdf(params.lam * z))


def head_loss(family, mu, sigma, lam, episodic_return, noise):
    """Leave-one-out loss of one trajectory given its per-step heads.

    ``noise`` is a ``(T, T)`` array with ``noise[i, t]`` used for step ``t``
    when step ``i`` is left out (diagonal ignored), or ``None`` for no noise.
    Returns ``(loss, d_mu, d_sigma, d_lam, delta)`` where ``delta[i]`` is
    ``r_tilde_i - mu_i``; ``d_lam`` is ``None`` unless the family is skew-normal.
    """
    family = Family(family)
    T = len(mu)
    if noise is None:
        eps = None
        other = np.zeros(T)
    else:
        eps = np.array(noise, dtype=np.float64)
        np.fill_diagonal(eps, 0.0)
        other = eps @ sigma
    delta = (episodic_return - mu.sum()) - other
    d_lam = None
    if family is Family.FIXED_SIGMA_MSE:
        per_step = 0.5 * delta * delta
        g = delta
        h = np.zeros(T)
    elif family is Family.GAUSSIAN:
        per_step = np.log(sigma) + delta * delta / (2.0 * sigma * sigma)
        g = delta / sigma**2
        h = 1.0 / sigma - delta * delta / sigma**3
    else:
        z = delta / sigma
        per_step = (np.log(sigma) + delta * delta / (2.0 * sigma * sigma)
                    - (_LOG2 + normal.log_cdf(lam * z)))
        gam = normal.mills_ratio(lam * z)
        g = (z - lam * gam) / sigma
        h = (1.0 - z * z + lam * gam * z) / sigma
        d_lam = -gam * z / T
    loss = per_step.mean()
    d_mu = np.full(T, -g.sum() / T)
    d_sigma = h / T
    if eps is not None:
        d_sigma = d_sigma - (eps.T @ g) / T
    return loss, d_mu, d_sigma, d_lam, delta


@dataclass
class LossContext:
    """What a loss evaluation leaves behind for the backward pass."""

    cache: nn.ForwardCache
    output_grad: np.ndarray
    noises: list
    mu: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray | None
    deltas: list = field(default_factory=list)
    losses: list = field(default_factory=list)


def _draw_noise(model, T, rng):
    if model.family is Family.FIXED_SIGMA_MSE:
        return None
    if model.shared_noise:
        return np.tile(rng.standard_normal(T), (T, 1))
    return rng.standard_normal((T, T))


def _batch_loss(model, trajs, rng=None, noises=None):
    lengths = [len(tr) for tr in trajs]
    x = np.concatenate([tr.inputs for tr in trajs], axis=0)
    if x.shape[1] != model.net.n_in:
        raise ShapeError(f"trajectory width {x.shape[1]} != model input {model.net.n_in}")
    mu, sigma, lam, dsig_draw, cache = model._heads(x)
    if noises is None:
        if rng is None and model.family is not Family.FIXED_SIGMA_MSE:
            raise ValueError("an rng (or explicit noise) is required")
        noises = [_draw_noise(model, T, rng) for T in lengths]
    M = len(trajs)
    out_grad = np.zeros((len(x), model.net.n_out))
    ctx = LossContext(cache, out_grad, noises, mu, sigma, lam)
    start = 0
    for j, (tr, T) in enumerate(zip(trajs, lengths)):
        sl = slice(start, start + T)
        loss, d_mu, d_sigma, d_lam, delta = head_loss(
            model.family, mu[sl], sigma[sl], None if lam is None else lam[sl],
            tr.episodic_return, noises[j])
        if not np.isfinite(loss):
            raise NumericError(f"non-finite reward-model loss on trajectory {j} "
                               f"at update {model.update_index}")
        out_grad[sl, 0] = d_mu / M
        if model.family is not Family.FIXED_SIGMA_MSE:
            out_grad[sl, 1] = d_sigma * dsig_draw[sl] / M
        if d_lam is not None:
            out_grad[sl, 2] = d_lam / M
        ctx.losses.append(loss)
        ctx.deltas.append(delta)
        start += T
    return float(np.mean(ctx.losses)), ctx


def trajectory_loss(model: RewardModel, traj: Trajectory, rng=None, noise=None):
    """Leave-one-out loss of a single trajectory.

    Fresh noise ``eps[i, t]`` is drawn from ``rng`` for every left-out index
    ``i`` and step ``t`` unless ``noise`` is given (to freeze it).
    Returns ``(loss, context)``; pass the context to :func:`loss_gradients`.
    """
    noises = None if noise is None else [noise]
    return _batch_loss(model, [traj], rng=rng, noises=noises)


def loss_gradients(model: RewardModel, ctx: LossContext):
    """Parameter gradients (aligned with ``model.net.params()``) of a loss context."""
    w_grads, b_grads, _ = nn.backward(model.net, ctx.cache, ctx.output_grad)
    return nn.interleave(w_grads, b_grads)


def loo_samples(model: RewardModel, traj: Trajectory, rng):
    """Draw the leave-one-out targets of one trajectory, keeping the raw noise."""
    mu, sigma, _, _, _ = model._heads(traj.inputs)
    T = len(traj)
    noise = _draw_noise(model, T, rng)
    eps = np.zeros((T, T)) if noise is None else noise
    samples = []
    for i in range(T):
        drawn = mu + eps[i] * sigma
        samples.append(LooSample(i, eps[i].copy(), loo_return(traj, drawn, i)))
    return samples


def mse_rd_loss(model: RewardModel, traj: Trajectory):
    """Squared return-decomposition residual ``(R - sum_t mu_t)^2``."""
    mu, *_ = model._heads(traj.inputs)
    resid = traj.episodic_return - mu.sum()
    return float(resid * resid)


def train_step(model: RewardModel, minibatch, learning_rate, rng):
    """One Adam step on the mean leave-one-out loss of ``minibatch``.

    Returns the loss evaluated before the update. Summary statistics of the
    evaluation are left in ``model.last_stats``.
    """
    if not minibatch:
        raise ValueError("empty minibatch")
    loss, ctx = _batch_loss(model, list(minibatch), rng=rng)
    grads = loss_gradients(model, ctx)
    nn.adam_step(model.net.params(), grads, model.adam, learning_rate)
    model.net.mark_updated()
    model.update_index += 1
    model.last_stats = {
        "mean_sigma": float(ctx.sigma.mean()),
        "mean_abs_residual": float(np.mean(np.abs(np.concatenate(ctx.deltas)))),
    }
    return loss


def redistribute(model: RewardModel, traj_or_inputs):
    """Dense proxy rewards: the predicted mean ``mu`` at every step."""
    x = traj_or_inputs.inputs if isinstance(traj_or_inputs, Trajectory) else traj_or_inputs
    mu, *_ = model._heads(x)
    return mu.copy()


# -- checkpoints ------------------------------------------------------------

def dumps_model(model: RewardModel) -> str:
    header = (f"reward_model 1\nfamily {model.family.value}\n"
              f"sigma_bounds {model.sigma_min!r} {model.sigma_max!r}\n")
    return header + nn.dumps_net(model.net)


def loads_model(text: str) -> RewardModel:
    lines = text.splitlines()
    if lines[:1] != ["reward_model 1"]:
        raise ValueError("not a reward_model checkpoint")
    family = lines[1].split()[1]
    lo, hi = (float(v) for v in lines[2].split()[1:3])
    return RewardModel(family, nn.loads_net("\n".join(lines[3:])), sigma_min=lo, sigma_max=hi)


LOSS_CURVE_COLUMNS = ("update_index", "loss", "mean_sigma", "mean_abs_residual")
