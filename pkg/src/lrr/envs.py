"""Desk-scale continuous-control environments and the episodic-reward wrapper.

All dynamics are explicit Euler with ``dt = 0.05`` and deterministic given the
reset seed; only the initial state is random.

PointMass2D
    state ``(x, y, vx, vy)``, action = acceleration in ``[-1, 1]^2``,
    ``v += a dt; p += v dt`` (old velocity), reward ``-||p' - goal||`` on the
    post-step position. Reset: position uniform in ``[-1, 1]^2``, velocity 0.
Pendulum
    state ``(cos th, sin th, th_dot)``, torque in ``[-2, 2]``, gravity 10,
    unit mass and length, ``|th_dot| <= 8``. Reward
    ``-(th^2 + 0.1 th_dot^2 + 0.001 u^2)`` on the pre-step state with ``th``
    wrapped to ``[-pi, pi)``. Reset: ``th ~ U[-pi, pi]``, ``th_dot ~ U[-1, 1]``.
DelayedChain
    cells ``0..n-1``; state ``(cell/(n-1), has_key)``, action in ``[-1, 1]``
    moves right above 1/3, left below -1/3, else stays. The key sits in the
    last cell; returning to cell 0 holding it terminates with reward 1. Every
    other reward is 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError

DT = 0.05
DEFAULT_HORIZON = 200


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    action_low: tuple
    action_high: tuple
    max_episode_length: int = DEFAULT_HORIZON

    def __post_init__(self):
        lo = np.asarray(self.action_low, dtype=float)
        hi = np.asarray(self.action_high, dtype=float)
        if lo.shape != (self.action_dim,) or hi.shape != (self.action_dim,):
            raise ShapeError("action bounds must have action_dim entries")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
            raise ValueError("action bounds must be finite with low < high")
        if self.max_episode_length < 1:
            raise ValueError("max_episode_length must be positive")


@dataclass
class StepResult:
    next_state: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    inner_reward: float | None = None

    def __post_init__(self):
        if self.inner_reward is None:
            self.inner_reward = self.reward


class Env:
    """Base class: handles seeding, action clipping, horizon and done-state."""

    spec: EnvSpec

    def __init__(self, max_episode_length=DEFAULT_HORIZON):
        self.spec = self._make_spec(max_episode_length)
        self._low = np.asarray(self.spec.action_low, dtype=float)
        self._high = np.asarray(self.spec.action_high, dtype=float)
        self.clip_count = 0
        self.t = 0
        self._done = True
        self._rng = None

    def _make_spec(self, horizon):
        raise NotImplementedError

    def reset(self, seed):
        self._rng = np.random.default_rng(seed)
        self.t = 0
        self._done = False
        self._reset_state(self._rng)
        return self.observe()

    def step(self, action) -> StepResult:
        if self._done:
            raise ContractError("step() called on a finished episode; call reset()")
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape != (self.spec.action_dim,):
            raise ShapeError(f"action must have {self.spec.action_dim} entries")
        clipped = np.clip(a, self._low, self._high)
        if np.any(clipped != a):
            self.clip_count += 1
        reward, terminated = self._advance(clipped)
        self.t += 1
        truncated = (not terminated) and self.t >= self.spec.max_episode_length
        self._done = terminated or truncated
        return StepResult(self.observe(), float(reward), bool(terminated), bool(truncated))

    def observe(self):
        raise NotImplementedError

    def _reset_state(self, rng):
        raise NotImplementedError

    def _advance(self, action):
        raise NotImplementedError


class PointMass2D(Env):
    name = "PointMass2D"

    def __init__(self, max_episode_length=DEFAULT_HORIZON, goal=(0.0, 0.0)):
        self.goal = np.asarray(goal, dtype=float)
        super().__init__(max_episode_length)

    def _make_spec(self, horizon):
        return EnvSpec(self.name, 4, 2, (-1.0, -1.0), (1.0, 1.0), horizon)

    def _reset_state(self, rng):
        self.pos = rng.uniform(-1.0, 1.0, size=2)
        self.vel = np.zeros(2)

    def observe(self):
        return np.concatenate([self.pos, self.vel])

    def _advance(self, action):
        self.pos = self.pos + self.vel * DT
        self.vel = self.vel + action * DT
        return -float(np.linalg.norm(self.pos - self.goal)), False


def _angle_normalize(th):
    return ((th + np.pi) % (2 * np.pi)) - np.pi


class Pendulum(Env):
    name = "Pendulum"
    max_speed = 8.0
    max_torque = 2.0
    g = 10.0

    def _make_spec(self, horizon):
        return EnvSpec(self.name, 3, 1, (-self.max_torque,), (self.max_torque,), horizon)

    def _reset_state(self, rng):
        self.th = rng.uniform(-np.pi, np.pi)
        self.th_dot = rng.uniform(-1.0, 1.0)

    def observe(self):
        return np.array([np.cos(self.th), np.sin(self.th), self.th_dot])

    def _advance(self, action):
        u = float(action[0])
        th, th_dot = self.th, self.th_dot
        cost = _angle_normalize(th) ** 2 + 0.1 * th_dot**2 + 0.001 * u**2
        acc = 3.0 * self.g / 2.0 * np.sin(th) + 3.0 * u
        self.th = th + th_dot * DT
        self.th_dot = float(np.clip(th_dot + acc * DT, -self.max_speed, self.max_speed))
        return -cost, False


class DelayedChain(Env):
    name = "DelayedChain"

    def __init__(self, max_episode_length=DEFAULT_HORIZON, n_cells=6):
        self.n_cells = int(n_cells)
        super().__init__(max_episode_length)

    def _make_spec(self, horizon):
        return EnvSpec(self.name, 2, 1, (-1.0,), (1.0,), horizon)

    def _reset_state(self, rng):
        self.cell = 0
        self.has_key = False

    def observe(self):
        return np.array([self.cell / (self.n_cells - 1), float(self.has_key)])

    def _advance(self, action):
        a = float(action[0])
        if a > 1.0 / 3.0:
            self.cell = min(self.cell + 1, self.n_cells - 1)
        elif a < -1.0 / 3.0:
            self.cell = max(self.cell - 1, 0)
        if self.cell == self.n_cells - 1:
            self.has_key = True
        if self.cell == 0 and self.has_key:
            return 1.0, True
        return 0.0, False


class EpisodicWrapper:
    """Withhold rewards until the episode ends, then emit their sum.

    ``StepResult.reward`` is the emitted (episodic) reward;
    ``StepResult.inner_reward`` carries the wrapped environment's dense one.
    """

    def __init__(self, env: Env):
        self.env = env
        self.spec = env.spec
        self.accumulated_return = 0.0

    def reset(self, seed):
        self.accumulated_return = 0.0
        return self.env.reset(seed)

    def step(self, action) -> StepResult:
        res = self.env.step(action)
        self.accumulated_return += res.reward
        done = res.terminated or res.truncated
        emitted = self.accumulated_return if done else 0.0
        return StepResult(res.next_state, emitted, res.terminated, res.truncated,
                          inner_reward=res.reward)

    def __getattr__(self, item):
        return getattr(self.env, item)


ENVIRONMENTS = {cls.name: cls for cls in (PointMass2D, Pendulum, DelayedChain)}


def make_env(name, horizon=DEFAULT_HORIZON, episodic=True):
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; known: {sorted(ENVIRONMENTS)}") from None
    env = cls(max_episode_length=horizon)
    return EpisodicWrapper(env) if episodic else env


def write_trajectory_dump(path, episodes):
    """Write ``(episode, t, state..., action..., inner_reward, emitted_reward)`` rows.

    ``episodes`` yields ``(states, actions, inner_rewards, emitted_rewards)``
    tuples, optionally with a fifth entry holding the rewards stored for the
    learner, written as a trailing ``stored_reward`` column.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header_written = False
        for ep, (states, actions, inner, emitted, *rest) in enumerate(episodes):
            stored = rest[0] if rest else None
            states = np.atleast_2d(states)
            actions = np.atleast_2d(actions)
            if not header_written:
                writer.writerow(["episode", "t"]
                                + [f"s{k}" for k in range(states.shape[1])]
                                + [f"a{k}" for k in range(actions.shape[1])]
                                + ["inner_reward", "emitted_reward"]
                                + ([] if stored is None else ["stored_reward"]))
                header_written = True
            for t in range(len(states)):
                writer.writerow([ep, t, *map(repr, states[t].tolist()),
                                 *map(repr, actions[t].tolist()),
                                 repr(float(inner[t])), repr(float(emitted[t])),
                                 *([] if stored is None else [repr(float(stored[t]))])])
