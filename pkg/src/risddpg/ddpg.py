"""DDPG agent: actor/critic pairs with targets, replay, TD learning and the training loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import neural
from .env import EnvSpec, RISEnv, make_state
from .errors import ConfigError
from .neural import AdamState, Network

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hyperparams:
    episodes: int = 100
    steps_per_episode: int = 200
    discount: float = 0.95
    soft_update: float = 0.005
    minibatch: int = 32
    learning_rate: float = 1e-3
    buffer_capacity: int = 100_000
    exploration_noise_std: float = 0.1
    hidden: int = 64
    literal_eq9: bool = False

    def __post_init__(self):
        for name in ("episodes", "steps_per_episode", "minibatch", "buffer_capacity", "hidden"):
            if getattr(self, name) < 1:
                raise ConfigError("must be >= 1", name)
        if not 0.0 <= self.discount < 1.0:
            raise ConfigError("must lie in [0, 1)", "discount")
        if not 0.0 < self.soft_update <= 1.0:
            raise ConfigError("must lie in (0, 1]", "soft_update")
        if self.learning_rate <= 0:
            raise ConfigError("must be positive", "learning_rate")
        if self.exploration_noise_std < 0:
            raise ConfigError("must be non-negative", "exploration_noise_std")
        if self.minibatch > self.buffer_capacity:
            raise ConfigError("minibatch exceeds buffer_capacity", "minibatch")


# --------------------------------------------------------------------------
# replay


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminal: np.ndarray
    indices: np.ndarray | None = None

    def __len__(self):
        return self.rewards.shape[0]


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.terminal = np.zeros(capacity, dtype=bool)
        self.inserted = 0

    def __len__(self):
        return min(self.inserted, self.capacity)

    def add(self, state, action, r, next_state, terminal: bool) -> None:
        i = self.inserted % self.capacity
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = r
        self.next_states[i] = next_state
        self.terminal[i] = terminal
        self.inserted += 1

    def slot_order(self) -> np.ndarray:
        """Storage slots from oldest to newest."""
        n = len(self)
        start = self.inserted - n
        return np.arange(start, self.inserted) % self.capacity

    def batch(self, idx: np.ndarray) -> Batch:
        return Batch(
            self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.terminal[idx], idx
        )

    def sample(self, rng: np.random.Generator, size: int) -> Batch:
        """``size`` transitions drawn uniformly (with replacement)."""
        if len(self) == 0:
            raise ValueError("cannot sample from an empty buffer")
        return self.batch(rng.integers(0, len(self), size=size))


# --------------------------------------------------------------------------
# networks


@dataclass
class AgentNets:
    actor: Network
    critic: Network
    target_actor: Network
    target_critic: Network
    actor_opt: AdamState
    critic_opt: AdamState

    @classmethod
    def create(cls, state_dim: int, action_dim: int, hidden: int, lr: float, rng: np.random.Generator) -> AgentNets:
        actor = neural.build_actor(state_dim, action_dim, hidden, rng)
        critic = neural.build_critic(state_dim, action_dim, hidden, rng)
        return cls.from_networks(actor, critic, lr)

    @classmethod
    def from_networks(cls, actor: Network, critic: Network, lr: float) -> AgentNets:
        return cls(
            actor,
            critic,
            actor.copy(),
            critic.copy(),
            AdamState.for_network(actor, lr),
            AdamState.for_network(critic, lr),
        )


def select_action(nets: AgentNets, state, noise_std: float, rng: np.random.Generator) -> np.ndarray:
    """Policy output plus i.i.d. N(0, noise_std^2) exploration noise (no clipping)."""
    a = nets.actor(state)
    if noise_std > 0:
        a = a + noise_std * rng.standard_normal(a.shape)
    return a


def infer(actor: Network, state) -> np.ndarray:
    return actor(state)


def td_targets(nets: AgentNets, batch: Batch, discount: float, literal_eq9: bool = False) -> np.ndarray:
    """y_i = r_i + discount * Q'(s'_i, pi'(s'_i)), without bootstrap on terminal samples.

    With ``literal_eq9`` the bootstrap is instead dropped for the last sample of
    the minibatch only, whatever its terminal flag.
    """
    next_actions = nets.target_actor(batch.next_states)
    q_next = nets.target_critic(batch.next_states, next_actions)[:, 0]
    if literal_eq9:
        keep = np.ones(len(batch))
        keep[-1] = 0.0
    else:
        keep = 1.0 - batch.terminal.astype(np.float64)
    return batch.rewards + discount * keep * q_next


def critic_update(nets: AgentNets, batch: Batch, targets: np.ndarray) -> float:
    """One Adam step on the mean squared TD error; returns the loss before the step."""
    q, cache = nets.critic.forward(batch.states, batch.actions)
    err = q[:, 0] - targets
    D = err.shape[0]
    _, grads = nets.critic.backward(cache, (2.0 / D) * err[:, None])
    neural.adam_step(nets.critic, grads, nets.critic_opt)
    return float(np.mean(err * err))


def actor_gradient(nets: AgentNets, states: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean Q under the policy and the gradient of its negative w.r.t. actor parameters."""
    a, a_cache = nets.actor.forward(states)
    q, q_cache = nets.critic.forward(states, a)
    D = q.shape[0]
    (_, dq_da), _ = nets.critic.backward(q_cache, np.full((D, 1), -1.0 / D), want_param_grads=False)
    _, grads = nets.actor.backward(a_cache, dq_da)
    return float(np.mean(q)), grads


def actor_update(nets: AgentNets, batch: Batch) -> float:
    """Deterministic policy-gradient ascent on mean Q; returns the pre-step mean Q."""
    objective, grads = actor_gradient(nets, batch.states)
    neural.adam_step(nets.actor, grads, nets.actor_opt)
    return objective


def soft_update(nets: AgentNets, tau: float) -> None:
    """theta' <- tau * theta + (1 - tau) * theta' for both target networks."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    for policy, target in ((nets.actor, nets.target_actor), (nets.critic, nets.target_critic)):
        target.params *= 1.0 - tau
        target.params += tau * policy.params
        target.touch()


# --------------------------------------------------------------------------
# evaluation


class EvalSet:
    """A frozen set of seeded environments used to score policies."""

    def __init__(self, spec: EnvSpec, size: int, seed: int):
        if size < 1:
            raise ConfigError("must be >= 1", "eval_set_size")
        self.spec = spec
        self.envs: list[RISEnv] = []
        states = []
        for child in np.random.SeedSequence(seed).spawn(size):
            env = RISEnv(spec)
            states.append(env.reset(np.random.default_rng(child)))
            self.envs.append(env)
        self.initial_states = np.stack(states)

    def __len__(self):
        return len(self.envs)

    def policy_rewards(self, actor: Network, steps: int) -> np.ndarray:
        """Reward of each environment after rolling the noiseless policy ``steps`` times."""
        states = self.initial_states.copy()
        rewards = np.zeros(len(self.envs))
        for _ in range(steps):
            actions = actor(states)
            for i, env in enumerate(self.envs):
                r, rates, _ = env.evaluate(actions[i])
                states[i] = make_state(env.presence, actions[i], rates)
                rewards[i] = r
        return rewards


# --------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    best_actor: Network
    best_critic: Network
    best_reward: float
    best_episode: int
    log: list[dict] = field(default_factory=list)
    nets: AgentNets | None = None
    buffer: ReplayBuffer | None = None


LOG_COLUMNS = ["episode", "mean_eval_reward", "best_reward_so_far", "critic_loss", "wall_time"]


def train(
    hp: Hyperparams,
    make_env: Callable[[], RISEnv],
    seed: int,
    eval_set: EvalSet,
    eval_steps: int = 10,
    on_episode: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Run ``hp.episodes`` episodes of DDPG and keep the best-evaluating weights.

    Each episode draws a fresh environment (UE set and channel stay fixed over
    its steps). Updates start once the buffer holds a full minibatch. After
    every episode the noiseless policy is scored on ``eval_set`` and the
    weights with the best mean reward so far are retained.
    """
    init_ss, env_ss, noise_ss, replay_ss = np.random.SeedSequence(seed).spawn(4)
    env_rng = np.random.default_rng(env_ss)
    noise_rng = np.random.default_rng(noise_ss)
    replay_rng = np.random.default_rng(replay_ss)

    env = make_env()
    S, A = env.spec.state_dim, env.spec.action_dim
    nets = AgentNets.create(S, A, hp.hidden, hp.learning_rate, np.random.default_rng(init_ss))
    buffer = ReplayBuffer(hp.buffer_capacity, S, A)

    best_reward = -np.inf
    best_episode = -1
    best_actor, best_critic = nets.actor.copy(), nets.critic.copy()
    rows = []
    t0 = time.perf_counter()
    for episode in range(1, hp.episodes + 1):
        if episode > 1:
            env = make_env()
        state = env.reset(env_rng)
        losses = []
        for t in range(1, hp.steps_per_episode + 1):
            action = select_action(nets, state, hp.exploration_noise_std, noise_rng)
            next_state, r, _ = env.step(action)
            buffer.add(state, action, r, next_state, t == hp.steps_per_episode)
            if len(buffer) >= hp.minibatch:
                batch = buffer.sample(replay_rng, hp.minibatch)
                y = td_targets(nets, batch, hp.discount, hp.literal_eq9)
                losses.append(critic_update(nets, batch, y))
                actor_update(nets, batch)
                soft_update(nets, hp.soft_update)
            state = next_state
        score = float(np.mean(eval_set.policy_rewards(nets.actor, eval_steps)))
        if score > best_reward:
            best_reward, best_episode = score, episode
            best_actor, best_critic = nets.actor.copy(), nets.critic.copy()
        row = {
            "episode": episode,
            "mean_eval_reward": score,
            "best_reward_so_far": best_reward,
            "critic_loss": float(np.mean(losses)) if losses else float("nan"),
            "wall_time": time.perf_counter() - t0,
        }
        rows.append(row)
        log.debug("episode %d eval %.4f best %.4f", episode, score, best_reward)
        if on_episode is not None:
            on_episode(row)
    return TrainResult(best_actor, best_critic, best_reward, best_episode, rows, nets, buffer)
