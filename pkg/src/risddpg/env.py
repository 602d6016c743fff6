"""Markov decision process around the multi-RIS downlink.

Action layout (length ``2(MK + LN)``)::

    [Re(w_1..w_K), Im(w_1..w_K), Re(z_11..z_LN), Im(z_11..z_LN)]

where ``w_k`` are the precoder columns stacked one after another and each RIS
element carries a complex pair ``z`` whose argument is the phase decision.

State layout (length ``2(MK + LN + K)``)::

    [u_1..u_K, previous action, previous per-UE rates]
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .complexlin import ShapeError
from .errors import ConfigError, StateError
from .ris import ReflectionParams, clamp_merge, clamp_phase

FIXED = "fixed"
RANDOM = "random"


def action_dim(M: int, K: int, L: int, N: int) -> int:
    return 2 * (M * K + L * N)


def state_dim(M: int, K: int, L: int, N: int) -> int:
    return 2 * (M * K + L * N + K)


@dataclass(frozen=True)
class UEDistribution:
    """How many UEs each RIS serves in an episode."""

    mode: str = RANDOM
    fixed_per_ris: int = 2
    per_ris_range: tuple[int, int] = (1, 4)

    def __post_init__(self):
        if self.mode not in (FIXED, RANDOM):
            raise ConfigError(f"mode must be 'fixed' or 'random', got {self.mode!r}", "mode")
        lo, hi = self.per_ris_range
        if not 1 <= lo <= hi:
            raise ConfigError("need 1 <= low <= high", "per_ris_range")
        if self.fixed_per_ris < 1:
            raise ConfigError("must be >= 1", "fixed_per_ris")


@dataclass(frozen=True)
class EnvSpec:
    topology: ch.Topology = field(default_factory=ch.Topology)
    channel: ch.ChannelParams = field(default_factory=ch.ChannelParams)
    reflection: ReflectionParams = field(default_factory=ReflectionParams)
    p_max: float = 0.1  # W
    noise_power: float = 10 ** ((-94.0 - 30.0) / 10)  # W
    ues: UEDistribution = field(default_factory=UEDistribution)

    def __post_init__(self):
        if self.p_max <= 0:
            raise ConfigError("must be positive", "p_max")
        if self.noise_power <= 0:
            raise ConfigError("must be positive", "noise_power")
        top = self.topology
        hi = self.ues.fixed_per_ris if self.ues.mode == FIXED else self.ues.per_ris_range[1]
        if hi > top.max_ue_per_ris:
            raise ConfigError(
                f"{hi} UEs per RIS exceeds max_ue_per_ris={top.max_ue_per_ris}", "ues"
            )

    @property
    def dims(self) -> tuple[int, int, int, int]:
        t = self.topology
        return t.num_bs_antennas, t.num_ue_slots, t.num_ris, t.elements_per_ris

    @property
    def action_dim(self) -> int:
        return action_dim(*self.dims)

    @property
    def state_dim(self) -> int:
        return state_dim(*self.dims)


@dataclass(frozen=True)
class FeasiblePoint:
    W: np.ndarray  # (M, K) complex
    phases: np.ndarray  # (L, N) radians, clamped
    reflections: np.ndarray  # (L, N) complex diagonals


# --------------------------------------------------------------------------
# encoding


def encode_action(W: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Pack a precoder (M, K) and phases (L, N) into a flat action vector."""
    w = np.asarray(W, dtype=np.complex128).T.reshape(-1)
    z = np.exp(1j * np.asarray(phases, dtype=np.float64)).reshape(-1)
    return np.concatenate([w.real, w.imag, z.real, z.imag])


def split_action(action: np.ndarray, M: int, K: int, L: int, N: int):
    """Unpack flat action(s) into complex W (..., M, K) and element pairs (..., L, N).

    A leading batch axis is allowed.
    """
    action = np.asarray(action, dtype=np.float64)
    if action.ndim == 0 or action.shape[-1] != action_dim(M, K, L, N):
        raise ShapeError(f"action must have length {action_dim(M, K, L, N)}, got shape {action.shape}")
    lead = action.shape[:-1]
    mk, ln = M * K, L * N
    w = action[..., :mk] + 1j * action[..., mk : 2 * mk]
    z = action[..., 2 * mk : 2 * mk + ln] + 1j * action[..., 2 * mk + ln :]
    return np.swapaxes(w.reshape(lead + (K, M)), -1, -2), z.reshape(lead + (L, N))


def make_state(presence, action, rates) -> np.ndarray:
    return np.concatenate(
        [np.asarray(presence, dtype=np.float64), np.asarray(action, dtype=np.float64), np.asarray(rates, dtype=np.float64)]
    )


def split_state(state: np.ndarray, K: int):
    """(presence, previous action, previous rates) views of a flat state."""
    return state[:K], state[K:-K], state[-K:]


# --------------------------------------------------------------------------
# projection, rates, reward


def project_action(
    raw: np.ndarray,
    presence: np.ndarray,
    p_max: float,
    reflection: ReflectionParams,
    dims: tuple[int, int, int, int],
) -> FeasiblePoint:
    """Map a raw action onto the feasible set.

    Absent UEs get zero precoders, W is rescaled to ``||W||_F^2 = p_max``
    (a zero W stays zero), each element pair is normalised to the unit circle
    and its argument is clamped and merged with the amplitude response.
    ``raw`` may carry a leading batch axis; the result then does too.
    """
    presence = np.asarray(presence, dtype=np.float64)
    if not np.all(np.any(presence, axis=-1)):
        raise ConfigError("no UE is present", "presence")
    W, z = split_action(raw, *dims)
    W = W * presence[..., None, :]
    power = np.sum(W.real**2 + W.imag**2, axis=(-2, -1), keepdims=True)
    scale = np.sqrt(p_max / np.where(power > 0.0, power, 1.0))
    W = W * np.where(power > 0.0, scale, 1.0)
    # argument of z/|z|; a zero pair maps to phase 0
    phases = clamp_phase(reflection, np.arctan2(z.imag, z.real))
    return FeasiblePoint(W=W, phases=phases, reflections=np.asarray(clamp_merge(reflection, phases)))


def per_ue_rate(H: np.ndarray, W: np.ndarray, noise_power: float, presence) -> np.ndarray:
    """Achievable rate (bps/Hz) of every UE slot; absent UEs get 0.

    ``H`` stacks the effective rows h_k (K, M); ``W`` stacks precoders as columns (M, K).
    """
    presence = np.asarray(presence, dtype=bool)
    G = H @ W  # G[k, i] = h_k w_i
    power = G.real**2 + G.imag**2
    power[:, ~presence] = 0.0
    signal = np.diagonal(power).copy()
    interference = power.sum(axis=1) - signal
    rates = np.log2(1.0 + signal / (interference + noise_power))
    rates[~presence] = 0.0
    return rates


def reward(rates) -> float:
    return float(np.sum(rates))


def draw_presence(rng: np.random.Generator, topology: ch.Topology, ues: UEDistribution) -> np.ndarray:
    L, per = topology.num_ris, topology.max_ue_per_ris
    if ues.mode == FIXED:
        counts = np.full(L, ues.fixed_per_ris)
    else:
        lo, hi = ues.per_ris_range
        counts = rng.integers(lo, hi + 1, size=L)
    presence = (np.arange(per)[None, :] < counts[:, None]).astype(np.float64).reshape(-1)
    if not presence.any():
        raise ConfigError("drew an episode with no UE present", "ues")
    return presence


def random_raw_action(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=dim)


# --------------------------------------------------------------------------


class RISEnv:
    """One multi-RIS downlink episode: channel and UE set are fixed after reset."""

    def __init__(self, spec: EnvSpec):
        self.spec = spec
        self.presence: np.ndarray | None = None
        self.realization: ch.ChannelRealization | None = None
        self.state: np.ndarray | None = None

    @property
    def dims(self):
        return self.spec.dims

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        spec = self.spec
        presence = draw_presence(rng, spec.topology, spec.ues)
        real = ch.draw_realization(rng, spec.topology, spec.channel)
        self.load(presence, real)
        a0 = random_raw_action(rng, spec.action_dim)
        _, rates, _ = self.evaluate(a0)
        self.state = make_state(self.presence, a0, rates)
        return self.state.copy()

    def load(self, presence, realization: ch.ChannelRealization) -> None:
        """Install a given UE set and channel (used by reset and by tests)."""
        M, K, L, N = self.dims
        presence = np.asarray(presence, dtype=np.float64)
        if presence.shape != (K,):
            raise ShapeError(f"presence must have length {K}")
        if (realization.num_ue, realization.num_bs_antennas, realization.num_ris, realization.elements_per_ris) != (
            K,
            M,
            L,
            N,
        ):
            raise ShapeError("channel realization does not match the topology")
        self.presence = presence
        self.realization = realization
        self.state = make_state(presence, np.zeros(self.spec.action_dim), np.zeros(K))

    def evaluate(self, action, p_max: float | None = None):
        """Reward, per-UE rates and feasible point of ``action`` without advancing the episode."""
        if self.realization is None:
            raise StateError("environment has not been reset")
        spec = self.spec
        point = project_action(
            action, self.presence, spec.p_max if p_max is None else p_max, spec.reflection, self.dims
        )
        return self.evaluate_point(point)

    def evaluate_point(self, point: FeasiblePoint):
        if self.realization is None:
            raise StateError("environment has not been reset")
        H = ch.effective_channel(self.realization, point.reflections)
        rates = per_ue_rate(H, point.W, self.spec.noise_power, self.presence)
        return reward(rates), rates, point

    def step(self, action):
        """Apply ``action``; returns (next state, reward, per-UE rates)."""
        if self.state is None:
            raise StateError("environment has not been reset")
        action = np.asarray(action, dtype=np.float64)
        r, rates, _ = self.evaluate(action)
        self.state = make_state(self.presence, action, rates)
        return self.state.copy(), r, rates
