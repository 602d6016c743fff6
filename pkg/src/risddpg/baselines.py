"""Non-learning reference points: random feasible actions and zero-forcing with random RIS phases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import effective_channel
from .complexlin import condition_number, hermitian
from .env import FeasiblePoint, RISEnv, random_raw_action
from .ris import clamp_merge

RANDOM = "random"
ZF_RANDOM_PHASE = "zero_forcing_random_phase"
KINDS = (RANDOM, ZF_RANDOM_PHASE)


@dataclass(frozen=True)
class BaselineResult:
    reward: float
    rates: np.ndarray
    point: FeasiblePoint
    fallback: bool = False  # zero-forcing fell back to matched filtering


def random_baseline(rng: np.random.Generator, env: RISEnv, p_max: float | None = None) -> BaselineResult:
    """Uniform raw action in [-1, 1]^dim, projected and evaluated."""
    r, rates, point = env.evaluate(random_raw_action(rng, env.spec.action_dim), p_max)
    return BaselineResult(r, rates, point)


def zero_forcing_directions(H: np.ndarray, cond_limit: float = 1e6) -> tuple[np.ndarray, bool]:
    """Unit-norm precoder directions (M, K') for the rows of ``H`` (K', M).

    Zero forcing ``H^H (H H^H)^-1`` when K' <= M and H H^H is well conditioned,
    otherwise matched filtering ``H^H``. The flag reports the fallback.
    """
    Kp, M = H.shape
    Hh = hermitian(H)
    fallback = Kp > M or condition_number(H @ Hh) >= cond_limit
    if fallback:
        D = Hh
    else:
        D = Hh @ np.linalg.inv(H @ Hh)
    norms = np.linalg.norm(D, axis=0)
    norms[norms == 0.0] = 1.0
    return D / norms, fallback


def zf_baseline(
    rng: np.random.Generator, env: RISEnv, p_max: float | None = None, cond_limit: float = 1e6
) -> BaselineResult:
    """Random feasible RIS phases, zero-forcing precoder with an equal power split."""
    spec = env.spec
    M, K, L, N = env.dims
    p_max = spec.p_max if p_max is None else p_max
    refl = spec.reflection
    phases = rng.uniform(refl.theta_min, refl.theta_max, size=(L, N))
    reflections = np.asarray(clamp_merge(refl, phases)).reshape(L, N)
    H = effective_channel(env.realization, reflections)
    present = np.flatnonzero(env.presence)
    D, fallback = zero_forcing_directions(H[present], cond_limit)
    W = np.zeros((M, K), dtype=np.complex128)
    W[:, present] = D * np.sqrt(p_max / present.size)
    r, rates, point = env.evaluate_point(FeasiblePoint(W, phases, reflections))
    return BaselineResult(r, rates, point, fallback)


def run_baseline(kind: str, rng: np.random.Generator, env: RISEnv, p_max: float | None = None) -> BaselineResult:
    if kind == RANDOM:
        return random_baseline(rng, env, p_max)
    if kind == ZF_RANDOM_PHASE:
        return zf_baseline(rng, env, p_max)
    raise ValueError(f"unknown baseline {kind!r}")


def mean_baseline_reward(kind: str, envs, draws: int, seed: int, p_max: float | None = None) -> np.ndarray:
    """Per-environment mean reward of ``draws`` baseline draws.

    Every environment gets its own generator derived from ``seed`` so the
    draws do not depend on the order or the power budget of the evaluation.
    """
    out = np.zeros(len(envs))
    for i, (env, child) in enumerate(zip(envs, np.random.SeedSequence(seed).spawn(len(envs)))):
        rng = np.random.default_rng(child)
        out[i] = np.mean([run_baseline(kind, rng, env, p_max).reward for _ in range(draws)])
    return out
