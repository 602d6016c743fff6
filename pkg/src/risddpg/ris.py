"""RIS reflection coefficients under the ideal and the practical model.

In the practical model the reflection amplitude depends on the applied phase
shift::

    beta(theta) = (1 - beta_min) * ((sin(theta - phi0) + 1) / 2) ** alpha + beta_min

so the amplitude dips to ``beta_min`` at ``theta = phi0 - pi/2`` and reaches 1
at ``theta = phi0 + pi/2``. ``alpha = 0`` recovers the ideal unit amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complexlin import ShapeError

IDEAL = "ideal"
PRACTICAL = "practical"


class DomainError(ValueError):
    """A phase outside the hardware range was passed where a clamped one is required."""


@dataclass(frozen=True)
class ReflectionParams:
    mode: str = PRACTICAL
    alpha: float = 1.6
    beta_min: float = 0.2
    phase_offset: float = 0.43 * np.pi
    theta_min: float = -np.pi
    theta_max: float = np.pi

    def __post_init__(self):
        if self.mode not in (IDEAL, PRACTICAL):
            raise ValueError(f"mode must be 'ideal' or 'practical', got {self.mode!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0.0 < self.beta_min <= 1.0:
            raise ValueError("beta_min must lie in (0, 1]")
        # small slack so that configs written as +-3.14159265 are accepted
        lim = np.pi + 1e-9
        if not (-lim <= self.theta_min <= self.theta_max <= lim):
            raise ValueError("need -pi <= theta_min <= theta_max <= pi")


def amplitude(params: ReflectionParams, theta):
    """Reflection amplitude for phase(s) ``theta`` (scalar or array).

    The phase must already lie in ``[theta_min, theta_max]``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta < params.theta_min) or np.any(theta > params.theta_max):
        raise DomainError("phase outside [theta_min, theta_max]; clamp first")
    bracket = (np.sin(theta - params.phase_offset) + 1.0) / 2.0
    # sin can overshoot [-1, 1] by an ulp
    bracket = np.clip(bracket, 0.0, 1.0)
    beta = (1.0 - params.beta_min) * bracket**params.alpha + params.beta_min
    return beta if beta.ndim else float(beta)


def clamp_phase(params: ReflectionParams, theta):
    return np.clip(np.asarray(theta, dtype=np.float64), params.theta_min, params.theta_max)


def clamp_merge(params: ReflectionParams, theta):
    """Clamp raw phase(s) to the hardware range and merge with the amplitude.

    Returns the complex coefficient ``beta(theta_c) * exp(j theta_c)`` in
    practical mode and ``exp(j theta_c)`` in ideal mode.
    """
    th = clamp_phase(params, theta)
    coeff = np.exp(1j * th)
    if params.mode == PRACTICAL:
        coeff = amplitude(params, th) * coeff
    return coeff if np.ndim(coeff) else complex(coeff)


def build_reflection_matrix(params: ReflectionParams, phases, n_elements: int | None = None) -> np.ndarray:
    """Diagonal of one RIS reflection matrix, as a length-N complex vector."""
    phases = np.asarray(phases, dtype=np.float64)
    if phases.ndim != 1:
        raise ShapeError(f"phases must be a vector, got shape {phases.shape}")
    if n_elements is not None and phases.shape[0] != n_elements:
        raise ShapeError(f"expected {n_elements} phases, got {phases.shape[0]}")
    return np.asarray(clamp_merge(params, phases), dtype=np.complex128)
