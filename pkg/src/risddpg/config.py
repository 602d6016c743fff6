"""Experiment configuration: nested dataclasses loaded from YAML with strict keys."""

from __future__ import annotations

import types
import typing
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from . import channel as ch
from .ddpg import Hyperparams
from .env import FIXED, RANDOM, EnvSpec, UEDistribution
from .errors import ConfigError
from .ris import ReflectionParams


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=np.float64) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=np.float64)) + 30.0


@dataclass(frozen=True)
class ChannelConfig:
    direct: ch.ClusterParams = field(default_factory=lambda: ch.ClusterParams(include_los=False))
    bs_ris: ch.ClusterParams = field(default_factory=ch.ClusterParams)
    ris_ue: ch.ClusterParams = field(default_factory=ch.ClusterParams)
    path_loss: ch.PathLossModel = field(default_factory=ch.PathLossModel)
    noise_power_dbm: float = -94.0

    @property
    def params(self) -> ch.ChannelParams:
        return ch.ChannelParams(self.direct, self.bs_ris, self.ris_ue, self.path_loss)


@dataclass(frozen=True)
class Variant:
    """A sweep overlay on the training UE distribution."""

    label: str
    ue_mode: str = RANDOM
    ue_fixed_per_ris: int = 2
    ue_per_ris_range: tuple[int, int] = (1, 4)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    p_max_dbm: float = 20.0
    p_max_sweep_dbm: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    ue_mode: str = RANDOM
    ue_fixed_per_ris: int = 2
    ue_per_ris_range: tuple[int, int] = (1, 4)
    eval_ue_mode: str = RANDOM
    eval_ue_fixed_per_ris: int = 2
    eval_ue_per_ris_range: tuple[int, int] = (1, 4)
    eval_set_size: int = 100
    eval_seed: int = 10_000
    eval_steps: int = 10
    baseline_draws: int = 10
    sweep_variants: tuple[Variant, ...] = (
        Variant("fixed_g2", FIXED, 2),
        Variant("fixed_g4", FIXED, 4),
        Variant("random", RANDOM, 2, (1, 4)),
    )

    def __post_init__(self):
        if self.eval_set_size < 1:
            raise ConfigError("must be >= 1", "eval_set_size")
        if self.eval_steps < 1:
            raise ConfigError("must be >= 1", "eval_steps")
        if self.baseline_draws < 1:
            raise ConfigError("must be >= 1", "baseline_draws")
        if not self.p_max_sweep_dbm:
            raise ConfigError("must not be empty", "p_max_sweep_dbm")
        labels = [v.label for v in self.sweep_variants]
        if len(set(labels)) != len(labels):
            raise ConfigError("variant labels must be unique", "sweep_variants")


@dataclass(frozen=True)
class SystemConfig:
    topology: ch.Topology = field(default_factory=ch.Topology)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    reflection: ReflectionParams = field(default_factory=ReflectionParams)
    rl: Hyperparams = field(default_factory=Hyperparams)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    @property
    def p_max(self) -> float:
        return float(dbm_to_watts(self.experiment.p_max_dbm))

    @property
    def noise_power(self) -> float:
        return float(dbm_to_watts(self.channel.noise_power_dbm))

    def _spec(self, ues: UEDistribution, p_max_dbm: float | None) -> EnvSpec:
        p = self.p_max if p_max_dbm is None else float(dbm_to_watts(p_max_dbm))
        try:
            return EnvSpec(self.topology, self.channel.params, self.reflection, p, self.noise_power, ues)
        except ConfigError as exc:
            raise ConfigError(str(exc), "experiment") from exc

    def train_spec(self) -> EnvSpec:
        e = self.experiment
        return self._spec(UEDistribution(e.ue_mode, e.ue_fixed_per_ris, e.ue_per_ris_range), None)

    def eval_spec(self, p_max_dbm: float | None = None) -> EnvSpec:
        e = self.experiment
        return self._spec(UEDistribution(e.eval_ue_mode, e.eval_ue_fixed_per_ris, e.eval_ue_per_ris_range), p_max_dbm)

    def with_variant(self, v: Variant) -> SystemConfig:
        return replace(
            self,
            experiment=replace(
                self.experiment, ue_mode=v.ue_mode, ue_fixed_per_ris=v.ue_fixed_per_ris, ue_per_ris_range=v.ue_per_ris_range
            ),
        )

    def to_dict(self) -> dict:
        return _to_plain(self)


# --------------------------------------------------------------------------
# (de)serialisation


def _to_plain(obj):
    if is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _convert(tp, value, path: str, base=None):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError("expected a mapping", path)
        return from_dict(tp, value, path, base)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _convert(inner[0], value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError("expected a list", path)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"expected {len(args)} entries", path)
        return tuple(_convert(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError("expected true/false", path)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("expected an integer", path)
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", path)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError("expected a string", path)
        return value
    return value


def from_dict(cls, data, path: str = "", base=None):
    """Build dataclass ``cls`` from a mapping, overlaying ``base`` (or the class defaults).

    Unknown keys and ill-typed or invalid values raise ConfigError naming the
    dotted field path.
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", path or "<root>")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.init}
    for key in data:
        if key not in known:
            raise ConfigError("unknown key", f"{path}.{key}" if path else str(key))
    kwargs = {}
    for name, value in data.items():
        sub = f"{path}.{name}" if path else name
        kwargs[name] = _convert(hints[name], value, sub, getattr(base, name) if base is not None else None)
    try:
        return replace(base, **kwargs) if base is not None else cls(**kwargs)
    except ConfigError as exc:
        inner = str(exc).split(": ", 1)[-1] if exc.path else str(exc)
        full = ".".join(p for p in (path, exc.path) if p)
        raise ConfigError(inner, full or "<root>") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path or "<root>") from exc


def load_config(path, base: SystemConfig | None = None) -> SystemConfig:
    """Read a YAML config; its keys overlay ``base`` (the desk preset by default)."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    return from_dict(SystemConfig, data, base=desk_config() if base is None else base)


def dump_config(cfg: SystemConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


# --------------------------------------------------------------------------
# presets


def desk_config() -> SystemConfig:
    """Full topology at desk scale: shorter training, smaller networks and evaluation set.

    The RIS gain compensation is raised to 40 dB per hop so that the reflected
    links, not the direct link, dominate the received power.
    """
    return SystemConfig(
        channel=ChannelConfig(path_loss=ch.PathLossModel(ris_gain=1e4)),
        rl=Hyperparams(episodes=50, steps_per_episode=200, hidden=256, minibatch=64, learning_rate=1e-3, soft_update=0.005),
    )


def paper_scale(cfg: SystemConfig) -> SystemConfig:
    """Restore the full-scale training protocol (I=1000, T=2000) on top of ``cfg``."""
    rl = replace(
        cfg.rl,
        episodes=1000,
        steps_per_episode=2000,
        discount=0.95,
        soft_update=0.0005,
        minibatch=128,
        learning_rate=1e-4,
        hidden=1024,
    )
    return replace(cfg, rl=rl, experiment=replace(cfg.experiment, eval_set_size=1000))


__all__ = [
    "ChannelConfig",
    "ExperimentConfig",
    "SystemConfig",
    "Variant",
    "dbm_to_watts",
    "desk_config",
    "dump_config",
    "from_dict",
    "load_config",
    "paper_scale",
    "watts_to_dbm",
]
