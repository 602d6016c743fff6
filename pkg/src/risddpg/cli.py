"""Command-line experiment driver.

Commands: ``train``, ``eval``, ``sweep``, ``dump-channels`` and ``baselines``.
Every CSV starts with a ``# {json}`` line holding the resolved config and seed;
JSON outputs and checkpoints embed the same information. Exit status is 0 on
success, 1 for configuration errors and 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import baselines, channel, ddpg, neural
from ._io import atomic_write_text, write_csv
from .config import SystemConfig, desk_config, load_config, paper_scale
from .env import RISEnv, draw_presence
from .errors import ConfigError

log = logging.getLogger("risddpg")

RATE_COLUMNS = ["p_max_dbm", "ddpg_mean_reward", "random_mean_reward", "zf_mean_reward", "num_envs"]
BASELINE_COLUMNS = ["p_max_dbm", "random_mean_reward", "zf_mean_reward", "zf_fallback_fraction", "num_envs"]
COMPARISON_COLUMNS = ["label", "p_max_dbm", "mean_eval_reward", "best_train_reward", "num_envs"]


def validate(cfg: SystemConfig) -> SystemConfig:
    """Build every environment spec the config implies so errors surface before any work."""
    cfg.train_spec()
    cfg.eval_spec()
    for v in cfg.experiment.sweep_variants:
        try:
            cfg.with_variant(v).train_spec()
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[-1], f"experiment.sweep_variants[{v.label}]") from exc
    return cfg


def _header(cfg: SystemConfig, command: str, **extra) -> dict:
    return {"command": command, "seed": cfg.experiment.seed, "config": cfg.to_dict(), **extra}


# --------------------------------------------------------------------------


@dataclass
class TrainArtifacts:
    curve: Path
    checkpoint: Path
    result: ddpg.TrainResult


def run_train(cfg: SystemConfig, out: Path, label: str = "", record_wall_time: bool = False) -> TrainArtifacts:
    """Train with ``cfg``; writes the learning curve CSV and the best checkpoint."""
    validate(cfg)
    out = Path(out)
    suffix = f"_{label}" if label else ""
    curve_path = out / f"curve{suffix}.csv"
    ckpt_path = out / f"checkpoint{suffix}.bin"
    columns = ddpg.LOG_COLUMNS if record_wall_time else [c for c in ddpg.LOG_COLUMNS if c != "wall_time"]
    header = _header(cfg, "train", label=label)
    rows: list[dict] = []

    def flush(row):
        rows.append(row)
        write_csv(curve_path, columns, rows, header)

    spec = cfg.train_spec()
    e = cfg.experiment
    eval_set = ddpg.EvalSet(cfg.eval_spec(), e.eval_set_size, e.eval_seed)
    result = ddpg.train(cfg.rl, lambda: RISEnv(spec), e.seed, eval_set, e.eval_steps, on_episode=flush)
    neural.save_checkpoint(
        ckpt_path,
        {"actor": result.best_actor, "critic": result.best_critic},
        {**header, "best_reward": result.best_reward, "best_episode": result.best_episode},
    )
    return TrainArtifacts(curve_path, ckpt_path, result)


def _check_actor(cfg: SystemConfig, actor: neural.Network) -> None:
    spec = cfg.eval_spec()
    if actor.input_dim != spec.state_dim or actor.output_dim != spec.action_dim:
        raise ConfigError(
            f"checkpoint actor maps {actor.input_dim} -> {actor.output_dim} but the config needs "
            f"{spec.state_dim} -> {spec.action_dim}",
            "topology",
        )


def evaluate_policy(cfg: SystemConfig, actor: neural.Network, p_max_dbm: float) -> np.ndarray:
    e = cfg.experiment
    eval_set = ddpg.EvalSet(cfg.eval_spec(p_max_dbm), e.eval_set_size, e.eval_seed)
    return eval_set.policy_rewards(actor, e.eval_steps)


def _baseline_means(cfg: SystemConfig, p_max_dbm: float):
    e = cfg.experiment
    eval_set = ddpg.EvalSet(cfg.eval_spec(p_max_dbm), e.eval_set_size, e.eval_seed)
    seed = e.eval_seed + 1
    rnd = baselines.mean_baseline_reward(baselines.RANDOM, eval_set.envs, e.baseline_draws, seed)
    zf = baselines.mean_baseline_reward(baselines.ZF_RANDOM_PHASE, eval_set.envs, e.baseline_draws, seed)
    fallbacks = 0
    for env, child in zip(eval_set.envs, np.random.SeedSequence(seed).spawn(len(eval_set))):
        rng = np.random.default_rng(child)
        fallbacks += sum(baselines.zf_baseline(rng, env).fallback for _ in range(e.baseline_draws))
    return rnd, zf, fallbacks / (len(eval_set) * e.baseline_draws)


def run_eval(cfg: SystemConfig, checkpoint: Path, out: Path) -> Path:
    """Mean sum rate of the checkpointed policy and both baselines at every swept P_max."""
    validate(cfg)
    nets, _ = neural.load_checkpoint(checkpoint)
    if "actor" not in nets:
        raise ConfigError("checkpoint has no actor network", "checkpoint")
    actor = nets["actor"]
    _check_actor(cfg, actor)
    rows = []
    for p in cfg.experiment.p_max_sweep_dbm:
        policy = evaluate_policy(cfg, actor, p)
        rnd, zf, _ = _baseline_means(cfg, p)
        rows.append(
            {
                "p_max_dbm": p,
                "ddpg_mean_reward": float(np.mean(policy)),
                "random_mean_reward": float(np.mean(rnd)),
                "zf_mean_reward": float(np.mean(zf)),
                "num_envs": len(policy),
            }
        )
    path = Path(out) / "rates.csv"
    write_csv(path, RATE_COLUMNS, rows, _header(cfg, "eval", checkpoint=Path(checkpoint).name))
    return path


def run_baselines(cfg: SystemConfig, out: Path) -> Path:
    validate(cfg)
    rows = []
    for p in cfg.experiment.p_max_sweep_dbm:
        rnd, zf, fb = _baseline_means(cfg, p)
        rows.append(
            {
                "p_max_dbm": p,
                "random_mean_reward": float(np.mean(rnd)),
                "zf_mean_reward": float(np.mean(zf)),
                "zf_fallback_fraction": float(fb),
                "num_envs": len(rnd),
            }
        )
    path = Path(out) / "baselines.csv"
    write_csv(path, BASELINE_COLUMNS, rows, _header(cfg, "baselines"))
    return path


def run_sweep(cfg: SystemConfig, out: Path, record_wall_time: bool = False) -> Path:
    """Train one model per UE-distribution variant and cross-evaluate them on the evaluation protocol."""
    validate(cfg)
    rows = []
    for v in cfg.experiment.sweep_variants:
        art = run_train(cfg.with_variant(v), out, label=v.label, record_wall_time=record_wall_time)
        for p in cfg.experiment.p_max_sweep_dbm:
            rewards = evaluate_policy(cfg, art.result.best_actor, p)
            rows.append(
                {
                    "label": v.label,
                    "p_max_dbm": p,
                    "mean_eval_reward": float(np.mean(rewards)),
                    "best_train_reward": art.result.best_reward,
                    "num_envs": len(rewards),
                }
            )
    path = Path(out) / "comparison.csv"
    write_csv(path, COMPARISON_COLUMNS, rows, _header(cfg, "sweep"))
    return path


def _interleave(a: np.ndarray) -> list:
    """Complex array -> nested lists whose innermost level is [re, im, re, im, ...]."""
    a = np.asarray(a, dtype=np.complex128)
    flat = np.stack([a.real, a.imag], axis=-1).reshape(a.shape[:-1] + (2 * a.shape[-1],))
    return flat.tolist()


def deinterleave(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[..., 0::2] + 1j * x[..., 1::2]


def dump_channels(cfg: SystemConfig, count: int, out: Path) -> list[Path]:
    """Write ``count`` seeded channel draws, one JSON file each."""
    validate(cfg)
    if count < 1:
        raise ConfigError("must be >= 1", "count")
    spec = cfg.train_spec()
    paths = []
    for i, child in enumerate(np.random.SeedSequence(cfg.experiment.seed).spawn(count)):
        rng = np.random.default_rng(child)
        presence = draw_presence(rng, spec.topology, spec.ues)
        real = channel.draw_realization(rng, spec.topology, spec.channel)
        doc = {
            **_header(cfg, "dump-channels", index=i),
            "layout": "complex values stored as interleaved [re, im] along the last axis",
            "presence": presence.tolist(),
            "direct": _interleave(real.direct),
            "bs_to_ris": _interleave(real.bs_to_ris),
            "ris_to_ue": _interleave(real.ris_to_ue),
        }
        path = Path(out) / f"channels_{i:04d}.json"
        atomic_write_text(path, json.dumps(doc, sort_keys=True) + "\n")
        paths.append(path)
    return paths


# --------------------------------------------------------------------------


def _resolve(args) -> SystemConfig:
    cfg = load_config(args.config) if args.config else desk_config()
    if args.paper_scale:
        cfg = paper_scale(cfg)
    if args.seed is not None:
        cfg = replace(cfg, experiment=replace(cfg.experiment, seed=args.seed))
    if args.mode is not None:
        cfg = replace(cfg, reflection=replace(cfg.reflection, mode=args.mode))
    return validate(cfg)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config (overlays the desk-scale defaults)")
    common.add_argument("--seed", type=int, help="override experiment.seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--paper-scale", action="store_true", help="full-scale training and evaluation")
    common.add_argument("--mode", choices=["ideal", "practical"], help="override the reflection model")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="risddpg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", parents=[common], help="train a DDPG agent")
    p.add_argument("--record-wall-time", action="store_true", help="add a wall_time column to the curve")
    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint over the P_max sweep")
    p.add_argument("--checkpoint", type=Path, required=True)
    p = sub.add_parser("sweep", parents=[common], help="train and compare UE-distribution variants")
    p.add_argument("--record-wall-time", action="store_true")
    p = sub.add_parser("dump-channels", parents=[common], help="write seeded channel draws as JSON")
    p.add_argument("--count", type=int, default=1)
    sub.add_parser("baselines", parents=[common], help="evaluate the non-learning baselines")
    sub.add_parser("show-config", parents=[common], help="print the resolved config as JSON")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
        out = args.out
        if args.command == "show-config":
            print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        elif args.command == "train":
            out.mkdir(parents=True, exist_ok=True)
            art = run_train(cfg, out, record_wall_time=args.record_wall_time)
            log.info("best mean evaluation reward %.4f (episode %d)", art.result.best_reward, art.result.best_episode)
            log.info("wrote %s and %s", art.curve, art.checkpoint)
        elif args.command == "eval":
            log.info("wrote %s", run_eval(cfg, args.checkpoint, out))
        elif args.command == "sweep":
            log.info("wrote %s", run_sweep(cfg, out, record_wall_time=args.record_wall_time))
        elif args.command == "dump-channels":
            paths = dump_channels(cfg, args.count, out)
            log.info("wrote %d channel files to %s", len(paths), out)
        elif args.command == "baselines":
            log.info("wrote %s", run_baselines(cfg, out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted; partial outputs were flushed", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime-failure exit code
        log.exception("run failed: %s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
