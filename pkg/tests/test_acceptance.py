"""Acceptance criteria 1-10, each at its stated tolerance.

Every criterion prints one ``criterion N: PASS|FAIL`` line; the lines are
repeated in the pytest terminal summary. Run directly with
``python tests/test_acceptance.py`` or through pytest.
"""

import math
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from risddpg import baselines, ddpg, neural
from risddpg import channel as ch
from risddpg.cli import main as cli_main
from risddpg.config import SystemConfig, desk_config
from risddpg.env import RISEnv, action_dim, per_ue_rate, project_action
from risddpg.ris import ReflectionParams, amplitude

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line, flush=True)
    return ok


# --------------------------------------------------------------------------
# 1. reflection model


def test_criterion_01_reflection_model():
    t0 = time.perf_counter()
    p = ReflectionParams()
    th = np.random.default_rng(0).uniform(-np.pi, np.pi, 10_000)
    got = amplitude(p, th)
    ref = np.array(
        [(1 - p.beta_min) * ((math.sin(t - p.phase_offset) + 1) / 2) ** p.alpha + p.beta_min for t in th]
    )
    err = float(np.max(np.abs(got - ref) / ref))
    ideal = amplitude(ReflectionParams(alpha=0.0), th)
    dt = time.perf_counter() - t0
    ok = err <= 1e-12 and np.all(ideal == 1.0) and dt < 1.0
    assert record(1, ok, f"max rel err {err:.1e}, alpha=0 -> beta=1: {bool(np.all(ideal == 1.0))}, {dt:.2f}s")


# --------------------------------------------------------------------------
# 2. feasibility projection


def test_criterion_02_projection():
    t0 = time.perf_counter()
    dims = M, K, L, N = 4, 3, 2, 4
    refl = ReflectionParams(theta_min=-2.0, theta_max=2.5)
    p_max = 0.1
    rng = np.random.default_rng(1)
    worst_over = worst_eq = 0.0
    bounds_ok = True
    n, chunk = 1_000_000, 100_000
    for _ in range(n // chunk):
        raw = rng.standard_normal((chunk, action_dim(*dims))) * rng.uniform(0.01, 10, (chunk, 1))
        presence = rng.integers(0, 2, (chunk, K)).astype(float)
        presence[presence.sum(axis=1) == 0, 0] = 1.0
        pt = project_action(raw, presence, p_max, refl, dims)
        power = np.sum(np.abs(pt.W) ** 2, axis=(1, 2))
        worst_over = max(worst_over, float(np.max(power / p_max - 1.0)))
        worst_eq = max(worst_eq, float(np.max(np.abs(power / p_max - 1.0))))
        bounds_ok &= bool(np.all((pt.phases >= refl.theta_min) & (pt.phases <= refl.theta_max)))
    dt = time.perf_counter() - t0
    ok = worst_over <= 1e-9 and worst_eq <= 1e-9 and bounds_ok and dt < 30
    assert record(
        2, ok, f"1e6 actions: max power excess {worst_over:.1e}, max |P/Pmax-1| {worst_eq:.1e}, phases in bounds {bounds_ok}, {dt:.1f}s"
    )


# --------------------------------------------------------------------------
# 3. rate oracle


def scalar_rates(H, W, noise, presence):
    out = []
    K, M = len(H), len(H[0])
    for k in range(K):
        if not presence[k]:
            out.append(0.0)
            continue
        gains = []
        for i in range(K):
            acc = 0j
            for m in range(M):
                acc += complex(H[k][m]) * complex(W[m][i])
            gains.append(acc.real**2 + acc.imag**2)
        interf = sum(gains[i] for i in range(K) if i != k and presence[i])
        out.append(math.log2(1.0 + gains[k] / (interf + noise)))
    return out


def test_criterion_03_rate_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        M, K = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        H = rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))
        W = rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))
        pres = rng.integers(0, 2, K)
        noise = float(10 ** rng.uniform(-3, 1))
        got = per_ue_rate(H, W, noise, pres)
        ref = np.array(scalar_rates(H.tolist(), W.tolist(), noise, pres.tolist()))
        nz = ref > 0
        if np.any(got[~nz] != 0):
            worst = np.inf
        if nz.any():
            worst = max(worst, float(np.max(np.abs(got[nz] - ref[nz]) / ref[nz])))
    dt = time.perf_counter() - t0
    assert record(3, worst <= 1e-10 and dt < 5, f"1e3 instances, max rel err {worst:.1e}, {dt:.2f}s")


# --------------------------------------------------------------------------
# 4. gradients


def _fd_check(net, inputs, rng):
    """Largest relative error between analytic and central-difference gradients."""
    proj = rng.standard_normal(net(*inputs).shape)

    def loss():
        net.touch()
        return float(np.sum(net(*inputs) * proj))

    def numeric(x, h=1e-5):
        g = np.zeros_like(x)
        for i in range(x.size):
            old = x.flat[i]
            x.flat[i] = old + h
            fp = loss()
            x.flat[i] = old - h
            fm = loss()
            x.flat[i] = old
            g.flat[i] = (fp - fm) / (2 * h)
        return g

    _, cache = net.forward(*inputs)
    gin, gp = net.backward(cache, proj)
    gin = gin if isinstance(gin, tuple) else (gin,)
    pairs = [(gp, numeric(net.params))] + [(g, numeric(x)) for g, x in zip(gin, inputs)]
    return max(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12) for a, b in pairs)


def test_criterion_04_gradients():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        for act in ("none", "relu", "tanh"):
            for norm in (False, True):
                net = neural.Network([neural.LayerSpec(5, 7, act, norm)]).init(rng, final_scale=None)
                net.params += 0.3 * rng.standard_normal(net.param_count)
                worst = max(worst, _fd_check(net, [rng.standard_normal((3, 5))], rng))
        actor = neural.build_actor(8, 6, 12, rng)
        actor.params += 0.1 * rng.standard_normal(actor.param_count)
        worst = max(worst, _fd_check(actor, [rng.standard_normal((2, 8))], rng))
        critic = neural.build_critic(8, 6, 12, rng)
        critic.params += 0.1 * rng.standard_normal(critic.param_count)
        worst = max(worst, _fd_check(critic, [rng.standard_normal((2, 8)), rng.standard_normal((2, 6))], rng))
    dt = time.perf_counter() - t0
    assert record(4, worst <= 1e-4 and dt < 60, f"100 seeds x (6 layer types, actor, critic), max rel err {worst:.1e}, {dt:.1f}s")


# --------------------------------------------------------------------------
# 5. DDPG mechanics


def _const_critic(S, A, value):
    c = neural.build_critic(S, A, 8, np.random.default_rng(0))
    c.params[:] = 0.0
    c.params[-1] = value
    c.touch()
    return c


def test_criterion_05_ddpg_mechanics():
    t0 = time.perf_counter()
    checks = {}
    S, A = 6, 4
    nets = ddpg.AgentNets.create(S, A, 8, 1e-3, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    D = 6
    batch = ddpg.Batch(
        rng.standard_normal((D, S)), rng.standard_normal((D, A)), rng.standard_normal(D), rng.standard_normal((D, S)),
        np.zeros(D, bool),
    )
    checks["gamma=0"] = np.array_equal(ddpg.td_targets(nets, batch, 0.0), batch.rewards)
    nets.target_critic = _const_critic(S, A, 2.0)
    one = ddpg.Batch(np.zeros((1, S)), np.zeros((1, A)), np.array([1.0]), np.zeros((1, S)), np.array([False]))
    checks["r=1,Q'=2,g=.95->2.9"] = abs(ddpg.td_targets(nets, one, 0.95)[0] - 2.9) <= 1e-12
    one.terminal[0] = True
    checks["terminal"] = ddpg.td_targets(nets, one, 0.95)[0] == 1.0

    nets = ddpg.AgentNets.create(S, A, 8, 1e-3, np.random.default_rng(2))
    nets.target_actor.params[:] = rng.standard_normal(nets.actor.param_count)
    nets.target_critic.params[:] = rng.standard_normal(nets.critic.param_count)
    tau, contraction = 0.01, True
    for _ in range(20):
        before = np.linalg.norm(nets.target_actor.params - nets.actor.params)
        ddpg.soft_update(nets, tau)
        after = np.linalg.norm(nets.target_actor.params - nets.actor.params)
        contraction &= abs(after - (1 - tau) * before) <= 1e-12 * before
    checks["soft update (1-tau)"] = contraction

    buf = ddpg.ReplayBuffer(10, 1, 1)
    for i in range(14):
        buf.add([i], [0], float(i), [i], False)
    checks["fifo"] = buf.rewards[buf.slot_order()].tolist() == list(range(4, 14))
    n = 100_000
    idx = buf.sample(np.random.default_rng(3), n).indices
    counts = np.bincount(idx, minlength=10)
    sd = math.sqrt(n * 0.1 * 0.9)
    checks["uniform (3 sd)"] = bool(np.all(np.abs(counts - n * 0.1) <= 3 * sd))
    dt = time.perf_counter() - t0
    ok = all(checks.values()) and dt < 10
    failed = [k for k, v in checks.items() if not v]
    assert record(5, ok, f"{len(checks)} checks, failed {failed or 'none'}, {dt:.2f}s")


# --------------------------------------------------------------------------
# 6 and 7. learning smoke test and ideal >= practical


SEEDS = range(5)


def toy_config(mode: str, seed: int) -> SystemConfig:
    """M=4, one 2x2 RIS, two UEs; I=100 episodes of T=200 steps."""
    c = desk_config()
    return replace(
        c,
        topology=ch.Topology(num_bs_antennas=4, num_ris=1, ris_nx=2, ris_ny=2, max_ue_per_ris=2),
        reflection=replace(c.reflection, mode=mode),
        rl=ddpg.Hyperparams(
            episodes=100, steps_per_episode=200, hidden=64, minibatch=32, learning_rate=1e-3, soft_update=0.005
        ),
        experiment=replace(
            c.experiment,
            seed=seed,
            ue_mode="fixed",
            ue_fixed_per_ris=2,
            eval_ue_mode="fixed",
            eval_ue_fixed_per_ris=2,
            eval_set_size=50,
        ),
    )


def train_and_score(cfg: SystemConfig):
    e = cfg.experiment
    spec = cfg.train_spec()
    eval_set = ddpg.EvalSet(cfg.eval_spec(), e.eval_set_size, e.eval_seed)
    res = ddpg.train(cfg.rl, lambda: RISEnv(spec), e.seed, eval_set, e.eval_steps)
    rnd = baselines.mean_baseline_reward(baselines.RANDOM, eval_set.envs, e.baseline_draws, e.eval_seed + 1)
    return res, float(np.mean(rnd))


@pytest.fixture(scope="module")
def paired_runs():
    out = {}
    times = {}
    for mode in ("practical", "ideal"):
        t0 = time.perf_counter()
        for seed in SEEDS:
            res, rnd = train_and_score(toy_config(mode, seed))
            out[mode, seed] = (res.best_reward, rnd)
        times[mode] = time.perf_counter() - t0
    return out, times


def test_criterion_06_learning_smoke(paired_runs):
    runs, times = paired_runs
    ratios = [runs["practical", s][0] / runs["practical", s][1] for s in SEEDS]
    wins = sum(r >= 1.2 for r in ratios)
    dt = times["practical"]
    ok = wins >= 4 and dt < 15 * 60
    detail = ", ".join(f"{r:.2f}" for r in ratios)
    assert record(6, ok, f"best/random ratio per seed [{detail}], {wins}/5 >= 1.2, {dt:.0f}s")


def test_criterion_07_ideal_vs_practical(paired_runs):
    runs, times = paired_runs
    pairs = [(runs["ideal", s][0], runs["practical", s][0]) for s in SEEDS]
    wins = sum(i >= p for i, p in pairs)
    dt = times["ideal"] + times["practical"]
    ok = wins >= 4 and dt < 30 * 60
    detail = ", ".join(f"{i:.2f}/{p:.2f}" for i, p in pairs)
    assert record(7, ok, f"ideal/practical best reward [{detail}], {wins}/5 ideal >= practical, {dt:.0f}s with 6")


# --------------------------------------------------------------------------
# 8. random-UE training vs fixed-UE training (soft)

VARIANTS = (("fixed_g1", "fixed", 1, (1, 1)), ("fixed_g2", "fixed", 2, (2, 2)), ("random", "random", 1, (1, 2)))


def sweep_config(seed: int, mode: str, fixed: int, rng_range) -> SystemConfig:
    """L=2 RISs of 2x4 elements, at most 2 UEs each; evaluated on U[1,2] UEs per RIS."""
    c = toy_config("practical", seed)
    return replace(
        c,
        topology=ch.Topology(num_bs_antennas=4, num_ris=2, ris_nx=2, ris_ny=4, max_ue_per_ris=2),
        experiment=replace(
            c.experiment,
            ue_mode=mode,
            ue_fixed_per_ris=fixed,
            ue_per_ris_range=rng_range,
            eval_ue_mode="random",
            eval_ue_per_ris_range=(1, 2),
        ),
    )


def test_criterion_08_random_ue_training():
    t0 = time.perf_counter()
    table = []
    for seed in SEEDS:
        row = {}
        for label, mode, fixed, rng_range in VARIANTS:
            cfg = sweep_config(seed, mode, fixed, rng_range)
            res, _ = train_and_score(cfg)
            # held-out random-UE test set, disjoint from the checkpoint-selection set
            test = ddpg.EvalSet(cfg.eval_spec(), 100, cfg.experiment.eval_seed + 5000)
            row[label] = float(np.mean(test.policy_rewards(res.best_actor, cfg.experiment.eval_steps)))
        table.append(row)
    wins = sum(r["random"] > max(r["fixed_g1"], r["fixed_g2"]) for r in table)
    dt = time.perf_counter() - t0
    print("seed  " + "  ".join(f"{v[0]:>9}" for v in VARIANTS))
    for seed, row in zip(SEEDS, table):
        print(f"{seed:>4}  " + "  ".join(f"{row[v[0]]:9.3f}" for v in VARIANTS))
    ok = wins >= 3
    record(8, ok, f"random-UE model best on {wins}/5 seeds (soft criterion), {dt:.0f}s")
    assert all(np.isfinite(v) for row in table for v in row.values())
    if not ok:
        pytest.xfail("soft criterion: random-UE training did not beat fixed-UE training on 3 of 5 seeds")


# --------------------------------------------------------------------------
# 9. inference cost


def test_criterion_09_inference_cost():
    exact = True
    rng = np.random.default_rng(4)
    for _ in range(5):
        s, a, h = (int(x) for x in rng.integers(1, 50, 3))
        net = neural.build_actor(s, a, h, rng)
        exact &= net.mac_count() == s * h + h * h + h * a
    M, K, L, N = 16, 8, 1, 64
    S, A = 2 * (M * K + L * N + K), 2 * (M * K + L * N)
    actor = neural.build_actor(S, A, 1024, rng)
    closed = S * 1024 + 1024 * 1024 + 1024 * A
    exact &= actor.mac_count() == closed
    flops = actor.flop_count()
    ratio = flops / 3.71e6
    ok = exact and 0.5 <= ratio <= 2.0
    assert record(
        9, ok, f"MACs {actor.mac_count():,} == closed form {closed:,}: {exact}; FLOPs {flops:.3e} = {ratio:.3f}x 3.71e6"
    )


# --------------------------------------------------------------------------
# 10. determinism

TOY_YAML = """
topology: {num_bs_antennas: 2, num_ris: 1, ris_nx: 1, ris_ny: 2, max_ue_per_ris: 2}
rl: {episodes: 2, steps_per_episode: 10, hidden: 8, minibatch: 4}
experiment:
  ue_mode: random
  ue_per_ris_range: [1, 2]
  eval_ue_mode: random
  eval_ue_per_ris_range: [1, 2]
  eval_set_size: 4
  eval_steps: 2
  baseline_draws: 2
  p_max_sweep_dbm: [0.0, 20.0]
  sweep_variants:
    - {label: fixed_g1, ue_mode: fixed, ue_fixed_per_ris: 1}
    - {label: random, ue_mode: random, ue_per_ris_range: [1, 2]}
"""


def test_criterion_10_determinism(tmp_path):
    cfg = tmp_path / "toy.yaml"
    cfg.write_text(TOY_YAML)

    def run_all(out):
        codes = [
            cli_main(["train", "--config", str(cfg), "--out", str(out), "--seed", "7"]),
            cli_main(["eval", "--config", str(cfg), "--out", str(out), "--seed", "7",
                      "--checkpoint", str(out / "checkpoint.bin")]),
            cli_main(["sweep", "--config", str(cfg), "--out", str(out), "--seed", "7"]),
            cli_main(["dump-channels", "--config", str(cfg), "--out", str(out), "--seed", "7", "--count", "3"]),
            cli_main(["baselines", "--config", str(cfg), "--out", str(out), "--seed", "7"]),
        ]
        return codes, {p.name: p.read_bytes() for p in sorted(out.iterdir())}

    codes_a, files_a = run_all(tmp_path / "a")
    codes_b, files_b = run_all(tmp_path / "b")
    same = files_a == files_b
    csvs = sorted(n for n in files_a if n.endswith(".csv"))
    ok = codes_a == codes_b == [0] * 5 and same and len(csvs) == 6
    assert record(10, ok, f"5 commands x2, {len(files_a)} files ({len(csvs)} CSV) byte-identical: {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
