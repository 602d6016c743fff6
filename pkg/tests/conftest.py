import numpy as np
import pytest

from risddpg import channel as ch
from risddpg.env import FIXED, EnvSpec, RISEnv, UEDistribution
from risddpg.ris import IDEAL, ReflectionParams


def small_spec(M=4, L=1, nx=2, ny=2, per_ris=2, ues=None, mode="practical", p_max=0.1, ris_gain=1e4) -> EnvSpec:
    top = ch.Topology(num_bs_antennas=M, num_ris=L, ris_nx=nx, ris_ny=ny, max_ue_per_ris=per_ris)
    params = ch.ChannelParams(path_loss=ch.PathLossModel(ris_gain=ris_gain))
    return EnvSpec(
        topology=top,
        channel=params,
        reflection=ReflectionParams(mode=mode) if mode != IDEAL else ReflectionParams(mode=IDEAL),
        p_max=p_max,
        ues=ues or UEDistribution(FIXED, per_ris),
    )


@pytest.fixture
def spec():
    return small_spec()


@pytest.fixture
def env(spec):
    e = RISEnv(spec)
    e.reset(np.random.default_rng(3))
    return e


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
