import numpy as np
import pytest

from crnsense.config import load_config
from crnsense.core import SystemParams
from crnsense.dutycycle import ChannelPair
from crnsense.sensing import SensingModel

# acceptance outcomes collected during the run, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def random_config(rng):
    """Random but physically sensible (params, pair, sensing) triple."""
    sw = 1e-9
    p = SystemParams(
        W=1e6,
        T_s=rng.uniform(1e-3, 5e-3),
        T_t=rng.uniform(50e-3, 150e-3),
        P_s=rng.uniform(0.05, 0.2),
        P_t=rng.uniform(0.02, 0.3),
        P_nc=rng.uniform(0.05, 0.2),
        P_p=rng.uniform(0.2, 3.0),
        eta=rng.uniform(0.2, 0.6),
        phi=rng.uniform(0.1, 0.5),
        sigma_w2=sw,
        sigma_p2=sw * 10 ** (rng.uniform(-15, -3) / 10),
        g=rng.uniform(0.3, 2.0),
        P_bar_c=0.1,
        N_s=int(rng.integers(300, 5000)),
        snr_su=rng.uniform(1, 100),
    )
    pair = ChannelPair(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95))
    return p, pair, SensingModel.from_params(p)


@pytest.fixture(scope="session")
def table2():
    return load_config("table2")


@pytest.fixture(scope="session")
def t2(table2):
    p = table2.params
    return p, table2.pair, SensingModel.from_params(p)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
