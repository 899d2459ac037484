import numpy as np
import pytest

from src.core.engine import init_economy
from src.core.ledger import Ledger
from src.core.params import SimParams
from src.core.state import Economy, FirmState
from src.utils.output_formatter import formatter


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow reproduction tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def quiet_console():
    formatter.quiet = True
    yield
    formatter.quiet = True


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_params():
    return SimParams(
        n_workers=1000,
        n_firms_init=40,
        interest_rate=0.011,
        nu=2,
        mu_min=0.0,
        mu_max=0.1,
        iterations=120,
        seed=3,
    )


@pytest.fixture
def small_economy(small_params):
    return init_economy(small_params)


@pytest.fixture
def toy_economy():
    """Two firms and ten workers with hand-set balances and an attached ledger."""
    params = SimParams(
        n_workers=10, n_firms_init=2, interest_rate=0.011, nu=0, mu_min=0.0, mu_max=0.1, iterations=1,
    )
    economy = Economy(params=params, rng=np.random.default_rng(0))
    economy.ledger = Ledger(economy)
    economy.add_firm(FirmState(id=0, mu=0.1, birth_t=0, cash=100.0, debt=20.0))
    economy.add_firm(FirmState(id=1, mu=0.05, birth_t=0))
    economy.bank.loans_outstanding = 20.0
    economy.bank.record_opening(20.0)
    economy.workers.savings[:] = 5.0
    economy.clearing = 0.0
    return economy


@pytest.fixture
def small_document(tmp_path):
    return {
        "n_workers": 1500,
        "n_firms_init": 60,
        "interest_rate": 0.011,
        "nu": 2,
        "mu_min": 0.0,
        "mu_max": 0.1,
        "iterations": 80,
        "burn_in": 30,
        "snapshot_times": [60, 79],
        "seeds": [1, 2],
        "output_dir": str(tmp_path / "out"),
    }
