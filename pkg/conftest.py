import numpy as np
import pytest

from emrates import logs


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Also run the full-scale canned experiments (minutes each)",
    )


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: a full-scale experiment, only run with --run-slow"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True, scope="session")
def _init_logs(pytestconfig):
    # Doctests expect NumPy 1.x scalar reprs (True, not np.True_).
    np.set_printoptions(legacy="1.25")
    # pytest's -q gives a negative verbosity; logging counts -v's from zero.
    logs.init_logging(
        verbosity=max(0, pytestconfig.getoption("verbose")),
        cache_logger_on_first_use=False,
    )
