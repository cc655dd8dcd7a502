import pytest

from pinchnoma import DlLinkConfig, SystemGeometry, UlLinkConfig, dbm_to_watt, noise_sigma


@pytest.fixture(scope="session")
def geom():
    return SystemGeometry()


@pytest.fixture(scope="session")
def sigma():
    return noise_sigma(-90.0)


@pytest.fixture
def ul_link(sigma):
    def make(p_dbm):
        p = float(dbm_to_watt(p_dbm))
        return UlLinkConfig(p, p, sigma)

    return make


@pytest.fixture
def dl_link(sigma):
    def make(p_dbm, alpha=0.9, M1=4, M2=16):
        return DlLinkConfig(float(dbm_to_watt(p_dbm)), sigma, M1, M2, alpha)

    return make


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
