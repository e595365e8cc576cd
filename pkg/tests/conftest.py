import pytest

from statarb.market_data import SyntheticConfig, generate_synthetic

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def coint_panel():
    return generate_synthetic(SyntheticConfig(n_assets=10, n_days=500, n_common_trends=2,
                                              mean_reversion_rate=0.1, seed=7))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
