import io
import logging

import pytest

from regime_taa.fixtures import load_fixture
from regime_taa.forecast import AssetPanel
from regime_taa.ingest import build_factor_panel, parse_fred_md, read_group_map


@pytest.fixture(scope="session")
def fixture_texts():
    return load_fixture()


@pytest.fixture(scope="session")
def fixture_panel(fixture_texts):
    return parse_fred_md(fixture_texts["macro"], read_group_map(fixture_texts["groups"]))


@pytest.fixture(scope="session")
def fixture_factors(fixture_panel):
    logging.getLogger("regime_taa").setLevel(logging.ERROR)
    model, factors, report = build_factor_panel(fixture_panel)
    return model, factors, report


@pytest.fixture(scope="session")
def fixture_assets(fixture_texts):
    return AssetPanel.from_csv(io.StringIO(fixture_texts["assets"]))


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(acceptance_log.LINES, key=lambda k: (int(k.split(".")[0].rstrip("ab")), k)):
            terminalreporter.write_line(acceptance_log.LINES[key])
