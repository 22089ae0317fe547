import numpy as np
import pytest

from adsdp.events import ConversionEvent, ImpressionEvent

# pass/fail lines collected by the acceptance suite
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def day1_impressions():
    return [
        ImpressionEvent("u1", "P-1", "Ad-1", 1),
        ImpressionEvent("u1", "P-1", "Ad-1", 11),
        ImpressionEvent("u2", "P-1", "Ad-1", 15),
        ImpressionEvent("u2", "P-2", "Ad-1", 25),
    ]


@pytest.fixture
def day1_conversions():
    return [
        ConversionEvent("u1", "Ad-1", 10),
        ConversionEvent("u2", "Ad-1", 20),
        ConversionEvent("u2", "Ad-1", 30),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
