import numpy as np
import pytest

from optsub.logistic import BinaryDataset
from optsub.survival import SurvivalDataset

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def random_survival(rng, n=60, r=3, ties=False, late_entry=False, event_rate=0.4):
    x = rng.normal(size=(n, r))
    exit_ = rng.exponential(1.0, n) + 0.05
    if ties:
        exit_ = np.round(exit_ * 4) / 4 + 0.25
    status = (rng.uniform(size=n) < event_rate).astype(int)
    status[0] = 1
    entry = None
    if late_entry:
        entry = rng.uniform(0, 0.6, n) * exit_
    return SurvivalDataset(exit_, status, x, entry=entry)


def random_binary(rng, n=80, r=3, intercept=-1.0):
    x = rng.normal(size=(n, r))
    eta = intercept + x @ rng.normal(scale=0.7, size=r)
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-eta))).astype(int)
    y[0], y[1] = 1, 0
    return BinaryDataset(y, x)
