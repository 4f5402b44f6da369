import numpy as np
import pytest

from bellwether.dataset import MINIMIZE, EnvironmentCommunity, EnvironmentId, MeasurementTable, OptionSchema


def binary_grid(n_options: int) -> np.ndarray:
    """All 2**n binary configurations, in counting order."""
    codes = np.arange(2**n_options)
    return ((codes[:, None] >> np.arange(n_options - 1, -1, -1)) & 1).astype(float)


def make_table(name, X, perf, schema=None, objective=MINIMIZE) -> MeasurementTable:
    X = np.asarray(X, dtype=float)
    schema = schema or OptionSchema.binary(X.shape[1])
    return MeasurementTable(EnvironmentId(name), schema, X, np.asarray(perf, dtype=float), objective)


def make_community(perfs: dict, X, targets=()) -> EnvironmentCommunity:
    X = np.asarray(X, dtype=float)
    schema = OptionSchema.binary(X.shape[1])
    tables = {n: make_table(n, X, p, schema) for n, p in perfs.items()}
    return EnvironmentCommunity(
        schema, [t for n, t in tables.items() if n not in targets], [tables[n] for n in targets]
    )


@pytest.fixture
def grid5():
    return binary_grid(5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria append "PASS/FAIL ..." lines here; printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
