import numpy as np
import pytest

from groupforge import AttributeTable, DistanceMatrix

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_distances(rng, n):
    X = rng.random((n, n))
    D = np.triu(X, 1)
    return DistanceMatrix(D + D.T)


def attrs_from(column, name="s"):
    column = np.asarray(column)
    return AttributeTable([f"s{i}" for i in range(column.size)], {name: column})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def marks_csv(tmp_path):
    p = tmp_path / "marks.csv"
    p.write_text("student_id,maths,databases\na,55,70\nb,62,48\nc,91,85\n")
    return p
