import pytest

from builders import EXAMPLE, PROBLEMS
from conekit.constants import compute_all
from conekit.problem import load


@pytest.fixture(scope="session")
def example():
    return load(EXAMPLE)


@pytest.fixture(scope="session")
def consts(example):
    return compute_all(example)


@pytest.fixture(scope="session")
def toy():
    return load(PROBLEMS / "toy_linear.json")


@pytest.fixture(scope="session")
def zero():
    return load(PROBLEMS / "zero.json")
