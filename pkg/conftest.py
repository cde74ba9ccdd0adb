"""Shared fixtures: truncations and solved c=1 triples cached per session."""

import pytest

from presets import get_preset
from rhsolver import run
from symbols import Truncation


@pytest.fixture
def trunc():
    return Truncation(2, -4, 4, 1, 0)


@pytest.fixture
def trunc0():
    return Truncation(0, -4, 4, 2, 0)


def _solve(name, trunc):
    data = get_preset(name).load(trunc)
    return data, run(data, trunc)


@pytest.fixture(scope="session")
def c1_order1():
    return _solve("c1-string", Truncation(1, -6, 6, 1, 0))


@pytest.fixture(scope="session")
def c1_order2():
    return _solve("c1-string", Truncation(2, -6, 6, 1, 0))


@pytest.fixture(scope="session")
def c1_small():
    """Order 2 on a narrow window, enough for the hierarchy checks."""
    return _solve("c1-string", Truncation(2, -3, 3, 1, 0))


@pytest.fixture(scope="session")
def unshifted_order2():
    return _solve("c1-unshifted", Truncation(2, -4, 4, 1, 0))


@pytest.fixture(scope="session")
def identity_order2():
    return _solve("identity", Truncation(2, -3, 3, 1, 0))


@pytest.fixture(scope="session")
def identity_two_times():
    """Both time families switched on."""
    return _solve("identity", Truncation(2, -3, 3, 1, 1))
