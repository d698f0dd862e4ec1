import numpy as np
import pytest

from susy_forge.confluent2 import b2_coefficients
from susy_forge.core import GridFn, make_grid, truncated_infinite
from susy_forge.hyperconfluent3 import compute_u_second_level, transform_model
from susy_forge.models import coulomb_pack, free_particle_pack


@pytest.fixture(scope="session")
def free():
    return free_particle_pack(1.0)


@pytest.fixture(scope="session")
def coulomb():
    return coulomb_pack(0)


@pytest.fixture(scope="session")
def free_result(free):
    return transform_model(free.model(), -0.25)


@pytest.fixture(scope="session")
def coulomb_result(coulomb):
    return transform_model(coulomb.model(), -0.1)


def operators(res):
    """``(B2 coefficients, u^(2))`` matching a transform result."""
    c = res.chain
    b2 = b2_coefficients(c.V0, c.w, c.epsilon)
    us = compute_u_second_level(c.u1, c.w, res.f0_used, -1.0, c.x0)
    return b2, us


@pytest.fixture(scope="session")
def free_ops(free_result):
    return operators(free_result)


@pytest.fixture(scope="session")
def coulomb_ops(coulomb_result):
    return operators(coulomb_result)


def tab(grid, values, label="g", **kw):
    return GridFn(grid, np.asarray(values, dtype=float), label, **kw)


@pytest.fixture
def line_grid():
    return make_grid(-20.0, 20.0, 40001, truncated_infinite(-1), truncated_infinite(1))


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
