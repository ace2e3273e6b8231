import numpy as np
import pytest

from faultloc.grid import Bus, GridSpec, Line, build_admittance, bundled_case


def make_grid(n, edges, z=complex(0.01, 0.1), b=0.0, loads=None, shunt=0j, ref=1):
    """Grid with buses 1..n and one line per (from, to) pair in ``edges`` (1-based)."""
    loads = [0j] * n if loads is None else loads
    buses = tuple(Bus(k + 1, shunt, complex(loads[k])) for k in range(n))
    lines = tuple(Line(q + 1, f, t, z, b) for q, (f, t) in enumerate(edges))
    return GridSpec(buses, lines, ref)


def path_edges(n):
    return [(k, k + 1) for k in range(1, n)]


@pytest.fixture(scope="session")
def case39():
    return bundled_case("39")


@pytest.fixture(scope="session")
def case68():
    return bundled_case("68")


@pytest.fixture(scope="session")
def Y39(case39):
    return build_admittance(case39)


@pytest.fixture(scope="session")
def Y68(case68):
    return build_admittance(case68)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
