import dataclasses

import pytest

from cfsync import SimConfig, bundled_case_path, simulate
from cfsync.fileio import load_case


@pytest.fixture(scope="session")
def wscc9():
    return load_case(bundled_case_path("wscc9"))


@pytest.fixture(scope="session")
def wscc9_loadshed():
    return load_case(bundled_case_path("wscc9_loadshed"))


@pytest.fixture(scope="session")
def flat_traj(wscc9):
    """Event-free WSCC trajectory, 10 s."""
    return simulate(wscc9, SimConfig(t_end=10.0, dt=1e-3))


@pytest.fixture(scope="session")
def loadshed_traj(wscc9_loadshed):
    """Load shed at bus 6 at t = 2 s, 20 s horizon."""
    return simulate(wscc9_loadshed, SimConfig(t_end=20.0, dt=1e-3))


@pytest.fixture(scope="session")
def loadshed_traj_nogov(wscc9_loadshed):
    """Same disturbance with governors off and near-zero damping, for
    first-swing inertia fits."""
    case = dataclasses.replace(
        wscc9_loadshed,
        generators=[
            dataclasses.replace(g, d=0.1, governor=None)
            for g in wscc9_loadshed.generators
        ],
    )
    return simulate(case, SimConfig(t_end=4.0, dt=1e-3))
