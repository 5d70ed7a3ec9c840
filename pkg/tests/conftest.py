import os

import pytest

from corescope.topology import Topology


@pytest.fixture
def t3_topology() -> Topology:
    """The 4 x 16 x 8 shape the round-robin scheme was designed on."""
    return Topology(packages=4, cores_per_package=16, threads_per_core=8,
                    clock_ghz=1.67)


@pytest.fixture
def tiny_topology() -> Topology:
    return Topology(packages=1, cores_per_package=2, threads_per_core=2,
                    clock_ghz=2.0)


@pytest.fixture
def restore_affinity():
    """Pin tests must leave the pytest process unpinned."""
    if not hasattr(os, "sched_getaffinity"):
        yield None
        return
    before = os.sched_getaffinity(0)
    yield before
    os.sched_setaffinity(0, before)
