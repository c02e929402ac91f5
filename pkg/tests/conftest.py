import numpy as np
import pytest

from calderon_cavities.forward import assemble_dtn
from calderon_cavities.geometry import Circle, Ellipse, build_scene

OUTER_R = 0.45
DISK_RHO = 0.08
DISK_Z0 = 0.15 + 0.1j


@pytest.fixture(scope="session")
def single_disk_scene():
    return build_scene(Circle(0, OUTER_R), [Circle(DISK_Z0, DISK_RHO)])


@pytest.fixture(scope="session")
def single_disk_dtn(single_disk_scene):
    return assemble_dtn(single_disk_scene, nodes_per_curve=256)


@pytest.fixture(scope="session")
def two_cavity_scene():
    return build_scene(Circle(0, OUTER_R),
                       [Ellipse(-0.12 + 0.08j, (0.09, 0.05), 0.3), Circle(0.17 - 0.1j, 0.07)])


@pytest.fixture(scope="session")
def two_cavity_dtn(two_cavity_scene):
    return assemble_dtn(two_cavity_scene, nodes_per_curve=256, with_k=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
