import pytest

from enclosurelab import Disk, Scene, build_grid


@pytest.fixture(scope="session")
def standard_scene():
    """Disk of radius 0.2 centered in the unit square, q_D = 1, m = 2."""
    return Scene(inclusions=(Disk((0.5, 0.5), 0.2),), qd_values=(1.0,), m=2)


@pytest.fixture(scope="session")
def grid129():
    return build_grid((0.0, 1.0, 0.0, 1.0), 129)


@pytest.fixture(scope="session")
def grid65():
    return build_grid((0.0, 1.0, 0.0, 1.0), 65)


@pytest.fixture(scope="session")
def grid33():
    return build_grid((0.0, 1.0, 0.0, 1.0), 33)
