import numpy as np
import pytest

import pcmlax as px


@pytest.fixture(scope="session")
def su2():
    return px.su2()


@pytest.fixture(scope="session")
def u1():
    return px.u1(1)


@pytest.fixture(scope="session")
def mink():
    return px.MINKOWSKI


@pytest.fixture
def lat32():
    return px.Lattice2D((32, 32), (1.0 / 32, 1.0 / 32), "periodic")


def wave_family(N, eps=0.01, aniso=False):
    """su(2) dual field along one generator with a unit-speed wave profile.

    With equal spacings the discrete d'Alembertian of the profile cancels
    exactly; ``aniso`` doubles the x1 spacing so residuals are genuinely
    O(spacing^2) for refinement studies.
    """
    d1 = 2.0 / N if aniso else 1.0 / N
    lat = px.Lattice2D((N, N), (1.0 / N, d1), "periodic")
    x0, x1 = lat.coords()
    vals = np.zeros((N, N, 3))
    vals[:, :, 2] = eps * np.sin(2 * np.pi * (x0 - x1))
    return lat, px.FieldSet(values=vals, lattice=lat)


def abelian_wave(N, eps=0.01, aniso=True):
    d1 = 2.0 / N if aniso else 1.0 / N
    lat = px.Lattice2D((N, N), (1.0 / N, d1), "periodic")
    x0, x1 = lat.coords()
    vals = (eps * np.sin(2 * np.pi * (x0 - x1)))[:, :, None]
    return lat, px.FieldSet(values=vals, lattice=lat)
