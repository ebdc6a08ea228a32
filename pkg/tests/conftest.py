import numpy as np
import pytest

from bqce.cauchy_born import find_ground_state
from bqce.eam import EamModel
from bqce.lattice import generate_domain, neighbor_shells


@pytest.fixture(scope="session")
def model():
    return EamModel()


@pytest.fixture(scope="session")
def ground_state(model):
    return find_ground_state(model)


@pytest.fixture(scope="session")
def domain10():
    return generate_domain(10)


@pytest.fixture(scope="session")
def nbrs10(domain10):
    return neighbor_shells(domain10)


@pytest.fixture(scope="session")
def divacancy12():
    d = generate_domain(12, "divacancy")
    return d, neighbor_shells(d)


def origin_id(domain):
    return int(domain.lookup(np.array([[0, 0]]))[0])
