import numpy as np
import pytest

from morphforge.synthetic import generate_face


@pytest.fixture
def face_a():
    return generate_face(101)


@pytest.fixture
def face_b():
    return generate_face(202)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_image(rng, h, w, c=1):
    return rng.uniform(0.0, 1.0, size=(h, w, c))
