import numpy as np
import pytest

from gsma.pencil import normalize_pair
from gsma.problems import random_pencil


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_pair(rng, pencil, n):
    return normalize_pair(crandn(rng, pencil.m, n), crandn(rng, pencil.m, n),
                          pencil)


def pencil_and_pair(rng, m=10, r=7, n=2, complex_=True):
    pen = random_pencil(rng, m, r, complex_=complex_)
    return pen, random_pair(rng, pen, n)


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(
        1.0, np.linalg.norm(b))
