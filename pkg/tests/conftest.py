import numpy as np
import pytest

from primeimpute import MaskedDataset


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def random_masked(rng, n=40, p=5, miss=0.25, shift=0.0):
    """Random dataset with at least one observed column per row."""
    x = rng.standard_normal((n, p)) + shift
    y = rng.standard_normal(n)
    mask = rng.random((n, p)) > miss
    mask[~mask.any(axis=1), 0] = True
    return MaskedDataset(y=y, x=x, mask=mask)
