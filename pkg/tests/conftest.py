import numpy as np
import pytest

from bwgeom import validate_psd


def make_spd(d, rng, scale=1.0):
    """Random symmetric positive definite matrix with eigenvalues in [0.2, 3]."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = rng.uniform(0.2, 3.0, size=d)
    return validate_psd(scale * (q * w) @ q.T)


def make_psd_rank(d, r, rng, scale=1.0):
    """Random PSD matrix of rank r."""
    x = rng.standard_normal((d, r))
    return validate_psd(scale * (x @ x.T))


def commuting_pair(d, rng):
    """Two SPD matrices sharing a random eigenbasis."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w1 = rng.uniform(0.2, 3.0, size=d)
    w2 = rng.uniform(0.2, 3.0, size=d)
    return validate_psd((q * w1) @ q.T), validate_psd((q * w2) @ q.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
