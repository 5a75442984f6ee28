import numpy as np
import pytest

from qtomo import default_projectors, make_preset


@pytest.fixture(scope="session")
def projectors():
    return default_projectors()


@pytest.fixture(scope="session")
def presets():
    return {name: make_preset(name) for name in ("VNMS", "HES", "APSS")}


def random_state(rng, dim=4, rank=None):
    """Random density matrix A A+ / Tr with optional rank restriction."""
    r = rank or dim
    a = rng.standard_normal((dim, r)) + 1j * rng.standard_normal((dim, r))
    g = a @ a.conj().T
    return g / g.trace().real


def random_unitary(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))
