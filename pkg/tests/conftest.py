import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gamma_damage import Hooke, Sym2

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

LAME_SET = [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)]


@pytest.fixture
def iso11():
    return Hooke.isotropic(1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_sym(rng, radius=5.0):
    """Uniform direction, radius uniform in [0, radius] (Frobenius norm)."""
    v = rng.standard_normal(3)
    v *= rng.uniform(0, radius) / np.linalg.norm(v)
    return Sym2.from_vec(v)


def acoustic_g(lam, mu, xi: Sym2, n_k=20000):
    """max over unit k of (xi k) . Gamma(k)^{-1} (xi k) with Gamma(k) = mu I + (lam+mu) k k^T."""
    t = np.linspace(0, math.pi, n_k, endpoint=False)
    K = np.stack([np.cos(t), np.sin(t)], axis=1)
    X = xi.matrix()
    s = K @ X.T
    # Gamma^{-1} = (I - (lam+mu)/(lam+2mu) k k^T) / mu
    sk = np.sum(s * K, axis=1)
    vals = (np.sum(s * s, axis=1) - (lam + mu) / (lam + 2 * mu) * sk ** 2) / mu
    return float(vals.max())
