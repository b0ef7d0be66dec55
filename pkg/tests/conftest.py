import json

import numpy as np
import pytest

from sequences import SequenceFamily, SequencePair
from space import TridiagonalSpace


def make_pair(a=(1.0, 1.0, 0.0), b=(1.0, 1.0, 0.0), a_overrides=None, b_overrides=None):
    """Pair from (coefficient, base, power) triples"""
    return SequencePair(
        SequenceFamily(*a, overrides=a_overrides or {}),
        SequenceFamily(*b, overrides=b_overrides or {}),
    )


def random_pair(rng):
    """Random strong pair: |rho_a| = 1 and |rho_b/rho_a| <= 0.8."""
    theta, phi = rng.uniform(0.0, 2.0 * np.pi, 2)
    a = SequenceFamily(
        coefficient=complex(rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5)),
        base=complex(np.cos(theta), np.sin(theta)),
        power=float(rng.uniform(-0.5, 1.0)),
    )
    b = SequenceFamily(
        coefficient=complex(rng.uniform(0.2, 1.0), rng.uniform(-0.3, 0.3)),
        base=a.base * rng.uniform(0.1, 0.8) * complex(np.cos(phi), np.sin(phi)),
        power=float(rng.uniform(-0.5, 1.0)),
    )
    return SequencePair(a, b)


@pytest.fixture
def constant_pair():
    """a_n = 1, b_n = 1/2"""
    return make_pair(a=(1.0, 1.0, 0.0), b=(0.5, 1.0, 0.0))


@pytest.fixture
def bergman_pair():
    """a_n = sqrt(n+1), b_n = 2^-n"""
    return make_pair(a=(1.0, 1.0, 0.5), b=(1.0, 0.5, 0.0))


@pytest.fixture
def linear_pair():
    """a_n = n+1, b_n = 2^-n"""
    return make_pair(a=(1.0, 1.0, 1.0), b=(1.0, 0.5, 0.0))


@pytest.fixture
def linear_one_pair():
    """a_n = n+1, b_n = 1"""
    return make_pair(a=(1.0, 1.0, 1.0), b=(1.0, 1.0, 0.0))


@pytest.fixture
def unbounded_pair():
    """a_n = 1, b_n = 2^n"""
    return make_pair(a=(1.0, 1.0, 0.0), b=(1.0, 2.0, 0.0))


@pytest.fixture
def constant_space(constant_pair):
    return TridiagonalSpace(constant_pair)


@pytest.fixture
def linear_space(linear_pair):
    return TridiagonalSpace(linear_pair)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_pairs():
    generator = np.random.default_rng(7)
    return [random_pair(generator) for _ in range(10)]


@pytest.fixture
def write_spec(tmp_path):
    """Write a JSON space file and return its path"""
    def _write(data, name="space.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return _write


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("TRIDIAG_OUT", "TRIDIAG_LOG_LEVEL", "DATABASE_URL", "TRIDIAG_MAX_WORKERS"):
        monkeypatch.delenv(name, raising=False)
