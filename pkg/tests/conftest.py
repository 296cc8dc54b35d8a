import numpy as np
import pytest

from cfmpc.model import ModelParams


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_state(rng, params, attitude_scale=0.3):
    """Random but physically sane state (attitude away from gimbal lock)."""
    x = np.zeros(24)
    x[0:3] = rng.uniform(-attitude_scale, attitude_scale, 3)
    x[3:6] = rng.uniform(-1.0, 1.0, 3) + [0.0, 0.0, params.nominal_height]
    x[6:9] = rng.uniform(-1.0, 1.0, 3)
    x[9:12] = rng.uniform(-1.0, 1.0, 3)
    x[12:24] = params.q_default + rng.uniform(-0.3, 0.3, 12)
    return x


def random_input(rng):
    u = np.zeros(24)
    u[0:12] = rng.uniform(-80.0, 80.0, 12)
    u[2:12:3] += 100.0  # bias normal forces upward
    u[12:24] = rng.uniform(-2.0, 2.0, 12)
    return u


def fd_gradient(f, x, h=1e-6):
    """Central finite-difference gradient of scalar f at x."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def fd_jacobian(f, x, h=1e-6):
    """Central finite-difference Jacobian of vector f at x."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(f(x))
    J = np.empty((len(f0), len(x)))
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2.0 * h)
    return J


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b).max() / max(1.0, np.abs(b).max())
