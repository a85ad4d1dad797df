import numpy as np
import pytest

import ergodiff as ed


@pytest.fixture(scope="session")
def ou_model():
    return ed.DriftModel.ornstein_uhlenbeck(1.0)


@pytest.fixture(scope="session")
def ou_inv(ou_model):
    return ed.build_invariant(ou_model)


@pytest.fixture(scope="session")
def triangular():
    return ed.make_kernel(1)


@pytest.fixture(scope="session")
def tanh_model():
    return ed.DriftModel.tanh_shift(amplitude=1.5, slope=1.0, shift=0.0)


@pytest.fixture(scope="session")
def tanh_inv(tanh_model):
    return ed.build_invariant(tanh_model)


def gaussian_rho(x):
    """Closed-form OU (gamma=1) invariant density, the test oracle."""
    return np.exp(-np.asarray(x) ** 2) / np.sqrt(np.pi)
