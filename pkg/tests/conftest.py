import numpy as np
import pytest

from latentgeom.experiments.data import CircleDatasetSpec, generate_circle_data
from latentgeom.models.kernel_models import gp_fit, krr_fit


@pytest.fixture(scope="session")
def circle():
    return generate_circle_data(CircleDatasetSpec(seed=0))


@pytest.fixture(scope="session")
def circle_gp(circle):
    return gp_fit(circle)


@pytest.fixture(scope="session")
def circle_krr(circle, circle_gp):
    return krr_fit(circle, circle_gp.params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fd_jacobian(f, z, h=1e-6):
    """Central differences of a vector function, columns per input coordinate."""
    z = np.asarray(z, dtype=float)
    cols = []
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        cols.append((f(z + e) - f(z - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def rel_err(a, b):
    return np.linalg.norm(np.ravel(a) - np.ravel(b)) / max(np.linalg.norm(np.ravel(b)), 1e-300)


@pytest.fixture(scope="session")
def circle_ae(circle):
    from latentgeom.models.mlp import mlp_train

    return mlp_train(circle, epochs=2000, seed=1)


@pytest.fixture(scope="session")
def circle_vae_rbf(circle, circle_ae):
    from latentgeom.models.vae import vae_rbf_fit

    return vae_rbf_fit(circle, circle_ae, seed=3)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
