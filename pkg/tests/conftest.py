import warnings

import numpy as np
import pytest

from twophase.model import ModelParams, canonical_params, derive


@pytest.fixture(scope="session")
def dp():
    return canonical_params()


@pytest.fixture(scope="session")
def random_param_sets():
    """20 reproducible admissible parameter records."""
    rng = np.random.default_rng(42)
    out = []
    while len(out) < 20:
        mu = float(rng.uniform(0.1, 2.0))
        p = ModelParams(
            rho_bar=float(rng.uniform(0.3, 3.0)),
            n_bar=float(rng.uniform(0.3, 3.0)),
            a_coef=float(rng.uniform(0.3, 3.0)),
            gamma=float(rng.uniform(1.0, 3.0)),
            mu=mu,
            lam=float(rng.uniform(-0.6 * mu, 1.0)),
        )
        out.append(derive(p))
    return out


@pytest.fixture(autouse=True)
def _quiet_wrap_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
