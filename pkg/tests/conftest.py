import numpy as np
import pytest

import lobequil as L


@pytest.fixture(scope="session")
def default_models():
    utility = L.ExponentialUtility()
    params = L.MarketParams()
    penalty = L.PenaltyModel(utility=utility)
    return utility, params, penalty


@pytest.fixture(scope="session")
def default_field(default_models):
    """Value field solved at the default fixture on the standard grid."""
    utility, params, penalty = default_models
    grid = L.Grid.from_params(params, nt=20, nx=30, nk=30)
    return L.solve_qvi(grid, utility, penalty, params)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
