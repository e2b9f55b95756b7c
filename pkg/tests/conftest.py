import numpy as np
import pytest
from scipy.special import expit

from Equipoise.core.dataset import build_dataset
from Equipoise.core.glm import fit_outcome_model, fit_propensity
from Equipoise.core.models import FittedPropensity

SMOOTH_SCHEMES = ["IPW", "ATT", "ATC", "OW", "MW", "EW", "BW(3)", "BW(11)"]
EQUIPOISE_SCHEMES = ["OW", "MW", "EW", "BW(2)", "BW(11)"]


def observational(n=400, seed=11, beta=(-0.3, 0.8, -0.5), effect=2.0):
    """Two normal covariates, logistic treatment, linear outcome."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2))
    e = expit(beta[0] + x @ np.asarray(beta[1:]))
    z = rng.binomial(1, e)
    y = 1.0 + x[:, 0] + 0.5 * x[:, 1] + effect * z + rng.standard_normal(n)
    return build_dataset(z, y, x, ["X1", "X2"])


def fitted_scores(scores):
    """A propensity fit carrying the given scores and an intercept-only design."""
    scores = np.asarray(scores, dtype=np.float64)
    return FittedPropensity(
        coefficients=np.zeros(1),
        design_spec=None,
        scores=scores,
        converged=True,
        iterations=0,
        score_norm=0.0,
        design=np.ones((scores.shape[0], 1)),
    )


@pytest.fixture
def make_dataset():
    return observational


@pytest.fixture
def obs_ds():
    return observational()


@pytest.fixture
def obs_fp(obs_ds):
    return fit_propensity(obs_ds)


@pytest.fixture
def obs_outcome(obs_ds):
    return fit_outcome_model(obs_ds)


@pytest.fixture
def poor_overlap_ds():
    return observational(n=1500, seed=5, beta=(0.0, 2.2, -1.8), effect=1.0)


@pytest.fixture
def small_ds():
    z = [0, 1, 0, 1, 1, 0, 1, 0]
    y = [1.0, 3.5, 2.0, 4.0, 5.5, 1.5, 3.0, 2.5]
    x = [[0.2, 1.0], [1.1, 0.0], [-0.4, 1.0], [0.9, 1.0], [1.7, 0.0], [0.1, 0.0], [0.4, 1.0], [-1.0, 0.0]]
    return build_dataset(z, y, x, ["X1", "X2"])


@pytest.fixture
def band_free_scores():
    """Scores in (0.05, 0.95) that stay clear of the smoothed matching band."""
    rng = np.random.default_rng(3)
    e = rng.uniform(0.05, 0.95, 600)
    return e[np.abs(e - 0.5) > 0.01][:400]
