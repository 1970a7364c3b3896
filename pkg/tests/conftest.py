import numpy as np
import pytest

from epibif.models import ModelId, make_params
from epibif.report import load_golden, table_params

T1_FIXED = dict(alpha=6.0, omega=7.0, epsilon=0.02, gamma=0.01, beta=0.01, d=0.1)
AUTO_PARAMS = load_golden()["AUTO"]["params"]
AUTO2D_NAMES = ("f", "v_tilde", "sigma1", "b1", "mu_A", "pi1", "beta", "mu_n", "mu_E", "gamma", "mu_G", "lambda_E")

BASE = {
    ModelId.SIR_CONCAVE: dict(Lambda=9.87, beta=0.01, k=0.01, d=0.1, gamma=0.01, epsilon=0.02),
    ModelId.SIR_TREATMENT: dict(Lambda=9.87, k=0.01, **T1_FIXED),
    ModelId.INHOST_CONVEX: dict(A=0.8, B=0.036, C=0.823, D=0.057),
    ModelId.AUTOIMMUNE_2D: {k: AUTO_PARAMS[k] for k in AUTO2D_NAMES},
    ModelId.AUTOIMMUNE_3D: dict(AUTO_PARAMS),
}


def random_params(model: ModelId, rng: np.random.Generator, spread: float = 3.0):
    """Each base value multiplied by a log-uniform factor in [1/spread, spread]."""
    base = BASE[model]
    factors = np.exp(rng.uniform(-np.log(spread), np.log(spread), len(base)))
    return make_params(model, **{k: v * f for (k, v), f in zip(base.items(), factors)})


@pytest.fixture
def t2_case1():
    return table_params("T2", 1)


@pytest.fixture
def auto3d():
    return table_params("AUTO", 1)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
