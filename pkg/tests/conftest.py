import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from defaultpred.features import LabeledDataset, build_features
from defaultpred.synth import GeneratorConfig, generate

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def make_dataset(X, y, names=None, firm_ids=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    names = names or [f"f{j}" for j in range(X.shape[1])]
    n = len(y)
    ids = firm_ids if firm_ids is not None else [f"F{i}" for i in range(n)]
    return LabeledDataset(list(names), X, np.asarray(y), ids, ["S01"] * n, ["G01"] * n)


@pytest.fixture(scope="session")
def small_panels():
    return generate(GeneratorConfig(n_firms=3000, seed=11))


@pytest.fixture(scope="session")
def small_dataset(small_panels):
    return build_features(small_panels, 2014, use_balance=True)
