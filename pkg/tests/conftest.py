import numpy as np
import pytest

from byzrose.attacks import AttackSpec
from byzrose.experiment import generate_synthetic
from byzrose.models import LossModel
from byzrose.simnet import ClusterConfig, scatter_data


def build_cluster(kind="logistic", m=11, n=400, p=4, seed=0, attack=None, central_data=True,
                  theta="default", triangular_wire=False, replication=0):
    data = generate_synthetic(kind, m, n, p, theta, seed=seed)
    model = LossModel(kind, p)
    cfg = ClusterConfig(m, n, seed, attack or AttackSpec(), replication, triangular_wire)
    cluster = scatter_data(data.covariates, data.responses, cfg, model, data.theta_star,
                           central_data=central_data)
    return cluster, model, data


@pytest.fixture
def make_cluster():
    return build_cluster


@pytest.fixture(autouse=True)
def _quiet_numpy():
    with np.errstate(under="ignore"):
        yield
