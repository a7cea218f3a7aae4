import numpy as np
import pytest

from byzrose.attacks import AttackSpec
from byzrose.baselines import average_estimator, one_step_average, rose_med
from byzrose.reports import stack_field
from byzrose.simnet import CommLedger, broadcast_collect, ledger_totals


def test_average_estimator():
    t = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 12.0]])
    np.testing.assert_allclose(average_estimator(t), [3.0, 6.0])
    with pytest.raises(ValueError):
        average_estimator(np.empty((0, 2)))


def test_one_step_average_is_pooled_least_squares(make_cluster):
    cluster, model, data = make_cluster("gaussian", m=10, n=200, p=4, seed=1)
    out = one_step_average(cluster, model)
    pooled, *_ = np.linalg.lstsq(data.covariates, data.responses, rcond=None)
    np.testing.assert_allclose(out, pooled, atol=1e-8)


def test_rose_med_clean_data(make_cluster):
    cluster, model, data = make_cluster("logistic", m=15, n=500, p=3, seed=2)
    led = CommLedger()
    out = rose_med(cluster, model, ledger=led)
    assert np.linalg.norm(out - data.theta_star) < 0.2
    assert ledger_totals(led)[0] == 15 * 3 + 15 * (3 + 9)


def test_average_breaks_under_scaling_but_median_does_not(make_cluster):
    spec = AttackSpec("scale_statistic", 0.2, factor=-100.0)
    cluster, model, data = make_cluster("logistic", m=11, n=400, p=3, seed=3, attack=spec)
    avg = average_estimator(stack_field(broadcast_collect(cluster, model, "fit"), "theta_hat"))
    med = rose_med(cluster, model)
    assert np.linalg.norm(avg - data.theta_star) > 10
    assert np.linalg.norm(med - data.theta_star) < 0.3
