import math

import numpy as np
import pytest

from byzrose.models import (DataShard, LossModel, ModelDomainError, gaussian_eval, logistic_eval,
                            poisson_eval, shard_objective)

EVALS = {"logistic": logistic_eval, "poisson": poisson_eval, "gaussian": gaussian_eval}


def test_logistic_symmetric_point():
    loss, g, h = logistic_eval([1.0, 0.0], 1, [0.0, 0.0])
    assert loss == pytest.approx(math.log(2))
    np.testing.assert_allclose(g, [-0.5, 0.0])
    np.testing.assert_allclose(h, [[0.25, 0.0], [0.0, 0.0]])


def test_logistic_hand_value():
    loss, g, h = logistic_eval([1.0], 0, [math.log(3)])
    assert loss == pytest.approx(math.log(4))
    assert g[0] == pytest.approx(0.75)
    assert h[0, 0] == pytest.approx(0.1875)


def test_logistic_saturation():
    with np.errstate(over="raise", invalid="raise"):
        loss, g, h = logistic_eval([1.0], 1, [1000.0])
    assert loss == pytest.approx(0.0, abs=1e-300)
    assert abs(g[0]) < 1e-300
    assert np.isfinite(h).all()
    loss, g, _ = logistic_eval([1.0], 0, [1000.0])
    assert loss == pytest.approx(1000.0)
    assert g[0] == pytest.approx(1.0)


def test_poisson_examples():
    x = np.array([0.3, -1.2])
    _, g, _ = poisson_eval(x, 4, [0.0, 0.0])
    np.testing.assert_allclose(g, (1 - 4) * x)
    loss, g, h = poisson_eval([1.0], 2, [math.log(2)])
    assert loss == pytest.approx(2 - 2 * math.log(2))
    assert g[0] == pytest.approx(0.0, abs=1e-15)
    assert h[0, 0] == pytest.approx(2.0)
    loss, g, h = poisson_eval([2.0], 0, [0.0])
    assert (loss, g[0], h[0, 0]) == (1.0, 2.0, 4.0)


def test_poisson_overflow_guard():
    with pytest.raises(ModelDomainError):
        poisson_eval([1.0], 0, [701.0])
    poisson_eval([1.0], 0, [699.0])


def test_gaussian_examples():
    x = np.array([0.5, 2.0])
    theta = np.array([1.0, -1.0])
    loss, g, _ = gaussian_eval(x, x @ theta, theta)
    assert loss == 0.0 and not g.any()
    loss, g, h = gaussian_eval([1.0], 3.0, [1.0])
    assert (loss, g[0], h[0, 0]) == (2.0, -2.0, 1.0)
    _, g, h = gaussian_eval([0.0, 0.0, 0.0], 1.7, [1.0, 2.0, 3.0])
    assert not g.any() and not h.any()


@pytest.mark.parametrize("fn", list(EVALS.values()))
def test_dimension_mismatch(fn):
    with pytest.raises(ValueError):
        fn([1.0, 2.0], 1, [0.0])


def test_bad_responses():
    with pytest.raises(ModelDomainError):
        logistic_eval([1.0], 0.5, [0.0])
    with pytest.raises(ModelDomainError):
        poisson_eval([1.0], -1, [0.0])


def _random_case(kind, rng, p):
    x = rng.normal(size=p)
    theta = rng.normal(size=p) * 0.7
    y = {"logistic": float(rng.integers(0, 2)), "poisson": float(rng.poisson(2.0)),
         "gaussian": rng.normal()}[kind]
    return x, y, theta


@pytest.mark.parametrize("kind", list(EVALS))
def test_finite_differences(kind):
    rng = np.random.default_rng(11)
    fn = EVALS[kind]
    for _ in range(25):
        p = int(rng.integers(1, 6))
        x, y, theta = _random_case(kind, rng, p)
        _, g, h = fn(x, y, theta)
        g_fd = np.empty(p)
        h_fd = np.empty((p, p))
        for l in range(p):
            step = 1e-6 * max(1.0, abs(theta[l]))
            e = np.zeros(p)
            e[l] = step
            lp, gp, _ = fn(x, y, theta + e)
            lm, gm, _ = fn(x, y, theta - e)
            g_fd[l] = (lp - lm) / (2 * step)
            h_fd[:, l] = (gp - gm) / (2 * step)
        scale = max(1.0, np.abs(g).max())
        assert np.abs(g - g_fd).max() / scale <= 1e-5
        hscale = max(1.0, np.abs(h).max())
        assert np.abs(h - h_fd).max() / hscale <= 1e-4


@pytest.mark.parametrize("kind", list(EVALS))
def test_hessian_psd(kind):
    rng = np.random.default_rng(5)
    for _ in range(10):
        x, y, theta = _random_case(kind, rng, 4)
        _, _, h = EVALS[kind](x, y, theta)
        np.testing.assert_array_equal(h, h.T)
        v = rng.normal(size=(100, 4))
        assert (np.einsum("ij,jk,ik->i", v, h, v) >= -1e-12).all()


def _shard(kind, rng, n=40, p=3):
    x = rng.normal(size=(n, p))
    y = {"logistic": rng.integers(0, 2, n), "poisson": rng.poisson(1.5, n),
         "gaussian": rng.normal(size=n)}[kind].astype(float)
    return DataShard(x, y)


@pytest.mark.parametrize("kind", list(EVALS))
def test_shard_objective_single_sample(kind):
    rng = np.random.default_rng(1)
    s = _shard(kind, rng, n=1)
    theta = rng.normal(size=3)
    f, g, h = shard_objective(s, LossModel(kind, 3), theta)
    lf, lg, lh = EVALS[kind](s.covariates[0], s.responses[0], theta)
    assert f == pytest.approx(lf, rel=1e-14)
    np.testing.assert_allclose(g, lg, rtol=1e-14)
    np.testing.assert_allclose(h, lh, rtol=1e-14)


@pytest.mark.parametrize("kind", list(EVALS))
def test_shard_objective_duplication_and_permutation(kind):
    rng = np.random.default_rng(2)
    s = _shard(kind, rng)
    model = LossModel(kind, 3)
    theta = rng.normal(size=3) * 0.3
    base = shard_objective(s, model, theta)
    dup = DataShard(np.vstack([s.covariates] * 2), np.concatenate([s.responses] * 2))
    perm = rng.permutation(s.n)
    shuffled = DataShard(s.covariates[perm], s.responses[perm])
    for other in (dup, shuffled):
        out = shard_objective(other, model, theta)
        assert out[0] == pytest.approx(base[0], rel=1e-12)
        np.testing.assert_allclose(out[1], base[1], rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(out[2], base[2], rtol=1e-12, atol=1e-14)
    np.testing.assert_array_equal(base[2], base[2].T)


def test_gaussian_shard_against_direct_average():
    x = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
    y = np.array([1.0, 2.0, 2.0])
    theta = np.array([0.5, 0.5])
    f, g, h = shard_objective(DataShard(x, y), LossModel("gaussian", 2), theta)
    r = y - x @ theta
    assert f == pytest.approx(np.mean(r ** 2) / 2)
    np.testing.assert_allclose(g, -(x.T @ r) / 3)
    np.testing.assert_allclose(h, x.T @ x / 3)


def test_intercept_column():
    model = LossModel("gaussian", 3, intercept=True)
    loss, g, _ = model.evaluate([2.0, 1.0], 4.0, [1.0, 1.0, 1.0])
    assert loss == pytest.approx(0.0)
    with pytest.raises(ValueError):
        LossModel("gaussian", 2, intercept=True).design(np.ones((2, 2)))


def test_shard_validation():
    with pytest.raises(ValueError):
        DataShard(np.ones((3, 2)), np.ones(2))
    with pytest.raises(ValueError):
        LossModel("probit", 2)
