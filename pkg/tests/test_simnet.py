import numpy as np
import pytest

from byzrose.attacks import (AttackSpec, as_dict, attack_data, attack_statistics,
                             build_byzantine_set, byzantine_count)
from byzrose.models import DataShard, LossModel
from byzrose.reports import LocalReport, stack_field
from byzrose.robust import make_quantile_grid
from byzrose.rose import run_algorithm1, run_algorithm2
from byzrose.simnet import (CENTER_TO_NODE, NODE_TO_CENTER, Cluster, ClusterConfig, CommLedger,
                            WorkerError, broadcast_collect, ledger_totals, stream_seed)

G = make_quantile_grid(10)


def test_byzantine_count():
    assert byzantine_count(11, 0.1) == 1
    assert byzantine_count(11, 0.2) == 2
    assert byzantine_count(30, 0.1) == 3
    assert byzantine_count(101, 0.2) == 20
    assert byzantine_count(10, 0.0) == 0


def test_byzantine_set_rules():
    spec = AttackSpec("scale_statistic", 0.2)
    for s in range(50):
        b = build_byzantine_set(101, spec, s)
        assert len(b) == 20 and 1 not in b and b <= set(range(2, 102))
    forced = AttackSpec("label_flip", 0.2, center_is_byzantine=True)
    assert forced.center_may_be_byzantine
    for s in range(20):
        b = build_byzantine_set(101, forced, s)
        assert 1 in b and len(b) == 20
    maybe = AttackSpec("scale_statistic", 0.4, center_may_be_byzantine=True)
    assert any(1 in build_byzantine_set(5, maybe, s) for s in range(100))
    assert build_byzantine_set(11, AttackSpec("none", 0.2), 0) == frozenset()
    assert build_byzantine_set(11, spec, 7) == build_byzantine_set(11, spec, 7)


def test_attack_spec_validation():
    with pytest.raises(ValueError):
        AttackSpec("bogus", 0.1)
    with pytest.raises(ValueError):
        AttackSpec("scale_statistic", 0.5)
    with pytest.raises(ValueError):
        AttackSpec("scale_statistic", 0.1, factor=0.0)
    assert AttackSpec("scale_statistic").effective_factor == -3.0
    assert AttackSpec("covariate_scale").effective_factor == 10.0
    assert as_dict(AttackSpec("arbitrary", 0.1))["noise_scale"] == 10.0


def test_statistic_attacks_do_not_mutate_input():
    rep = LocalReport(3, theta_hat=np.array([1.0, -2.0]), sigma_diag=np.array([0.5, 0.5]))
    out = attack_statistics(rep, AttackSpec("scale_statistic", 0.1))
    np.testing.assert_array_equal(out.theta_hat, [-3.0, 6.0])
    np.testing.assert_array_equal(out.sigma_diag, [-1.5, -1.5])
    assert out.corrupted and not rep.corrupted
    np.testing.assert_array_equal(rep.theta_hat, [1.0, -2.0])
    h = LocalReport(2, gradient=np.zeros(3), hessian=np.eye(3))
    noisy = attack_statistics(h, AttackSpec("arbitrary", 0.1), seed=1)
    np.testing.assert_array_equal(noisy.hessian, noisy.hessian.T)
    again = attack_statistics(h, AttackSpec("arbitrary", 0.1), seed=1)
    np.testing.assert_array_equal(noisy.gradient, again.gradient)


def test_data_attacks():
    x = np.arange(6.0).reshape(3, 2)
    y = np.array([0.0, 1.0, 1.0])
    s = DataShard(x, y, 4)
    flipped = attack_data(s, None, None, AttackSpec("label_flip", 0.1))
    np.testing.assert_array_equal(flipped.responses, [1.0, 0.0, 0.0])
    assert flipped.machine_id == 4
    scaled = attack_data(s, None, None, AttackSpec("covariate_scale", 0.1))
    np.testing.assert_array_equal(scaled.covariates, 10 * x)
    with pytest.raises(ValueError):
        attack_data(DataShard(x, np.array([0.0, 2.0, 1.0])), None, None, AttackSpec("label_flip", 0.1))
    rng = np.random.default_rng(0)
    xp = rng.normal(size=(4000, 2))
    theta = np.array([0.8, -0.5])
    neg = attack_data(DataShard(xp, np.zeros(4000)), LossModel("poisson", 2), theta,
                      AttackSpec("poisson_negate", 0.1), seed=3)
    # responses follow exp(-x'theta): regress log-mean back
    assert np.mean(neg.responses) == pytest.approx(np.mean(np.exp(-xp @ theta)), rel=0.1)


def test_stream_seeds_are_distinct_and_stable():
    draws = set()
    for rep in range(3):
        for stream in range(5):
            for machine in range(4):
                v = np.random.default_rng(stream_seed(9, rep, stream, machine)).integers(2 ** 62)
                draws.add(int(v))
    assert len(draws) == 60
    a = np.random.default_rng(stream_seed(9, 1, 2, 3, 2)).random()
    b = np.random.default_rng(stream_seed(9, 1, 2, 3, 2)).random()
    assert a == b


def test_ledger():
    led = CommLedger()
    led.add(1, NODE_TO_CENTER, 1, 5)
    led.add(2, CENTER_TO_NODE, 2, 3)
    assert ledger_totals(led) == (5, 3)
    assert led.round_total(1) == 5 and len(led) == 2
    with pytest.raises(ValueError):
        led.add(1, "sideways", 1, 1)
    with pytest.raises(ValueError):
        led.add(1, NODE_TO_CENTER, 1, -1)


@pytest.mark.parametrize("triangular", [False, True])
def test_ledger_counts_per_algorithm(make_cluster, triangular):
    m, p = 11, 30
    cluster, model, _ = make_cluster("logistic", m=m, n=400, p=p, seed=0, triangular_wire=triangular)
    e1 = run_algorithm1(cluster, model, G, with_sigma=False)
    e2 = run_algorithm2(cluster, model, G, with_sigma=False)
    hsize = p * (p + 1) // 2 if triangular else p * p
    assert e1.comm.round_total(1) == m * p
    assert e1.comm.round_total(2) == m * (p + hsize)
    if not triangular:
        assert (e1.comm.round_total(1), e1.comm.round_total(2)) == (330, 10230)
    assert e1.comm.round_total(2, CENTER_TO_NODE) == m * p
    up1, up2 = ledger_totals(e1.comm)[0], ledger_totals(e2.comm)[0]
    assert up2 == 2 * up1


def test_reports_come_back_in_machine_order(make_cluster):
    cluster, model, _ = make_cluster("poisson", m=7, n=200, p=3, seed=1)
    reps = broadcast_collect(cluster, model, "fit", 2, ledger=CommLedger())
    assert [r.machine_id for r in reps] == list(range(1, 8))
    assert all(r.sigma_diag is not None for r in reps)
    with pytest.raises(ValueError):
        broadcast_collect(cluster, model, "gossip")
    with pytest.raises(ValueError):
        broadcast_collect(cluster, model, "derivatives", theta=np.zeros(2))


def test_byzantine_reports_leave_honest_ones_alone(make_cluster):
    clean, model, _ = make_cluster("logistic", m=11, n=300, p=3, seed=4)
    spec = AttackSpec("arbitrary", 0.2)
    dirty, _, _ = make_cluster("logistic", m=11, n=300, p=3, seed=4, attack=spec)
    a = broadcast_collect(clean, model, "fit", ledger=CommLedger())
    b = broadcast_collect(dirty, model, "fit", ledger=CommLedger())
    assert len(dirty.byzantine) == 2
    for ra, rb in zip(a, b):
        if rb.machine_id in dirty.byzantine:
            assert rb.corrupted and not np.array_equal(ra.theta_hat, rb.theta_hat)
        else:
            assert not rb.corrupted
            np.testing.assert_array_equal(ra.theta_hat, rb.theta_hat)


def test_runs_are_deterministic(make_cluster):
    spec = AttackSpec("arbitrary", 0.2)
    outs = []
    for _ in range(2):
        cluster, model, _ = make_cluster("logistic", m=11, n=300, p=3, seed=5, attack=spec)
        outs.append(run_algorithm2(cluster, model, G).theta)
    np.testing.assert_array_equal(*outs)


def test_thread_pool_matches_serial(make_cluster):
    cluster, model, data = make_cluster("logistic", m=9, n=300, p=3, seed=6)
    cfg = ClusterConfig(9, 300, 6, workers=4)
    par = Cluster(cluster.shards, cfg, cluster.byzantine)
    np.testing.assert_array_equal(run_algorithm1(cluster, model, G).theta,
                                  run_algorithm1(par, model, G).theta)


def test_center_without_data_sends_placeholder(make_cluster):
    cluster, model, _ = make_cluster("logistic", m=9, n=300, p=3, seed=7, central_data=False)
    reps = broadcast_collect(cluster, model, "fit", 2, ledger=CommLedger())
    assert reps[0].corrupted and reps[0].machine_id == 1
    assert np.all(reps[0].sigma_diag >= 0)
    again = broadcast_collect(cluster, model, "fit", 2, ledger=CommLedger())
    np.testing.assert_array_equal(reps[0].theta_hat, again[0].theta_hat)


def test_honest_failure_raises_byzantine_failure_sends_zeros():
    rng = np.random.default_rng(0)
    good = [DataShard(rng.normal(size=(40, 2)), (rng.random(40) < 0.5).astype(float), j)
            for j in range(1, 6)]
    sep = DataShard(np.array([[-1.0, 0.0], [1.0, 0.0], [-2.0, 1.0], [2.0, 1.0]] * 10),
                    np.array([0.0, 1.0, 0.0, 1.0] * 10), 3)
    shards = good[:2] + [sep] + good[3:]
    model = LossModel("logistic", 2)
    honest = Cluster(shards, ClusterConfig(5, 40))
    with pytest.raises(WorkerError) as info:
        broadcast_collect(honest, model, "fit", ledger=CommLedger())
    assert info.value.machine_id == 3
    byz = Cluster(shards, ClusterConfig(5, 40), byzantine={3})
    reps = broadcast_collect(byz, model, "fit", ledger=CommLedger())
    assert reps[2].corrupted and not reps[2].theta_hat.any()


def test_cluster_validation():
    s = DataShard(np.ones((2, 1)), np.ones(2), 1)
    with pytest.raises(ValueError):
        ClusterConfig(2, 10)
    with pytest.raises(ValueError):
        Cluster([s, s, s], ClusterConfig(3, 2))
    with pytest.raises(ValueError):
        stack_field([LocalReport(1)], "theta_hat")
