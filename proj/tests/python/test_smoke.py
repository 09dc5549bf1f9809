import math

import numpy as np
import pytest

import neuronal_al as na


def test_net_forward_and_gradient_shapes():
    net = na.Net(4, 8, 3, 2, seed=1)
    assert [w.shape for w in net.weights] == [(8, 4), (8, 8), (2, 8)]
    x = np.array([0.5, -0.5, 0.5, 0.5])
    out = net.predict(x)
    assert out.shape == (2,)
    np.testing.assert_allclose(net.predict(3.0 * x), 3.0 * out, rtol=1e-12)
    grads = net.gradient(x, np.array([1.0, 0.0]))
    assert [g.shape for g in grads] == [w.shape for w in net.weights]


def test_gradient_matches_finite_difference():
    net = na.Net(3, 5, 2, 1, seed=4)
    x = np.array([0.3, -0.8, 0.52])
    grad = net.gradient(x, np.ones(1))[0]
    weights = [w.copy() for w in net.weights]
    weights[0][2, 1] += 1e-6
    plus = na.Net(3, 5, 2, 1)
    plus.weights = weights
    assert (plus.predict(x)[0] - net.predict(x)[0]) / 1e-6 == pytest.approx(grad[2, 1], rel=1e-4, abs=1e-8)


def test_beta_and_decide():
    assert na.beta(1, 4, 1.0, 1, 0.1) == pytest.approx(4.608140096567727, rel=1e-14)
    assert na.beta(400, 3, 1.0, 50, 0.2) == pytest.approx(na.beta(100, 3, 1.0, 50, 0.2) / 2, rel=1e-14)
    d = na.decide(np.array([0.2, 0.25, 0.9]), 1.0, 0.05)
    assert (d["k_hat"], d["k_circ"], d["fired"]) == (0, 1, True)
    with pytest.raises(na.ConfigError):
        na.decide(np.array([0.1]), 2.0, 1.0)


def test_igw():
    probs, i_hat = na.igw_distribution(np.array([0.1, 0.3, 0.7]), 4.0, 2.0)
    assert i_hat == 0
    assert list(probs) == [0.8125, 0.125, 0.0625]
    with pytest.raises(na.ParameterError, match="mu"):
        na.igw_distribution(np.full(5, 0.4), 2.0, 1.0)
    assert na.min_admissible_mu(np.full(5, 0.4), 1.0) == pytest.approx(4.0)


def test_ntk_and_complexity():
    H = na.ntk_matrix(np.eye(2), 2)
    assert H[0, 0] == pytest.approx(2.0)
    assert H[0, 1] == pytest.approx(0.589719863241657, rel=1e-12)
    r = na.complexity_terms(np.array([[2.0]]), np.array([1.0]))
    assert r["S"] == pytest.approx(math.sqrt(0.5))
    assert r["L_H"] == pytest.approx(math.log(3.0))
    assert r["bound_holds"]
    with pytest.raises(na.DataError):
        na.ntk_matrix(np.array([[2.0, 0.0]]), 2)
    mean, se = na.mc_gram_oracle(np.eye(2), 2, 128, n_nets=4)
    assert mean.shape == (2, 2) and se.shape == (2, 2)


def test_synth():
    x, labels, posterior = na.synth(dim=6, num_classes=3, n=50, seed=2)
    assert x.shape == (50, 6)
    assert len(labels) == 50
    np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0)
    np.testing.assert_allclose(posterior.sum(axis=1), 1.0)
    with pytest.raises(na.ConfigError):
        na.synth(dim=2, num_classes=3)


def test_run_experiment_is_deterministic():
    config = na.default_config("neuronal-stream")
    config["net"]["width"] = 16
    config["stream"]["horizon"] = 100
    config["data"]["synth"]["dim"] = 5
    config["data"]["train_size"] = 100
    config["data"]["test_size"] = 50
    config["seeds"] = [0, 1]
    first = na.run_experiment(config)
    assert [r["record"] for r in first] == ["run", "run", "aggregate"]
    assert len(first[0]["metrics"]["regret_curve"]) == 100
    assert first == na.run_experiment(config)
    config["net"]["width"] = 0
    with pytest.raises(na.ConfigError):
        na.run_experiment(config)
