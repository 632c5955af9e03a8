import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from src.errors import ConfigurationError, DomainError
from src.model.losses import (HALF_LOG_2PI, AbstentionParams, LossKind, abstention_loss,
                              batch_gradients, batch_loss, gaussian_nll, loss_gradients,
                              mae_loss, prediction_weight)
from src.model.net import PredictionPair


def test_gaussian_nll_at_the_mean():
    assert gaussian_nll(0.0, 0.0, 1.0) == pytest.approx(0.918939, abs=1e-6)


@pytest.mark.parametrize('sigma', [0.3, 1.0, 4.2])
def test_gaussian_nll_one_sigma_away(sigma):
    assert gaussian_nll(1.0 + sigma, 1.0, sigma) == pytest.approx(
        HALF_LOG_2PI + np.log(sigma) + 0.5)


def test_gaussian_nll_rejects_non_positive_sigma():
    with pytest.raises(DomainError):
        gaussian_nll(0.0, 0.0, 0.0)


@pytest.mark.parametrize('sigma, expected', [(1.0, 1.0), (2.0, 0.25), (0.1, 1.0)])
def test_prediction_weight(sigma, expected):
    assert prediction_weight(sigma, 1.0) == pytest.approx(expected)


def test_prediction_weight_bounds(rng):
    sigma = np.exp(rng.uniform(-3, 3, 10_000))
    kappa = float(np.exp(rng.uniform(-1, 1)))
    q = prediction_weight(sigma, kappa)

    assert np.all((q > 0) & (q <= 1))
    np.testing.assert_array_equal(q == 1.0, sigma <= kappa)


def test_gaussian_nll_is_minimal_at_the_target(rng):
    for _ in range(200):
        y = rng.normal(scale=3.0)
        sigma = float(np.exp(rng.uniform(-1, 1)))
        mu = y + rng.normal(scale=2.0, size=50)
        assert np.all(gaussian_nll(y, mu, sigma) >= gaussian_nll(y, y, sigma))


def test_gaussian_nll_best_sigma_is_the_absolute_residual(rng):
    for _ in range(50):
        y, mu = rng.normal(scale=2.0, size=2)
        residual = abs(y - mu)
        start = np.log(residual)
        result = minimize_scalar(lambda t: float(gaussian_nll(y, mu, np.exp(t))),
                                 bracket=(start - 2.0, start + 1.5), method='golden',
                                 tol=1e-10)
        assert np.exp(result.x) == pytest.approx(residual, rel=1e-5)


def test_abstention_penalty_grows_with_alpha(rng):
    alphas = np.linspace(0.0, 5.0, 11)
    for _ in range(200):
        y, mu = rng.normal(size=2)
        kappa = float(np.exp(rng.uniform(-1, 1)))
        sigma = kappa * float(np.exp(rng.uniform(0.01, 2.0)))
        losses = [float(abstention_loss(y, mu, sigma, AbstentionParams(alpha=a, kappa=kappa)))
                  for a in alphas]
        assert np.all(np.diff(losses) > 0)


def test_abstention_loss_hand_example():
    loss = abstention_loss(0.0, 0.0, 2.0, AbstentionParams(alpha=0.1, kappa=1.0))
    assert loss == pytest.approx(0.541651, abs=1e-6)


def test_abstention_loss_without_penalty_scales_nll():
    params = AbstentionParams(alpha=0.0, kappa=0.5)
    assert abstention_loss(0.3, -0.2, 1.0, params) == pytest.approx(
        0.25 * gaussian_nll(0.3, -0.2, 1.0))


def test_abstention_loss_equals_nll_below_kappa(rng):
    n = 10_000
    kappa = rng.uniform(0.1, 3.0, n)
    sigma = kappa * rng.uniform(0.01, 1.0, n)
    y, mu = rng.normal(size=n), rng.normal(size=n)
    for i in range(0, n, 1000):
        params = AbstentionParams(alpha=float(rng.uniform(0, 2)), kappa=float(kappa[i]))
        s = np.minimum(sigma[i:i + 1000], params.kappa)
        np.testing.assert_array_equal(abstention_loss(y[i:i + 1000], mu[i:i + 1000], s, params),
                                      gaussian_nll(y[i:i + 1000], mu[i:i + 1000], s))


def test_abstention_params_validation():
    with pytest.raises(DomainError):
        AbstentionParams(alpha=0.1, kappa=0.0)
    with pytest.raises(DomainError):
        AbstentionParams(alpha=-1.0, kappa=1.0)


def test_mae_examples():
    assert mae_loss(2.0, 2.0) == 0.0
    assert mae_loss(3.0, 1.0) == 2.0
    pred = PredictionPair(mu=np.array([1.0, 2.0, 3.0]))
    assert batch_loss(LossKind.MAE, np.array([0.0, 2.0, 5.0]), pred) == pytest.approx(1.0)


def test_unknown_loss_kind():
    with pytest.raises(ConfigurationError):
        loss_gradients('hinge', 0.0, 0.0, 1.0)


def test_abstention_requires_params():
    pred = PredictionPair(mu=np.zeros(2), sigma=np.ones(2))
    with pytest.raises(ConfigurationError):
        batch_loss(LossKind.ABSTENTION, np.zeros(2), pred)


def _central_difference(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


def test_gradients_match_finite_differences(rng):
    """1000 configurações aleatórias, longe do joelho σ = κ."""
    checked = 0
    while checked < 1000:
        y, mu = rng.normal(scale=2.0, size=2)
        sigma = float(np.exp(rng.uniform(-1.5, 1.5)))
        kappa = float(np.exp(rng.uniform(-1.5, 1.5)))
        if abs(sigma - kappa) < 1e-4 * max(1.0, kappa) + 1e-4:
            continue
        params = AbstentionParams(alpha=float(rng.uniform(0, 1)), kappa=kappa)
        h = 1e-6 * sigma

        for kind, loss in ((LossKind.GAUSSIAN_NLL, lambda m, s: gaussian_nll(y, m, s)),
                           (LossKind.ABSTENTION,
                            lambda m, s: abstention_loss(y, m, s, params))):
            d_mu, d_sigma = loss_gradients(kind, y, mu, sigma, params)
            num_mu = _central_difference(lambda m: float(loss(m, sigma)), mu, h)
            num_sigma = _central_difference(lambda s: float(loss(mu, s)), sigma, h)
            assert float(d_mu) == pytest.approx(num_mu, rel=1e-5, abs=1e-7)
            assert float(d_sigma) == pytest.approx(num_sigma, rel=1e-5, abs=1e-7)
        checked += 1


def test_mae_gradient_is_sign():
    d_mu, d_sigma = loss_gradients(LossKind.MAE, np.array([1.0, 0.0]), np.array([0.0, 2.0]))
    np.testing.assert_array_equal(d_mu, [-1.0, 1.0])
    np.testing.assert_array_equal(d_sigma, 0.0)


def test_batch_gradients_are_averaged():
    pred = PredictionPair(mu=np.array([0.5, -0.5]), sigma=np.array([1.0, 2.0]))
    y = np.array([0.0, 1.0])
    d_mu, d_sigma = loss_gradients(LossKind.GAUSSIAN_NLL, y, pred.mu, pred.sigma)
    grads = batch_gradients(LossKind.GAUSSIAN_NLL, y, pred)

    assert grads.shape == (2, 2)
    np.testing.assert_allclose(grads[:, 0], d_mu / 2)
    np.testing.assert_allclose(grads[:, 1], d_sigma / 2)
