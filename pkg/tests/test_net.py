import json

import numpy as np
import pytest

from src.errors import ConfigurationError, DimensionError, NumericError
from src.model.losses import AbstentionParams, LossKind, batch_gradients, batch_loss
from src.model.net import (SIGMA_BIAS_INIT, SIGMA_EPS, Activation, LayerSpec, MlpModel,
                           backward, forward, softplus)
from src.model.optimizer import OptimizerState, optimizer_step


def _zero_model(input_width=3, hidden=(4,), l2=0.0):
    model = MlpModel.build(input_width, hidden, l2_first_layer=l2, seed=0)
    for w, b in zip(model.weights, model.biases):
        w[:] = 0.0
        b[:] = 0.0
    return model


def test_zero_network_outputs_softplus_of_zero():
    model = _zero_model()
    pred = forward(model, np.random.default_rng(0).normal(size=(5, 3)))

    np.testing.assert_array_equal(pred.mu, 0.0)
    assert pred.sigma == pytest.approx(np.full(5, np.log(2.0) + SIGMA_EPS))
    assert pred.sigma[0] == pytest.approx(0.693148, abs=1e-6)


def test_identity_linear_layer():
    model = MlpModel([LayerSpec(2, 2, Activation.LINEAR)], [np.eye(2)], [np.zeros(2)])
    pred = forward(model, np.array([[3.0, 2.0]]))

    assert pred.mu[0] == 3.0
    assert pred.sigma[0] == pytest.approx(2.126929, abs=1e-6)


def test_climate_architecture_accepts_900_features():
    model = MlpModel.build(900, (50, 25), seed=1)
    pred = forward(model, np.random.default_rng(1).normal(size=(7, 900)))

    assert [spec.output_width for spec in model.layers] == [50, 25, 2]
    assert np.all(np.isfinite(pred.mu))
    assert np.all(pred.sigma > 0)


def test_sigma_head_starts_near_one():
    model = MlpModel.build(4, (3,), seed=0)
    assert model.biases[-1][1] == pytest.approx(SIGMA_BIAS_INIT)
    assert softplus(np.array(SIGMA_BIAS_INIT)) == pytest.approx(1.0)


def test_sigma_stays_positive_for_very_negative_raw_output():
    model = MlpModel([LayerSpec(1, 2, Activation.LINEAR)], [np.array([[0.0, 1.0]])],
                     [np.zeros(2)])
    pred = forward(model, np.array([[-800.0]]))
    assert pred.sigma[0] > 0
    assert pred.sigma[0] == pytest.approx(SIGMA_EPS)


def test_forward_rejects_wrong_width():
    model = MlpModel.build(3, (4,), seed=0)
    with pytest.raises(DimensionError) as info:
        forward(model, np.zeros((2, 5)))
    assert info.value.layer == 0


def test_mismatched_layer_chain_names_layer():
    layers = [LayerSpec(3, 4), LayerSpec(5, 2, Activation.LINEAR)]
    with pytest.raises(DimensionError) as info:
        MlpModel(layers, [np.zeros((3, 4)), np.zeros((5, 2))], [np.zeros(4), np.zeros(2)])
    assert info.value.layer == 1


def test_final_layer_width_is_checked():
    with pytest.raises(ConfigurationError):
        MlpModel([LayerSpec(2, 3, Activation.LINEAR)], [np.zeros((2, 3))], [np.zeros(3)])


def test_zero_loss_grads_give_zero_gradients():
    model = MlpModel.build(3, (4, 3), seed=2)
    grads = backward(model, np.ones((6, 3)), np.zeros((6, 2)))
    for array in grads.arrays():
        np.testing.assert_array_equal(array, 0.0)


def test_l2_gradient_on_first_layer_only():
    model = MlpModel.build(3, (4, 3), l2_first_layer=0.1, seed=2)
    grads = backward(model, np.ones((6, 3)), np.zeros((6, 2)))

    np.testing.assert_allclose(grads.weights[0], 0.2 * model.weights[0])
    for array in grads.arrays()[1:]:
        np.testing.assert_array_equal(array, 0.0)


def test_non_finite_loss_grad_names_sample():
    model = MlpModel.build(2, (3,), seed=0)
    loss_grads = np.zeros((4, 2))
    loss_grads[2, 1] = np.nan
    with pytest.raises(NumericError) as info:
        backward(model, np.ones((4, 2)), loss_grads)
    assert info.value.sample_index == 2


@pytest.mark.parametrize('kind', [LossKind.GAUSSIAN_NLL, LossKind.MAE])
def test_backward_matches_finite_differences(kind):
    rng = np.random.default_rng(11)
    model = MlpModel.build(3, (5, 4), distributional=kind is not LossKind.MAE,
                           l2_first_layer=0.05, seed=3)
    x = rng.normal(size=(8, 3))
    y = rng.normal(size=8)

    def total_loss():
        return batch_loss(kind, y, forward(model, x)) + model.l2_penalty()

    grads = backward(model, x, batch_gradients(kind, y, forward(model, x)))
    h = 1e-6
    for param, grad in zip(model.parameters(), grads.arrays()):
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + h
            up = total_loss()
            param[index] = original - h
            down = total_loss()
            param[index] = original
            assert grad[index] == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-6)


@pytest.mark.parametrize('kind', [LossKind.GAUSSIAN_NLL, LossKind.ABSTENTION])
def test_backward_matches_finite_differences_on_small_models(kind):
    rng = np.random.default_rng(21)
    for _ in range(100):
        model = MlpModel.build(2, (4,), l2_first_layer=0.05, seed=int(rng.integers(2**31)))
        assert model.n_parameters <= 50
        x = rng.normal(size=(6, 2))
        y = rng.normal(size=6)

        params = None
        if kind is LossKind.ABSTENTION:
            # κ entre dois σ vizinhos, longe do joelho σ = κ
            sigma = np.sort(forward(model, x).sigma)
            params = AbstentionParams(alpha=float(rng.uniform(0.05, 1.0)),
                                      kappa=float(sigma[2] + sigma[3]) / 2)
            if sigma[3] - sigma[2] < 1e-3:
                continue

        def total_loss():
            return batch_loss(kind, y, forward(model, x), params) + model.l2_penalty()

        grads = backward(model, x, batch_gradients(kind, y, forward(model, x), params))
        h = 1e-6
        for param, grad in zip(model.parameters(), grads.arrays()):
            for index in np.ndindex(param.shape):
                original = param[index]
                param[index] = original + h
                up = total_loss()
                param[index] = original - h
                down = total_loss()
                param[index] = original
                assert grad[index] == pytest.approx((up - down) / (2 * h), rel=1e-5, abs=1e-7)


def test_checkpoint_round_trip_is_bit_identical(tmp_path):
    model = MlpModel.build(4, (6, 3), l2_first_layer=0.1, seed=9)
    x = np.random.default_rng(0).normal(size=(10, 4))

    restored = MlpModel.load(model.save(tmp_path / 'checkpoint.json'))
    before, after = forward(model, x), forward(restored, x)

    np.testing.assert_array_equal(before.mu, after.mu)
    np.testing.assert_array_equal(before.sigma, after.sigma)
    assert restored.l2_first_layer == 0.1


def test_checkpoint_with_wrong_version_is_rejected():
    data = MlpModel.build(2, (2,), seed=0).to_dict()
    data['format_version'] = 99
    with pytest.raises(ConfigurationError):
        MlpModel.from_dict(data)


def test_adam_first_step_moves_by_learning_rate():
    model = MlpModel([LayerSpec(1, 1, Activation.LINEAR)], [np.array([[1.0]])], [np.zeros(1)])
    state = OptimizerState.for_model(model, 0.0005)
    grads = backward(model, np.array([[1.0]]), np.array([1.0]))

    optimizer_step(state, model, grads)

    assert model.weights[0][0, 0] == pytest.approx(0.9995, abs=1e-9)
    assert state.step == 1


def test_adam_zero_gradient_leaves_parameters():
    model = MlpModel.build(2, (3,), seed=0)
    before = [p.copy() for p in model.parameters()]
    state = OptimizerState.for_model(model, 0.01)

    optimizer_step(state, model, backward(model, np.ones((2, 2)), np.zeros((2, 2))))

    for old, new in zip(before, model.parameters()):
        np.testing.assert_array_equal(old, new)


def test_l2_step_moves_only_first_layer_weights():
    model = MlpModel.build(3, (4, 3), l2_first_layer=0.1, seed=5)
    before = [p.copy() for p in model.parameters()]
    state = OptimizerState.for_model(model, 0.01)

    optimizer_step(state, model, backward(model, np.ones((5, 3)), np.zeros((5, 2))))

    after = model.parameters()
    assert np.all(after[0] != before[0])
    for old, new in zip(before[1:], after[1:]):
        np.testing.assert_array_equal(old, new)


def test_same_seed_same_weights_after_training_steps():
    def run():
        model = MlpModel.build(2, (4,), seed=4)
        state = OptimizerState.for_model(model, 0.01)
        x = np.random.default_rng(2).normal(size=(16, 2))
        y = x.sum(axis=1)
        for _ in range(10):
            pred = forward(model, x)
            optimizer_step(state, model,
                           backward(model, x, batch_gradients(LossKind.GAUSSIAN_NLL, y, pred)))
        return model

    first, second = run(), run()
    for a, b in zip(first.parameters(), second.parameters()):
        np.testing.assert_array_equal(a, b)


def test_checkpoint_records_the_config_hash(tmp_path):
    model = MlpModel.build(2, (3,), seed=0)
    path = model.save(tmp_path / 'checkpoint.json', config_hash='0123abcd4567')

    content = json.loads(path.read_text())
    assert content['config_hash'] == '0123abcd4567'
    assert content['format_version'] == model.to_dict()['format_version']
    restored = MlpModel.load(path)
    for a, b in zip(model.parameters(), restored.parameters()):
        np.testing.assert_array_equal(a, b)
