import numpy as np
import pytest

from src.errors import ConfigurationError, DomainError
from src.training.controller import (ConstantAlphaController, PidConfig, PidController,
                                     PidState, constant_alpha_controller,
                                     measure_abstention, pid_update)


@pytest.mark.parametrize('sigmas, expected', [
    ([0.5, 0.5, 0.5], 0.0),
    ([2.0, 2.0], 1.0),
    ([0.5, 1.5, 2.5, 0.9], 0.5),
    ([1.0, 1.0], 0.0),
])
def test_measure_abstention(sigmas, expected):
    assert measure_abstention(sigmas, 1.0) == expected


def test_measure_abstention_empty():
    with pytest.raises(DomainError):
        measure_abstention([], 1.0)


def test_zero_error_keeps_alpha():
    cfg = PidConfig(setpoint=0.3)
    state = pid_update(PidState(alpha=0.7), cfg, 0.3)
    assert state.alpha == pytest.approx(0.7)


def test_velocity_step_hand_example():
    cfg = PidConfig(kp=1.0, ki=0.5, kd=0.0, setpoint=0.4)
    state = pid_update(PidState(alpha=1.0), cfg, 0.6)

    assert state.alpha - 1.0 == pytest.approx(0.3)
    assert state.e_prev == pytest.approx(0.2)
    assert state.e_prev2 == 0.0


def test_derivative_term_uses_two_previous_errors():
    cfg = PidConfig(kp=0.0, ki=0.0, kd=2.0, setpoint=0.0)
    state = pid_update(PidState(alpha=1.0, e_prev=0.1, e_prev2=0.3), cfg, 0.2)
    # kd·(0.2 − 2·0.1 + 0.3)
    assert state.alpha == pytest.approx(1.6)


def test_alpha_is_clamped():
    cfg = PidConfig(alpha_min=0.0, alpha_max=2.0, setpoint=0.5)
    assert pid_update(PidState(alpha=0.05), cfg, 0.0).alpha == 0.0
    assert pid_update(PidState(alpha=1.95), cfg, 1.0).alpha == 2.0


def test_update_resets_window_counters():
    state = pid_update(PidState(window_abstained=40, window_total=192), PidConfig(), 0.5)
    assert (state.window_abstained, state.window_total) == (0, 0)


def test_invalid_pid_config():
    with pytest.raises(ConfigurationError):
        PidConfig(kp=-1.0)
    with pytest.raises(ConfigurationError):
        PidConfig(window_batches=0)
    with pytest.raises(ConfigurationError):
        PidConfig(alpha_min=3.0, alpha_max=1.0)


def test_controller_updates_once_per_window():
    controller = PidController(PidConfig(window_batches=6, setpoint=0.5), initial_alpha=0.0)
    steps = [controller.observe_batch(np.full(32, 2.0), tau=1.0, epoch=0) for _ in range(12)]

    fired = [s for s in steps if s is not None]
    assert [i for i, s in enumerate(steps) if s is not None] == [5, 11]
    assert fired[0].measured_abstention == 1.0
    assert fired[0].delta_alpha == pytest.approx(1.0 * 0.5 + 0.5 * 0.5)
    assert controller.history == fired


def test_window_spans_epoch_boundary():
    controller = PidController(PidConfig(window_batches=4, setpoint=0.5))
    for _ in range(3):
        assert controller.observe_batch(np.full(10, 0.1), tau=1.0, epoch=0) is None
    step = controller.observe_batch(np.full(10, 5.0), tau=1.0, epoch=1)

    assert step.epoch == 1
    assert step.measured_abstention == pytest.approx(0.25)


def test_controller_counts_samples_not_batches():
    controller = PidController(PidConfig(window_batches=2, setpoint=0.0))
    controller.observe_batch(np.full(30, 2.0), tau=1.0, epoch=0)
    step = controller.observe_batch(np.full(10, 0.5), tau=1.0, epoch=0)
    assert step.measured_abstention == pytest.approx(0.75)


def test_constant_controller_is_identity():
    controller = constant_alpha_controller(0.05)
    assert isinstance(controller, ConstantAlphaController)
    assert controller.observe_batch(np.full(8, 9.0), tau=1.0, epoch=3) is None
    assert controller.alpha == 0.05
    assert controller.mode == 'constant'


def test_alpha_is_steady_at_the_setpoint():
    controller = PidController(PidConfig(window_batches=6, setpoint=0.3), initial_alpha=0.7)
    sigmas = np.array([2.0] * 3 + [0.5] * 7)
    steps = [controller.observe_batch(sigmas, tau=1.0, epoch=0) for _ in range(18)]

    fired = [s for s in steps if s is not None]
    assert len(fired) == 3
    assert all(s.measured_abstention == pytest.approx(0.3) for s in fired)
    assert controller.alpha == pytest.approx(0.7, abs=1e-12)
