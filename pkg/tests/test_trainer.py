from dataclasses import replace

import numpy as np
import pytest

from src.errors import (ConfigurationError, DomainError, EnsembleMemberError,
                        SetpointUnreachableError)
from src.model.losses import LossKind
from src.model.net import forward
from src.training.trainer import (PERCENTILE_LEVELS, Stage, Trainer, TrainConfig, percentile,
                                  run_ensemble, run_parallel)


@pytest.mark.parametrize('values, m, expected', [
    ([1, 2, 3, 4, 5], 50, 3.0),
    ([1, 2, 3, 4, 5], 90, 4.6),
    ([2.5] * 7, 30, 2.5),
])
def test_percentile(values, m, expected):
    assert percentile(values, m) == pytest.approx(expected)


def test_percentile_rejects_empty():
    with pytest.raises(DomainError):
        percentile([], 50)


def test_spinup_must_fit_inside_max_epochs():
    with pytest.raises(ConfigurationError):
        TrainConfig(n_spin=10, max_epochs=10)
    with pytest.raises(ConfigurationError):
        TrainConfig(n_spin=0)


def test_pid_mode_requires_coverage_multiple_of_ten():
    with pytest.raises(ConfigurationError):
        TrainConfig(alpha_mode='pid')
    with pytest.raises(ConfigurationError):
        TrainConfig(alpha_mode='pid', coverage_setpoint_percent=75)
    cfg = TrainConfig(alpha_mode='pid', coverage_setpoint_percent=80)
    assert cfg.abstention_setpoint == pytest.approx(0.2)
    assert cfg.pid_config().setpoint == pytest.approx(0.2)


def test_spinup_freezes_kappa_and_tau_from_validation_sigma(oned_splits, fast_train_config):
    cfg = replace(fast_train_config, alpha_mode='pid', coverage_setpoint_percent=80)
    trainer = Trainer(cfg, name='spin')
    model, state = trainer.run_spinup(trainer.build_model(1), oned_splits)

    sigma = forward(model, oned_splits.val.x).sigma
    assert sorted(state.percentiles) == list(PERCENTILE_LEVELS)
    assert state.kappa == pytest.approx(np.percentile(sigma, 90))
    assert state.tau == pytest.approx(np.percentile(sigma, 80))
    assert state.alpha == 0.0
    assert state.controller.mode == 'pid'

    assert len(trainer.history) == cfg.n_spin
    assert all(r.stage == Stage.SPINUP.value and r.alpha == 0.0 for r in trainer.history)


def test_constant_mode_uses_kappa_as_tau(oned_splits, fast_train_config):
    trainer = Trainer(fast_train_config)
    _, state = trainer.run_spinup(trainer.build_model(1), oned_splits)
    assert state.tau == state.kappa
    assert state.alpha == pytest.approx(0.1)


def test_spinup_matches_baseline_training(oned_splits, fast_train_config):
    trainer = Trainer(fast_train_config)
    spun, _ = trainer.run_spinup(trainer.build_model(1), oned_splits)

    baseline_cfg = replace(fast_train_config, loss_kind=LossKind.GAUSSIAN_NLL,
                           max_epochs=fast_train_config.n_spin)
    baseline = Trainer(baseline_cfg)
    record = baseline.run_baseline(baseline.build_model(1), oned_splits)

    for a, b in zip(spun.parameters(), record.final_model.parameters()):
        np.testing.assert_array_equal(a, b)


def test_constant_alpha_fit(oned_splits, fast_train_config):
    record = Trainer(fast_train_config, name='can_s0', tag='can').fit(oned_splits)

    assert record.tag == 'can'
    assert fast_train_config.n_spin <= record.best_epoch < fast_train_config.max_epochs
    assert len(record.history) == fast_train_config.max_epochs
    assert 0.0 <= record.val_abstention <= 1.0
    assert record.realized_coverage == pytest.approx(1.0 - record.val_abstention)
    assert record.control_steps == []

    frame = record.history_frame()
    assert list(frame.columns) == ['epoch', 'stage', 'train_loss', 'val_loss',
                                   'val_abstention', 'alpha']
    assert frame['stage'].tolist()[:fast_train_config.n_spin] == ['spinup'] * fast_train_config.n_spin
    assert np.isnan(frame['val_abstention'].iloc[0])


def test_pid_fit_records_control_steps(oned_splits, fast_train_config):
    cfg = replace(fast_train_config, alpha_mode='pid', coverage_setpoint_percent=70,
                  eligibility_band=1.0)
    record = Trainer(cfg).fit(oned_splits)

    # 19 lotes por época, janela de 6 lotes
    n_batches = (cfg.max_epochs - cfg.n_spin) * int(np.ceil(600 / cfg.batch_size))
    assert len(record.control_steps) == n_batches // 6
    assert record.control_frame()['window'].tolist() == list(range(n_batches // 6))
    assert record.abstention.tau == pytest.approx(record.abstention.percentiles[70])


def test_setpoint_unreachable_names_closest_fraction(oned_splits, fast_train_config, monkeypatch):
    monkeypatch.setattr('src.training.trainer.measure_abstention', lambda sigmas, tau: 0.0)
    cfg = replace(fast_train_config, alpha_mode='pid', coverage_setpoint_percent=50)

    with pytest.raises(SetpointUnreachableError) as info:
        Trainer(cfg).fit(oned_splits)
    assert info.value.closest_fraction == 0.0


def test_only_eligible_epochs_compete(oned_splits, fast_train_config, monkeypatch):
    fractions = iter([0.9] * 10 + [0.5] * 100)
    monkeypatch.setattr('src.training.trainer.measure_abstention',
                        lambda sigmas, tau: next(fractions))
    cfg = replace(fast_train_config, alpha_mode='pid', coverage_setpoint_percent=50)

    record = Trainer(cfg).fit(oned_splits)

    eligible = [r.epoch for r in record.history if r.eligible]
    assert eligible[0] == cfg.n_spin + 10
    assert record.best_epoch in eligible


def test_mae_baseline_has_single_output(oned_splits, fast_train_config):
    cfg = replace(fast_train_config, loss_kind=LossKind.MAE, max_epochs=5)
    record = Trainer(cfg, tag='mae').fit(oned_splits)

    assert not record.model.distributional
    assert record.abstention is None
    assert all(r.stage == Stage.BASELINE.value for r in record.history)


def test_ensemble_singleton_and_determinism(oned_splits, fast_train_config):
    cfg = replace(fast_train_config, max_epochs=8)
    first = run_ensemble(cfg, oned_splits, n_models=1, tag='can')
    second = run_ensemble(cfg, oned_splits, n_models=1, tag='can')

    assert len(first) == 1
    assert first[0].name == 'run_s0'
    assert first[0].history_frame().equals(second[0].history_frame())
    for a, b in zip(first[0].model.parameters(), second[0].model.parameters()):
        np.testing.assert_array_equal(a, b)


def test_ensemble_members_differ_by_seed(oned_splits, fast_train_config):
    records = run_ensemble(replace(fast_train_config, max_epochs=7), oned_splits, n_models=2)
    assert [r.seed for r in records] == [0, 1]
    assert not np.array_equal(records[0].model.weights[0], records[1].model.weights[0])


def test_ensemble_member_failure_carries_index(oned_splits, fast_train_config, monkeypatch):
    monkeypatch.setattr('src.training.trainer.measure_abstention', lambda sigmas, tau: 0.0)
    cfg = replace(fast_train_config, alpha_mode='pid', coverage_setpoint_percent=50)

    with pytest.raises(EnsembleMemberError) as info:
        run_ensemble(cfg, oned_splits, n_models=2)
    assert info.value.run_index == 0
    assert info.value.to_dict()['cause']['error'] == 'SetpointUnreachableError'


def _scripted_validation(monkeypatch, values):
    values = iter(values)
    monkeypatch.setattr(Trainer, '_validate',
                        lambda self, model, data, kind, state=None: next(values))


def test_patience_restarts_at_the_abstention_stage(oned_splits, fast_train_config, monkeypatch):
    cfg = replace(fast_train_config, alpha_mode='pid', coverage_setpoint_percent=50, patience=3)
    spinup = [(loss, float('nan')) for loss in (0.5, 0.4, 0.3, 0.2, 0.1)]
    # (perda, abstenção): a época de menor perda está fora da faixa do setpoint
    stage = [(5.0, 0.5), (2.0, 0.9), (4.0, 0.5), (3.0, 0.55), (3.5, 0.5), (1.0, 0.5)]
    _scripted_validation(monkeypatch, spinup + stage)

    record = Trainer(cfg).fit(oned_splits)

    abstention = [r for r in record.history if r.stage == Stage.ABSTENTION.value]
    assert [r.epoch for r in abstention] == list(range(cfg.n_spin, cfg.n_spin + 5))
    assert record.best_epoch == cfg.n_spin + 3
    assert record.best_val_loss == min(r.val_loss for r in abstention if r.eligible) == 3.0
    assert not abstention[1].eligible


def test_kappa_and_tau_stay_frozen_during_abstention(oned_splits, fast_train_config):
    cfg = replace(fast_train_config, alpha_mode='pid', coverage_setpoint_percent=70, patience=4)
    record = Trainer(cfg).fit(oned_splits)

    abstention = [r for r in record.history if r.stage == Stage.ABSTENTION.value]
    assert abstention
    assert {r.kappa for r in abstention} == {record.abstention.kappa}
    assert {r.tau for r in abstention} == {record.abstention.tau}
    if len(record.history) < cfg.max_epochs:
        # Parada antecipada: as últimas `patience` épocas não melhoraram a perda monitorada
        best = min(r.val_loss for r in abstention[:-cfg.patience])
        assert all(r.val_loss >= best for r in abstention[-cfg.patience:])


@pytest.mark.parametrize('jobs', [1, 2])
def test_run_parallel_keeps_task_order(jobs):
    tasks = [(17, 5), (9, 4), (3, 7)]
    assert run_parallel(divmod, tasks, jobs=jobs) == [(3, 2), (2, 1), (0, 3)]


def test_run_parallel_initializes_serial_runs():
    calls = []
    run_parallel(divmod, [(4, 2)], initializer=calls.append, initargs=('splits',))
    assert calls == ['splits']
