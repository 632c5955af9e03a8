import json
from dataclasses import replace

import pytest

from src.config import EXPERIMENTS, DataConfig, ExperimentConfig, default_config
from src.errors import ConfigurationError
from src.model.losses import LossKind


def test_save_and_load_round_trip(tmp_path):
    cfg = default_config('enso_l2', seed=4)
    loaded = ExperimentConfig.load(cfg.save(tmp_path / 'config.json'))

    assert loaded == cfg
    assert loaded.config_hash() == cfg.config_hash()
    assert json.loads((tmp_path / 'config.json').read_text())['config_hash'] == cfg.config_hash()


def test_hash_ignores_output_dir_only():
    cfg = default_config('oned')
    assert len(cfg.config_hash()) == 12
    assert replace(cfg, output_dir='elsewhere').config_hash() == cfg.config_hash()
    assert cfg.with_seed(1).config_hash() != cfg.config_hash()


def test_invalid_json_is_a_configuration_error(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text('{"experiment": "oned", "ensemble_size": ')
    with pytest.raises(ConfigurationError):
        ExperimentConfig.load(path)

    path.write_text('{"data": {"colour": 1}}')
    with pytest.raises(ConfigurationError):
        ExperimentConfig.load(path)


@pytest.mark.parametrize('experiment', EXPERIMENTS)
def test_default_configs_are_valid(experiment):
    cfg = default_config(experiment, seed=2)
    assert cfg.data.seed == 2 and cfg.train.seed == 2
    assert cfg.expand_runs()


def test_unknown_experiment():
    with pytest.raises(ConfigurationError):
        default_config('tropical')


@pytest.mark.parametrize('setpoints', [(0.0,), (1.0,), (0.15,)])
def test_setpoints_must_lie_on_the_grid(setpoints):
    with pytest.raises(ConfigurationError):
        ExperimentConfig(setpoints=setpoints)


def test_data_config_validation():
    for kind in ('ocean', 'climate'):
        with pytest.raises(ConfigurationError):
            DataConfig(kind=kind)
    with pytest.raises(ConfigurationError):
        DataConfig(n_val=0)


def test_expand_runs_in_constant_mode():
    cfg = replace(default_config('oned'), ensemble_size=2)
    runs = cfg.expand_runs()

    assert [r.name for r in runs] == ['baseline_s0', 'baseline_s1', 'can_s0', 'can_s1',
                                      'mae_s0', 'mae_s1']
    kinds = {r.tag: r.train.loss_kind for r in runs}
    assert kinds == {'baseline': LossKind.GAUSSIAN_NLL, 'can': LossKind.ABSTENTION,
                     'mae': LossKind.MAE}
    assert all(r.setpoint is None for r in runs)


def test_expand_runs_one_can_per_setpoint_in_pid_mode():
    cfg = replace(default_config('enso_pid', seed=3), ensemble_size=1, setpoints=(0.1, 0.7))
    runs = {r.name: r for r in cfg.expand_runs()}

    assert set(runs) == {'baseline_s3', 'can_sp10_s3', 'can_sp70_s3'}
    assert runs['can_sp10_s3'].train.coverage_setpoint_percent == 90
    assert runs['can_sp70_s3'].train.abstention_setpoint == pytest.approx(0.7)
    assert runs['baseline_s3'].train.loss_kind is LossKind.GAUSSIAN_NLL


def test_data_hash_tracks_only_the_data_section():
    cfg = default_config('oned')
    assert replace(cfg, train=replace(cfg.train, learning_rate=0.5)).data_hash() == cfg.data_hash()
    assert cfg.with_seed(3).data_hash() != cfg.data_hash()
