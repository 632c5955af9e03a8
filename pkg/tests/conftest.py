"""
Fixtures compartilhadas e a opção --runslow para os experimentos longos.
"""
import numpy as np
import pytest

from src.config import DataConfig
from src.synthdata.experiments import DataSplits, make_1d_dataset
from src.training.trainer import TrainConfig


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='roda os experimentos marcados como slow')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: experimento completo (minutos)')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='use --runslow para rodar')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def oned_splits():
    """Reta + nuvem reduzida: 600/200/200."""
    full = make_1d_dataset(1000, seed=3)
    parts = {}
    for name, (start, stop) in zip(('train', 'val', 'test'), ((0, 600), (600, 800), (800, 1000))):
        part = full.subset(np.arange(start, stop))
        part.split = name
        parts[name] = part
    return DataSplits(**parts)


@pytest.fixture
def small_data_config():
    """Grade reduzida para testes rápidos do gerador climático."""
    return DataConfig(kind='enso', n_train=120, n_val=60, n_test=60, n_lon=12, n_lat=5,
                      length_scale_km=2500.0, seed=5)


@pytest.fixture
def fast_train_config():
    """CAN pequena e curta sobre os dados 1D."""
    return TrainConfig(hidden_widths=(5, 5), n_spin=5, max_epochs=20, patience=50,
                       batch_size=32, learning_rate=0.005, alpha_mode='constant',
                       alpha=0.1, seed=0)

