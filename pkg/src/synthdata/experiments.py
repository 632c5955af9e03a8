"""
Conjuntos de dados dos experimentos: oportunidades de previsão (ENSO),
entradas corrompidas e o exemplo 1D de reta + nuvem.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
import pandas as pd

from src.errors import DomainError
from src.synthdata.grid import GridSpec, build_correlation, sample_sst_fields
from src.synthdata.response import build_response, global_response

logger = logging.getLogger(__name__)

# Caixa ENSO padrão: Pacífico equatorial leste (graus leste, 0–360)
ENSO_BOX = {'lon': (190.0, 270.0), 'lat': (-12.0, 12.0)}
SPLITS = ('train', 'val', 'test')


class SampleFlag(str, Enum):
    """Proveniência de cada amostra."""
    SIGNAL = 'signal'
    SHUFFLED_NOISE = 'shuffled_noise'
    CORRUPTED = 'corrupted'
    CLEAN = 'clean'
    LINE = 'line'
    CLOUD = 'cloud'


@dataclass
class Dataset:
    """Entradas x, alvos y e marcações por amostra de uma partição."""
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    flags: np.ndarray = field(repr=False)
    split: str = 'train'
    seed: int = 0
    config_hash: str = ''
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim == 1:
            self.x = self.x.reshape(-1, 1)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.flags = np.asarray(self.flags, dtype=object)
        if not (len(self.x) == len(self.y) == len(self.flags)):
            raise DomainError('x, y e flags devem ter o mesmo número de amostras')

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def flag_fraction(self, flag: SampleFlag) -> float:
        """Fração de amostras com a marcação dada."""
        if len(self) == 0:
            return 0.0
        return float(np.mean(self.flags == SampleFlag(flag).value))

    def subset(self, index: np.ndarray) -> 'Dataset':
        return replace(self, x=self.x[index], y=self.y[index], flags=self.flags[index],
                       metadata=dict(self.metadata))

    def summary(self) -> pd.DataFrame:
        """Estatísticas descritivas de y por marcação."""
        df = pd.DataFrame({'y': self.y, 'flag': self.flags})
        stats = df.groupby('flag')['y'].describe()
        stats.insert(0, 'fraction', df['flag'].value_counts(normalize=True))
        return stats


@dataclass
class DataSplits:
    """Partições de treino, validação e teste."""
    train: Dataset
    val: Dataset
    test: Dataset

    def items(self) -> Iterator[Tuple[str, Dataset]]:
        for name in SPLITS:
            yield name, getattr(self, name)


def derive_seed(seed: int, *keys: int) -> int:
    """Semente derivada e estável para uma sub-tarefa."""
    return int(np.random.SeedSequence([int(seed), *keys]).generate_state(1)[0])


def _fraction_count(fraction: float, n: int) -> int:
    # ⌊fração·n⌋ tolerante ao arredondamento binário (0.3·8000 = 2400)
    return int(np.floor(fraction * n + 1e-9))


def enso_transform(dataset: Dataset, box_mask: np.ndarray, threshold: float = 0.5,
                   seed: Optional[int] = 0) -> Dataset:
    """
    Mantém as amostras com média na caixa ENSO acima do limiar e embaralha
    os y das demais entre si.

    Args:
        dataset: Partição de entrada
        box_mask: Máscara booleana dos pixels da caixa
        threshold: Limiar da média da caixa
        seed: Semente do embaralhamento

    Returns:
        Nova partição com flags `signal` / `shuffled_noise`
    """
    box_mask = np.asarray(box_mask, dtype=bool)
    if not box_mask.any():
        raise DomainError('Caixa ENSO sem nenhum ponto de grade')

    box_mean = dataset.x[:, box_mask].mean(axis=1)
    signal = box_mean > threshold
    noise_idx = np.flatnonzero(~signal)

    y = dataset.y.copy()
    rng = np.random.default_rng(seed)
    y[noise_idx] = y[rng.permutation(noise_idx)]

    flags = np.where(signal, SampleFlag.SIGNAL.value, SampleFlag.SHUFFLED_NOISE.value).astype(object)
    metadata = dict(dataset.metadata, signal_fraction=float(signal.mean()) if len(signal) else 0.0)
    return replace(dataset, y=y, flags=flags, metadata=metadata)


def corrupt_transform(dataset: Dataset, sample_fraction: float = 0.30,
                      pixel_fraction: float = 0.66, fill: float = -4.0,
                      seed: Optional[int] = 0) -> Dataset:
    """
    Corrompe uma fração das amostras preenchendo uma fração dos pixels com `fill`.

    Args:
        dataset: Partição de entrada
        sample_fraction: Fração de amostras corrompidas
        pixel_fraction: Fração de pixels sobrescritos por amostra corrompida
        fill: Valor de preenchimento
        seed: Semente

    Returns:
        Nova partição com flags `corrupted` / `clean`; y inalterado
    """
    for name, value in (('sample_fraction', sample_fraction), ('pixel_fraction', pixel_fraction)):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f'{name} fora de [0, 1]: {value}')

    rng = np.random.default_rng(seed)
    n, n_pixels = dataset.x.shape
    chosen = rng.choice(n, size=_fraction_count(sample_fraction, n), replace=False)
    n_fill = _fraction_count(pixel_fraction, n_pixels)

    x = dataset.x.copy()
    for i in np.sort(chosen):
        x[i, rng.choice(n_pixels, size=n_fill, replace=False)] = fill

    flags = np.full(n, SampleFlag.CLEAN.value, dtype=object)
    flags[chosen] = SampleFlag.CORRUPTED.value
    metadata = dict(dataset.metadata, corrupted_fraction=len(chosen) / n if n else 0.0)
    return replace(dataset, x=x, flags=flags, metadata=metadata)


def make_1d_dataset(n: int, seed: Optional[int] = 0, line_fraction: float = 0.3) -> Dataset:
    """
    Exemplo 1D: 30% das amostras sobre uma reta pouco ruidosa, 70% numa nuvem.

    Args:
        n: Número de amostras
        seed: Semente
        line_fraction: Fração de amostras da reta

    Returns:
        Dataset com x [n × 1] e flags `line` / `cloud`, em ordem embaralhada
    """
    if n < 1:
        raise DomainError('n deve ser >= 1')
    rng = np.random.default_rng(seed)
    n_line = int(round(line_fraction * n))
    n_cloud = n - n_line

    x_line = rng.normal(0.0, 0.5, n_line)
    y_line = 0.7 * x_line + 0.6 + rng.normal(0.0, 0.05, n_line)
    x_cloud = rng.normal(4.0, 0.25, n_cloud)
    y_cloud = 1.0 * x_cloud - 2.0 + rng.normal(0.0, 0.5, n_cloud)

    x = np.concatenate([x_line, x_cloud])
    y = np.concatenate([y_line, y_cloud])
    flags = np.array([SampleFlag.LINE.value] * n_line + [SampleFlag.CLOUD.value] * n_cloud,
                     dtype=object)

    order = rng.permutation(n)
    return Dataset(x=x[order].reshape(-1, 1), y=y[order], flags=flags[order], seed=seed or 0,
                   metadata={'line_fraction': n_line / n})


def _split(full: Dataset, sizes: Tuple[int, int, int], config_hash: str) -> DataSplits:
    bounds = np.cumsum((0,) + tuple(sizes))
    parts = {}
    for name, start, stop in zip(SPLITS, bounds[:-1], bounds[1:]):
        part = full.subset(np.arange(start, stop))
        parts[name] = replace(part, split=name, config_hash=config_hash)
    return DataSplits(**parts)


def generate_splits(data_cfg, config_hash: str = '') -> DataSplits:
    """
    Gera treino/validação/teste de um experimento a partir da configuração.

    Args:
        data_cfg: DataConfig (ver src.config)
        config_hash: Hash da configuração, gravado em cada partição

    Returns:
        DataSplits prontas para o treinamento
    """
    sizes = (data_cfg.n_train, data_cfg.n_val, data_cfg.n_test)
    total = sum(sizes)
    seed = data_cfg.seed

    if data_cfg.kind == 'oned':
        full = make_1d_dataset(total, seed=seed)
        return _split(full, sizes, config_hash)

    grid = GridSpec(data_cfg.n_lon, data_cfg.n_lat)
    corr = build_correlation(grid, data_cfg.length_scale_km, data_cfg.nugget)
    response = build_response(grid, corr, seed=derive_seed(seed, 1))
    x = sample_sst_fields(corr, total, seed=derive_seed(seed, 2))
    y = global_response(response, x)
    full = Dataset(x=x, y=y, flags=np.full(total, SampleFlag.CLEAN.value, dtype=object),
                   seed=seed, metadata={'grid': grid.to_dict()})
    splits = _split(full, sizes, config_hash)

    transformed = {}
    for i, (name, part) in enumerate(splits.items()):
        if data_cfg.kind == 'enso':
            mask = grid.box_mask(tuple(data_cfg.enso_lon), tuple(data_cfg.enso_lat))
            part = enso_transform(part, mask, data_cfg.enso_threshold,
                                  seed=derive_seed(seed, 3, i))
        elif data_cfg.kind == 'corrupt':
            part = corrupt_transform(part, data_cfg.corrupt_sample_fraction,
                                     data_cfg.corrupt_pixel_fraction, data_cfg.corrupt_fill,
                                     seed=derive_seed(seed, 4, i))
        transformed[name] = part
        logger.info('Partição %s: %d amostras, metadados %s', name, len(part),
                    {k: v for k, v in part.metadata.items() if k != 'grid'})
    return DataSplits(**transformed)
