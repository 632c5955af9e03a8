"""
Leitura e escrita dos arquivos de dados gerados.

Layout de um diretório de dados:
    metadata.json     hash da configuração, semente, grade e frações realizadas
    <split>.csv       sample, y, flag, config_hash
    <split>_x.npy     matriz de entradas em float64
"""
import json
import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd

from src.errors import MissingCheckpointError, OutputExistsError
from src.synthdata.experiments import SPLITS, DataSplits, Dataset

logger = logging.getLogger(__name__)

METADATA_FILE = 'metadata.json'


def save_splits(splits: DataSplits, directory: Union[str, Path], config_hash: str,
                generator: Dict, force: bool = False) -> Path:
    """
    Grava as três partições e os metadados.

    Args:
        splits: Partições geradas
        directory: Diretório de destino
        config_hash: Hash da configuração geradora
        generator: Seção de dados da configuração (gravada nos metadados)
        force: Sobrescreve arquivos existentes

    Returns:
        Caminho do diretório
    """
    directory = Path(directory)
    if (directory / METADATA_FILE).exists() and not force:
        raise OutputExistsError(f'Dados já existem em {directory}; use --force',
                                path=str(directory))
    directory.mkdir(parents=True, exist_ok=True)

    metadata = {
        'config_hash': config_hash,
        'generator': generator,
        'splits': {}
    }
    for name, part in splits.items():
        np.save(directory / f'{name}_x.npy', part.x)
        table = pd.DataFrame({
            'sample': np.arange(len(part)),
            'y': part.y,
            'flag': part.flags,
            'config_hash': config_hash
        })
        table.to_csv(directory / f'{name}.csv', index=False)
        metadata['splits'][name] = {
            'n_samples': len(part),
            'seed': part.seed,
            'flag_fractions': {
                flag: float(frac) for flag, frac in
                pd.Series(part.flags).value_counts(normalize=True).sort_index().items()
            },
            **{k: v for k, v in part.metadata.items()}
        }

    (directory / METADATA_FILE).write_text(json.dumps(metadata, indent=2, sort_keys=True))
    logger.info('Dados gravados em %s', directory)
    return directory


def read_metadata(directory: Union[str, Path]) -> Dict:
    """Conteúdo de metadata.json; MissingCheckpointError se os dados não existem."""
    path = Path(directory) / METADATA_FILE
    if not path.exists():
        raise MissingCheckpointError(f'Dados não encontrados em {directory}; rode generate',
                                     path=str(directory))
    return json.loads(path.read_text())


def load_split(directory: Union[str, Path], name: str) -> Dataset:
    """Lê uma partição gravada por save_splits."""
    directory = Path(directory)
    csv_path = directory / f'{name}.csv'
    if not csv_path.exists():
        raise MissingCheckpointError(f'Partição {name} não encontrada em {directory}',
                                     path=str(csv_path))
    table = pd.read_csv(csv_path, float_precision='round_trip')
    metadata = read_metadata(directory)
    split_meta = metadata['splits'].get(name, {})
    return Dataset(
        x=np.load(directory / f'{name}_x.npy'),
        y=table['y'].to_numpy(),
        flags=table['flag'].to_numpy(dtype=object),
        split=name,
        seed=split_meta.get('seed', 0),
        config_hash=metadata['config_hash'],
        metadata={k: v for k, v in split_meta.items() if k not in ('n_samples', 'seed')}
    )


def load_splits(directory: Union[str, Path]) -> DataSplits:
    """Lê treino, validação e teste."""
    return DataSplits(**{name: load_split(directory, name) for name in SPLITS})


def describe(directory: Union[str, Path]) -> pd.DataFrame:
    """
    Estatísticas resumidas de cada partição (usado por `describe` na CLI).

    Returns:
        DataFrame com uma linha por (partição, marcação)
    """
    frames = []
    for name, part in load_splits(directory).items():
        stats = part.summary()
        stats.insert(0, 'split', name)
        stats['x_mean'] = float(part.x.mean())
        stats['x_std'] = float(part.x.std())
        frames.append(stats.reset_index())
    return pd.concat(frames, ignore_index=True)
