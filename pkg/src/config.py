"""
Configuração declarativa dos experimentos (arquivo JSON único e editável).
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from src.errors import ConfigurationError
from src.model.losses import LossKind
from src.training.controller import PidConfig
from src.training.trainer import TrainConfig

EXPERIMENTS = ('oned', 'enso_pid', 'enso_const', 'enso_l2', 'corrupt')
MODEL_TAGS = ('baseline', 'can', 'mae')
DEFAULT_SETPOINTS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
DATA_KINDS = ('oned', 'enso', 'corrupt')


def content_hash(content: Dict) -> str:
    """md5 (12 primeiros hex) do JSON canônico de um dicionário."""
    canonical = json.dumps(content, sort_keys=True, separators=(',', ':'))
    return hashlib.md5(canonical.encode('utf-8')).hexdigest()[:12]


@dataclass(frozen=True)
class DataConfig:
    """Parâmetros do gerador de dados."""
    kind: str = 'enso'
    n_train: int = 8000
    n_val: int = 5000
    n_test: int = 5000
    seed: int = 0
    n_lon: int = 60
    n_lat: int = 15
    length_scale_km: float = 2500.0
    nugget: float = 1e-6
    enso_lon: Tuple[float, float] = (190.0, 270.0)
    enso_lat: Tuple[float, float] = (-12.0, 12.0)
    enso_threshold: float = 0.5
    corrupt_sample_fraction: float = 0.30
    corrupt_pixel_fraction: float = 0.66
    corrupt_fill: float = -4.0

    def __post_init__(self):
        if self.kind not in DATA_KINDS:
            raise ConfigurationError(f'Tipo de dados desconhecido: {self.kind}')
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ConfigurationError('Todas as partições precisam de amostras')
        object.__setattr__(self, 'enso_lon', tuple(self.enso_lon))
        object.__setattr__(self, 'enso_lat', tuple(self.enso_lat))

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['enso_lon'] = list(self.enso_lon)
        data['enso_lat'] = list(self.enso_lat)
        return data


@dataclass(frozen=True)
class RunSpec:
    """Uma execução concreta derivada da configuração do experimento."""
    name: str
    tag: str
    train: TrainConfig
    setpoint: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Experimento completo: dados, treinamento, ensemble e saída."""
    experiment: str = 'enso_pid'
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    ensemble_size: int = 20
    models: Tuple[str, ...] = MODEL_TAGS
    setpoints: Tuple[float, ...] = DEFAULT_SETPOINTS
    output_dir: str = 'runs'

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f'Experimento desconhecido: {self.experiment}')
        if self.ensemble_size < 1:
            raise ConfigurationError('ensemble_size deve ser >= 1')
        unknown = set(self.models) - set(MODEL_TAGS)
        if unknown:
            raise ConfigurationError(f'Modelos desconhecidos: {sorted(unknown)}')
        for sp in self.setpoints:
            if not 0.0 < sp < 1.0 or abs(round(sp * 10) - sp * 10) > 1e-9:
                raise ConfigurationError(f'Setpoint fora da grade 0.1…0.9: {sp}')
        object.__setattr__(self, 'models', tuple(self.models))
        object.__setattr__(self, 'setpoints', tuple(self.setpoints))

    def to_dict(self) -> Dict:
        return {
            'experiment': self.experiment,
            'data': self.data.to_dict(),
            'train': self.train.to_dict(),
            'ensemble_size': self.ensemble_size,
            'models': list(self.models),
            'setpoints': list(self.setpoints),
            'output_dir': self.output_dir
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ExperimentConfig':
        data = dict(data)
        train = dict(data.get('train', {}))
        if 'pid' in train:
            train['pid'] = PidConfig(**train['pid'])
        return cls(
            experiment=data.get('experiment', 'enso_pid'),
            data=DataConfig(**data.get('data', {})),
            train=TrainConfig(**train),
            ensemble_size=data.get('ensemble_size', 20),
            models=tuple(data.get('models', MODEL_TAGS)),
            setpoints=tuple(data.get('setpoints', DEFAULT_SETPOINTS)),
            output_dir=data.get('output_dir', 'runs')
        )

    def config_hash(self) -> str:
        """md5 (12 primeiros hex) do JSON canônico, sem o diretório de saída."""
        return content_hash({k: v for k, v in self.to_dict().items() if k != 'output_dir'})

    def data_hash(self) -> str:
        """Hash só da seção de dados (identifica os arquivos gerados)."""
        return content_hash(self.data.to_dict())

    def save(self, path: Union[str, Path]) -> Path:
        """Grava o JSON editável; `config_hash` é informativo e ignorado na leitura."""
        path = Path(path)
        content = {**self.to_dict(), 'config_hash': self.config_hash()}
        path.write_text(json.dumps(content, indent=2, sort_keys=True))
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'ExperimentConfig':
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (TypeError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f'Configuração inválida em {path}: {exc}') from exc

    def with_seed(self, seed: int) -> 'ExperimentConfig':
        """Mesma configuração com a semente de dados e de treino trocadas."""
        return replace(self, data=replace(self.data, seed=seed),
                       train=replace(self.train, seed=seed))

    @property
    def alpha_mode(self) -> str:
        return self.train.alpha_mode

    def expand_runs(self) -> List[RunSpec]:
        """
        Lista as execuções do experimento: ensemble de cada modelo e, no modo
        pid, uma CAN por setpoint de abstenção.
        """
        runs = []
        for tag in self.models:
            if tag == 'can' and self.alpha_mode == 'pid':
                for sp in self.setpoints:
                    coverage = int(round((1.0 - sp) * 100))
                    cfg = replace(self.train, loss_kind=LossKind.ABSTENTION, alpha_mode='pid',
                                  coverage_setpoint_percent=coverage)
                    runs.extend(self._members(f'can_sp{int(round(sp * 100)):02d}', tag, cfg, sp))
                continue

            if tag == 'can':
                cfg = replace(self.train, loss_kind=LossKind.ABSTENTION, alpha_mode='constant',
                              coverage_setpoint_percent=None)
            elif tag == 'baseline':
                cfg = replace(self.train, loss_kind=LossKind.GAUSSIAN_NLL,
                              coverage_setpoint_percent=None)
            else:
                cfg = replace(self.train, loss_kind=LossKind.MAE, coverage_setpoint_percent=None)
            runs.extend(self._members(tag, tag, cfg, None))
        return runs

    def _members(self, prefix: str, tag: str, cfg: TrainConfig,
                 setpoint: Optional[float]) -> List[RunSpec]:
        return [
            RunSpec(name=f'{prefix}_s{cfg.seed + i}', tag=tag,
                    train=replace(cfg, seed=cfg.seed + i), setpoint=setpoint)
            for i in range(self.ensemble_size)
        ]


def default_config(experiment: str, seed: int = 0,
                   output_dir: Optional[str] = None) -> ExperimentConfig:
    """
    Configuração padrão de cada experimento.

    Args:
        experiment: oned, enso_pid, enso_const, enso_l2 ou corrupt
        seed: Semente de dados e treino
        output_dir: Diretório de saída (padrão runs/<experimento>)

    Returns:
        ExperimentConfig
    """
    if experiment not in EXPERIMENTS:
        raise ConfigurationError(f'Experimento desconhecido: {experiment}')
    output_dir = output_dir or f'runs/{experiment}'

    if experiment == 'oned':
        return ExperimentConfig(
            experiment=experiment,
            data=DataConfig(kind='oned', n_train=3000, n_val=1000, n_test=1000, seed=seed),
            train=TrainConfig(hidden_widths=(5, 5), n_spin=225, max_epochs=2000,
                              learning_rate=0.0001, loss_kind=LossKind.GAUSSIAN_NLL,
                              alpha_mode='constant', alpha=0.1, seed=seed),
            models=MODEL_TAGS, output_dir=output_dir
        )

    # O modelo-base é NLL; expand_runs troca a perda de cada execução
    climate = TrainConfig(hidden_widths=(50, 25), n_spin=15, max_epochs=500,
                          learning_rate=0.0005, loss_kind=LossKind.GAUSSIAN_NLL, seed=seed)
    if experiment == 'corrupt':
        return ExperimentConfig(
            experiment=experiment,
            data=DataConfig(kind='corrupt', seed=seed),
            train=replace(climate, alpha_mode='constant', alpha=0.05),
            models=MODEL_TAGS, output_dir=output_dir
        )
    if experiment == 'enso_const':
        return ExperimentConfig(
            experiment=experiment,
            data=DataConfig(kind='enso', seed=seed),
            train=replace(climate, alpha_mode='constant', alpha=0.1),
            models=('baseline', 'can'), output_dir=output_dir
        )

    l2 = 0.1 if experiment == 'enso_l2' else 0.0
    return ExperimentConfig(
        experiment=experiment,
        data=DataConfig(kind='enso', seed=seed),
        train=replace(climate, alpha_mode='pid', l2_first_layer=l2),
        models=('baseline', 'can'), output_dir=output_dir
    )
