"""
Treinamento em dois estágios (spin-up com NLL, depois perda de abstenção),
parada antecipada e seleção do melhor modelo restrita ao setpoint.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import (AbstentionError, ConfigurationError, DomainError,
                        EnsembleMemberError, SetpointUnreachableError,
                        TrainingDivergedError)
from src.model.losses import AbstentionParams, LossKind, batch_gradients, batch_loss
from src.model.net import MlpModel, backward, forward
from src.model.optimizer import OptimizerState, optimizer_step
from src.synthdata.experiments import DataSplits, Dataset, derive_seed
from src.training.controller import (AlphaController, ControlStep, PidConfig,
                                     PidController, constant_alpha_controller,
                                     measure_abstention)

logger = logging.getLogger(__name__)

PERCENTILE_LEVELS = tuple(range(10, 100, 10))
KAPPA_PERCENTILE = 90


class Stage(str, Enum):
    """Estágio do treinamento."""
    BASELINE = 'baseline'
    SPINUP = 'spinup'
    ABSTENTION = 'abstention'


@dataclass(frozen=True)
class TrainConfig:
    """Hiperparâmetros de uma execução de treinamento."""
    hidden_widths: Tuple[int, ...] = (50, 25)
    n_spin: int = 15
    max_epochs: int = 500
    patience: int = 60
    batch_size: int = 32
    learning_rate: float = 0.0005
    loss_kind: LossKind = LossKind.ABSTENTION
    alpha_mode: str = 'constant'
    alpha: float = 0.1
    pid: PidConfig = field(default_factory=PidConfig)
    coverage_setpoint_percent: Optional[int] = None
    l2_first_layer: float = 0.0
    eligibility_band: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'loss_kind', LossKind(self.loss_kind))
        object.__setattr__(self, 'hidden_widths', tuple(self.hidden_widths))
        if isinstance(self.pid, dict):
            object.__setattr__(self, 'pid', PidConfig(**self.pid))
        self.validate()

    def validate(self):
        """Verifica as invariantes da configuração."""
        if min(self.max_epochs, self.patience, self.batch_size) < 1:
            raise ConfigurationError('max_epochs, patience e batch_size devem ser >= 1')
        if not self.learning_rate > 0:
            raise ConfigurationError('learning_rate deve ser positivo')
        if self.alpha_mode not in ('constant', 'pid'):
            raise ConfigurationError(f'alpha_mode desconhecido: {self.alpha_mode}')
        if self.loss_kind is LossKind.ABSTENTION:
            if not 1 <= self.n_spin < self.max_epochs:
                raise ConfigurationError(
                    f'Exige-se 1 <= n_spin < max_epochs (n_spin={self.n_spin}, '
                    f'max_epochs={self.max_epochs})'
                )
            if self.alpha_mode == 'pid':
                m = self.coverage_setpoint_percent
                if m is None or m % 10 != 0 or not 10 <= m <= 90:
                    raise ConfigurationError(
                        f'Modo pid exige coverage_setpoint_percent em {{10, 20, …, 90}} (recebido {m})'
                    )
            elif self.alpha < 0:
                raise ConfigurationError('alpha deve ser >= 0')

    @property
    def abstention_setpoint(self) -> Optional[float]:
        """Fração de abstenção alvo (1 − m/100) no modo pid."""
        if self.coverage_setpoint_percent is None:
            return None
        return round(1.0 - self.coverage_setpoint_percent / 100.0, 10)

    def pid_config(self) -> PidConfig:
        return replace(self.pid, setpoint=self.abstention_setpoint)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['loss_kind'] = self.loss_kind.value
        data['hidden_widths'] = list(self.hidden_widths)
        return data


@dataclass
class AbstentionState:
    """κ, τ, percentis de σ na validação e o controlador de α."""
    kappa: float
    tau: float
    percentiles: Dict[int, float]
    controller: AlphaController
    stage: Stage = Stage.ABSTENTION

    @property
    def alpha(self) -> float:
        return self.controller.alpha

    def params(self) -> AbstentionParams:
        return AbstentionParams(alpha=self.controller.alpha, kappa=self.kappa)

    def to_dict(self) -> Dict:
        return {
            'kappa': self.kappa,
            'tau': self.tau,
            'percentiles': {str(m): v for m, v in self.percentiles.items()},
            'alpha_mode': self.controller.mode,
            'alpha': self.controller.alpha,
            'stage': self.stage.value
        }


@dataclass(frozen=True)
class EpochRecord:
    """Métricas de uma época."""
    epoch: int
    stage: str
    train_loss: float
    val_loss: float
    val_abstention: float
    alpha: float
    kappa: float = float('nan')
    tau: float = float('nan')
    eligible: bool = True


@dataclass
class RunRecord:
    """Resultado de uma execução: melhor checkpoint, histórico e estado de abstenção."""
    name: str
    tag: str
    seed: int
    model: MlpModel
    final_model: MlpModel
    history: List[EpochRecord]
    best_epoch: int
    best_val_loss: float
    abstention: Optional[AbstentionState] = None
    control_steps: List[ControlStep] = field(default_factory=list)
    val_abstention: Optional[float] = None
    config_hash: str = ''
    duration_s: float = 0.0
    paths: Dict[str, str] = field(default_factory=dict)

    @property
    def realized_coverage(self) -> Optional[float]:
        """Cobertura na validação do checkpoint escolhido."""
        return None if self.val_abstention is None else 1.0 - self.val_abstention

    def history_frame(self) -> pd.DataFrame:
        columns = ['epoch', 'stage', 'train_loss', 'val_loss', 'val_abstention', 'alpha']
        return pd.DataFrame([asdict(r) for r in self.history], columns=columns + [
            'kappa', 'tau', 'eligible'])[columns]

    def control_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(s) for s in self.control_steps],
                            columns=['epoch', 'window', 'measured_abstention',
                                     'error', 'delta_alpha', 'alpha'])


def percentile(values: Sequence[float], m: float) -> float:
    """
    Percentil com interpolação linear entre estatísticas de ordem (extremos inclusivos).

    Args:
        values: Valores (não vazio)
        m: Percentual em (0, 100)

    Returns:
        P_m
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DomainError('percentile exige pelo menos um valor')
    if not 0 < m < 100:
        raise DomainError(f'm deve estar em (0, 100) (recebido {m})')
    return float(np.percentile(values, m))


class Trainer:
    """Executa o protocolo de treinamento de uma configuração."""

    def __init__(self, cfg: TrainConfig, name: str = 'run', tag: str = ''):
        self.cfg = cfg
        self.name = name
        self.tag = tag or cfg.loss_kind.value
        self.optimizer: Optional[OptimizerState] = None
        self.history: List[EpochRecord] = []

    def build_model(self, n_features: int) -> MlpModel:
        """Rede inicializada pela semente da execução."""
        return MlpModel.build(
            n_features, self.cfg.hidden_widths,
            distributional=self.cfg.loss_kind is not LossKind.MAE,
            l2_first_layer=self.cfg.l2_first_layer,
            seed=self.cfg.seed
        )

    def _batches(self, n: int, epoch: int) -> List[np.ndarray]:
        # Embaralhamento por época derivado da semente da execução
        order = np.random.default_rng(derive_seed(self.cfg.seed, 7, epoch)).permutation(n)
        return [order[i:i + self.cfg.batch_size] for i in range(0, n, self.cfg.batch_size)]

    def _ensure_optimizer(self, model: MlpModel):
        if self.optimizer is None:
            self.optimizer = OptimizerState.for_model(model, self.cfg.learning_rate)

    def _train_epoch(self, model: MlpModel, data: Dataset, epoch: int, kind: LossKind,
                     state: Optional[AbstentionState] = None,
                     control_log: Optional[List[ControlStep]] = None) -> float:
        total = 0.0
        for index in self._batches(len(data), epoch):
            xb, yb = data.x[index], data.y[index]
            pred = forward(model, xb)
            params = state.params() if state is not None else None
            total += batch_loss(kind, yb, pred, params) * len(index)

            grads = backward(model, xb, batch_gradients(kind, yb, pred, params))
            optimizer_step(self.optimizer, model, grads)

            if state is not None:
                step = state.controller.observe_batch(pred.sigma, state.tau, epoch)
                if step is not None and control_log is not None:
                    control_log.append(step)

        train_loss = total / len(data) + model.l2_penalty()
        if not np.isfinite(train_loss):
            raise TrainingDivergedError(f'Perda de treino não finita na época {epoch}')
        return train_loss

    def _validate(self, model: MlpModel, data: Dataset, kind: LossKind,
                  state: Optional[AbstentionState] = None) -> Tuple[float, float]:
        pred = forward(model, data.x)
        params = state.params() if state is not None else None
        loss = batch_loss(kind, data.y, pred, params) + model.l2_penalty()
        abstention = measure_abstention(pred.sigma, state.tau) if state is not None else float('nan')
        return loss, abstention

    def run_spinup(self, model: MlpModel, data: DataSplits) -> Tuple[MlpModel, AbstentionState]:
        """
        Estágio de spin-up: n_spin épocas com NLL gaussiana; ao final fixa κ e τ
        a partir dos percentis de σ na validação.

        Args:
            model: Rede recém-inicializada
            data: Partições

        Returns:
            Tupla (modelo, AbstentionState)
        """
        cfg = self.cfg
        if cfg.loss_kind is not LossKind.ABSTENTION:
            raise ConfigurationError('run_spinup exige loss_kind = abstention')
        self._ensure_optimizer(model)

        for epoch in range(cfg.n_spin):
            train_loss = self._train_epoch(model, data.train, epoch, LossKind.GAUSSIAN_NLL)
            val_loss, _ = self._validate(model, data.val, LossKind.GAUSSIAN_NLL)
            self.history.append(EpochRecord(epoch, Stage.SPINUP.value, train_loss, val_loss,
                                            float('nan'), 0.0, eligible=False))
            logger.debug('[%s] spin-up época %d: treino %.4f, validação %.4f',
                         self.name, epoch, train_loss, val_loss)

        sigma = forward(model, data.val.x).sigma
        if not np.all(np.isfinite(sigma)):
            raise TrainingDivergedError('σ de validação não finito ao fim do spin-up')

        percentiles = {m: percentile(sigma, m) for m in PERCENTILE_LEVELS}
        kappa = percentiles[KAPPA_PERCENTILE]
        if cfg.alpha_mode == 'pid':
            tau = percentiles[cfg.coverage_setpoint_percent]
            controller = PidController(cfg.pid_config(), initial_alpha=0.0)
        else:
            tau = kappa
            controller = constant_alpha_controller(cfg.alpha)

        state = AbstentionState(kappa=kappa, tau=tau, percentiles=percentiles,
                                controller=controller)
        logger.info('[%s] Fim do spin-up: κ=%.4f, τ=%.4f, α inicial=%.3f (%s)',
                    self.name, kappa, tau, controller.alpha, controller.mode)
        return model, state

    def run_abstention_stage(self, model: MlpModel, state: AbstentionState,
                             data: DataSplits) -> RunRecord:
        """
        Estágio de abstenção com κ e τ congelados.

        A paciência conta todas as épocas; só épocas elegíveis (abstenção de
        validação a até `eligibility_band` do setpoint, no modo pid) disputam
        o melhor checkpoint.

        Args:
            model: Rede ao fim do spin-up
            state: Estado de abstenção congelado
            data: Partições

        Returns:
            RunRecord com o melhor checkpoint elegível
        """
        cfg = self.cfg
        self._ensure_optimizer(model)
        started = time.perf_counter()
        setpoint = cfg.abstention_setpoint if cfg.alpha_mode == 'pid' else None
        control_log: List[ControlStep] = []

        best_model, best_epoch, best_loss, best_abstention = None, -1, np.inf, None
        monitor_best, wait = np.inf, 0
        closest = None

        for epoch in range(cfg.n_spin, cfg.max_epochs):
            train_loss = self._train_epoch(model, data.train, epoch, LossKind.ABSTENTION,
                                           state, control_log)
            val_loss, val_abstention = self._validate(model, data.val, LossKind.ABSTENTION, state)

            eligible = (setpoint is None
                        or abs(val_abstention - setpoint) <= cfg.eligibility_band + 1e-12)
            self.history.append(EpochRecord(
                epoch, Stage.ABSTENTION.value, train_loss, val_loss, val_abstention,
                state.alpha, state.kappa, state.tau, eligible
            ))
            if setpoint is not None and (closest is None
                                         or abs(val_abstention - setpoint) < abs(closest - setpoint)):
                closest = val_abstention

            if eligible and val_loss < best_loss:
                best_model, best_epoch = model.copy(), epoch
                best_loss, best_abstention = val_loss, val_abstention

            if val_loss < monitor_best:
                monitor_best, wait = val_loss, 0
            else:
                wait += 1
                if wait >= cfg.patience:
                    logger.info('[%s] Parada antecipada na época %d (melhor elegível: %d)',
                                self.name, epoch, best_epoch)
                    break

        if best_model is None:
            raise SetpointUnreachableError(
                f'Nenhuma época com abstenção a até {cfg.eligibility_band} do setpoint '
                f'{setpoint}; mais próxima: {closest}',
                closest_fraction=closest
            )

        return RunRecord(
            name=self.name, tag=self.tag, seed=cfg.seed, model=best_model,
            final_model=model.copy(), history=list(self.history), best_epoch=best_epoch,
            best_val_loss=float(best_loss), abstention=state, control_steps=control_log,
            val_abstention=best_abstention, duration_s=time.perf_counter() - started
        )

    def run_baseline(self, model: MlpModel, data: DataSplits) -> RunRecord:
        """
        Treinamento em estágio único (NLL gaussiana ou MAE) com parada antecipada.

        Args:
            model: Rede recém-inicializada
            data: Partições

        Returns:
            RunRecord com o checkpoint de menor perda de validação
        """
        cfg = self.cfg
        kind = cfg.loss_kind
        if kind is LossKind.ABSTENTION:
            raise ConfigurationError('run_baseline exige loss_kind gaussian_nll ou mae')
        if (kind is LossKind.MAE) == model.distributional:
            raise ConfigurationError('MAE exige modelo de uma saída; NLL exige duas')
        self._ensure_optimizer(model)
        started = time.perf_counter()

        best_model, best_epoch, best_loss, wait = None, -1, np.inf, 0
        for epoch in range(cfg.max_epochs):
            train_loss = self._train_epoch(model, data.train, epoch, kind)
            val_loss, _ = self._validate(model, data.val, kind)
            self.history.append(EpochRecord(epoch, Stage.BASELINE.value, train_loss,
                                            val_loss, float('nan'), 0.0))
            if val_loss < best_loss:
                best_model, best_epoch, best_loss, wait = model.copy(), epoch, val_loss, 0
            else:
                wait += 1
                if wait >= cfg.patience:
                    logger.info('[%s] Parada antecipada na época %d (melhor: %d)',
                                self.name, epoch, best_epoch)
                    break

        if best_model is None:
            raise TrainingDivergedError('Nenhuma época com perda de validação finita')

        return RunRecord(
            name=self.name, tag=self.tag, seed=cfg.seed, model=best_model,
            final_model=model.copy(), history=list(self.history), best_epoch=best_epoch,
            best_val_loss=float(best_loss), duration_s=time.perf_counter() - started
        )

    def fit(self, data: DataSplits) -> RunRecord:
        """Cria a rede e executa o protocolo adequado à configuração."""
        started = time.perf_counter()
        model = self.build_model(data.train.n_features)
        if self.cfg.loss_kind is LossKind.ABSTENTION:
            model, state = self.run_spinup(model, data)
            record = self.run_abstention_stage(model, state, data)
        else:
            record = self.run_baseline(model, data)
        record.duration_s = time.perf_counter() - started
        logger.info('[%s] Concluído: melhor época %d, perda de validação %.4f',
                    self.name, record.best_epoch, record.best_val_loss)
        return record


def run_parallel(fn: Callable, tasks: Sequence[Tuple], jobs: int = 1,
                 initializer: Optional[Callable] = None, initargs: Tuple = ()) -> List:
    """
    Aplica `fn` a cada tupla de argumentos, em série ou num pool de processos.

    Args:
        fn: Função de nível de módulo (precisa ser serializável)
        tasks: Argumentos de cada chamada
        jobs: Processos em paralelo (1 roda no processo atual)
        initializer: Executado uma vez por processo antes das tarefas
        initargs: Argumentos do initializer

    Returns:
        Resultados na ordem das tarefas
    """
    if jobs <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(*task) for task in tasks]

    with ProcessPoolExecutor(max_workers=jobs, initializer=initializer,
                             initargs=initargs) as pool:
        futures = [pool.submit(fn, *task) for task in tasks]
        return [future.result() for future in futures]


def _fit_member(cfg: TrainConfig, data: DataSplits, name: str, tag: str,
                index: int) -> RunRecord:
    try:
        return Trainer(cfg, name=name, tag=tag).fit(data)
    except AbstentionError as exc:
        raise EnsembleMemberError(f'Execução {index} falhou: {exc}', run_index=index,
                                  cause=exc) from exc


def run_ensemble(cfg: TrainConfig, data: DataSplits, n_models: int,
                 jobs: int = 1, name: str = 'run', tag: str = '') -> List[RunRecord]:
    """
    Treina n_models redes que diferem apenas na semente (seed + índice).

    Args:
        cfg: Configuração base
        data: Partições
        n_models: Tamanho do ensemble
        jobs: Processos em paralelo
        name: Prefixo dos nomes das execuções
        tag: Rótulo do modelo (baseline, can, mae)

    Returns:
        RunRecords na ordem dos índices
    """
    if n_models < 1:
        raise ConfigurationError('n_models deve ser >= 1')

    tasks = [(replace(cfg, seed=cfg.seed + i), data, f'{name}_s{cfg.seed + i}', tag, i)
             for i in range(n_models)]
    return run_parallel(_fit_member, tasks, jobs)
