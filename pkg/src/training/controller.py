"""
Controlador PID discreto (forma de velocidade) que ajusta α durante o estágio de abstenção.
"""
import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from src.errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PidConfig:
    """Ganhos, janela de controle e limites de α."""
    kp: float = 1.0
    ki: float = 0.5
    kd: float = 0.0
    window_batches: int = 6
    alpha_min: float = 0.0
    alpha_max: float = 10.0
    setpoint: float = 0.5

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ConfigurationError('Ganhos do PID devem ser não negativos')
        if self.window_batches < 1:
            raise ConfigurationError('window_batches deve ser >= 1')
        if not 0.0 <= self.setpoint <= 1.0:
            raise ConfigurationError(f'setpoint fora de [0, 1]: {self.setpoint}')
        if not 0.0 <= self.alpha_min <= self.alpha_max:
            raise ConfigurationError('Exige-se 0 <= alpha_min <= alpha_max')


@dataclass(frozen=True)
class PidState:
    """α atual, histórico de erros e contadores da janela corrente."""
    alpha: float = 0.0
    e_prev: float = 0.0
    e_prev2: float = 0.0
    window_abstained: int = 0
    window_total: int = 0


@dataclass(frozen=True)
class ControlStep:
    """Registro de um passo de controle (uma janela completa)."""
    epoch: int
    window: int
    measured_abstention: float
    error: float
    delta_alpha: float
    alpha: float


def measure_abstention(sigmas: Sequence[float], tau: float) -> float:
    """
    Fração de amostras com σ > τ.

    Args:
        sigmas: σ previstos
        tau: Limiar de abstenção

    Returns:
        Fração em [0, 1]
    """
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if sigmas.size == 0:
        raise DomainError('measure_abstention exige pelo menos um σ')
    return float(np.mean(sigmas > tau))


def pid_update(state: PidState, cfg: PidConfig, measured_abstention: float) -> PidState:
    """
    Um passo do algoritmo de velocidade.

    e = medido − setpoint; abstenção acima do setpoint aumenta α.

    Args:
        state: Estado atual
        cfg: Configuração do PID
        measured_abstention: Fração de abstenção medida na janela

    Returns:
        Novo estado com α limitado e contadores zerados
    """
    error = measured_abstention - cfg.setpoint
    delta = (cfg.kp * (error - state.e_prev)
             + cfg.ki * error
             + cfg.kd * (error - 2.0 * state.e_prev + state.e_prev2))
    alpha = float(np.clip(state.alpha + delta, cfg.alpha_min, cfg.alpha_max))
    return PidState(alpha=alpha, e_prev=error, e_prev2=state.e_prev,
                    window_abstained=0, window_total=0)


class AlphaController:
    """
    Interface comum aos regimes de α: recebe os σ de cada lote e devolve
    um ControlStep sempre que uma janela se completa.
    """

    alpha: float

    def observe_batch(self, sigmas: np.ndarray, tau: float,
                      epoch: int) -> Optional[ControlStep]:
        raise NotImplementedError

    @property
    def mode(self) -> str:
        raise NotImplementedError


class PidController(AlphaController):
    """Controlador PID avaliado em janelas de `window_batches` lotes consecutivos."""

    def __init__(self, cfg: PidConfig, initial_alpha: float = 0.0):
        self.cfg = cfg
        self.state = PidState(alpha=float(np.clip(initial_alpha, cfg.alpha_min, cfg.alpha_max)))
        self.window_batches_seen = 0
        self.window_index = 0
        self.history: List[ControlStep] = []

    @property
    def alpha(self) -> float:
        return self.state.alpha

    @property
    def mode(self) -> str:
        return 'pid'

    def observe_batch(self, sigmas: np.ndarray, tau: float,
                      epoch: int) -> Optional[ControlStep]:
        """
        Acumula as decisões de abstenção do lote; fecha a janela a cada
        `window_batches` lotes. Janelas atravessam fronteiras de época.

        Args:
            sigmas: σ previstos no lote
            tau: Limiar de abstenção
            epoch: Época corrente (apenas para o registro)

        Returns:
            ControlStep se a janela foi fechada, senão None
        """
        sigmas = np.asarray(sigmas)
        self.state = replace(
            self.state,
            window_abstained=self.state.window_abstained + int(np.sum(sigmas > tau)),
            window_total=self.state.window_total + int(sigmas.size)
        )
        self.window_batches_seen += 1
        if self.window_batches_seen < self.cfg.window_batches:
            return None

        measured = self.state.window_abstained / self.state.window_total
        previous_alpha = self.state.alpha
        self.state = pid_update(self.state, self.cfg, measured)
        self.window_batches_seen = 0

        step = ControlStep(
            epoch=epoch,
            window=self.window_index,
            measured_abstention=measured,
            error=self.state.e_prev,
            delta_alpha=self.state.alpha - previous_alpha,
            alpha=self.state.alpha
        )
        self.window_index += 1
        self.history.append(step)
        logger.debug('Janela %d (época %d): abstenção %.3f, α %.4f',
                     step.window, epoch, measured, step.alpha)
        return step


class ConstantAlphaController(AlphaController):
    """Regime de α constante: a atualização é a identidade."""

    def __init__(self, alpha: float):
        if not alpha >= 0:
            raise ConfigurationError(f'alpha deve ser >= 0 (recebido {alpha})')
        self.alpha = float(alpha)

    @property
    def mode(self) -> str:
        return 'constant'

    def observe_batch(self, sigmas: np.ndarray, tau: float,
                      epoch: int) -> Optional[ControlStep]:
        return None


def constant_alpha_controller(alpha: float) -> ConstantAlphaController:
    """Cria o controlador de α fixo (1D: 0.1; ENSO: 0.1; entradas corrompidas: 0.05)."""
    return ConstantAlphaController(alpha)
