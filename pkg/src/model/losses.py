"""
Funções de perda: log-verossimilhança negativa gaussiana, perda de abstenção e MAE.

Todas as funções são vetorizadas: y, μ e σ podem ser escalares ou arrays.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from src.errors import ConfigurationError, DomainError
from src.model.net import PredictionPair

ArrayLike = Union[float, np.ndarray]

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class LossKind(str, Enum):
    """Tipos de perda suportados."""
    GAUSSIAN_NLL = 'gaussian_nll'
    ABSTENTION = 'abstention'
    MAE = 'mae'


@dataclass(frozen=True)
class AbstentionParams:
    """α (peso da penalidade de abstenção) e κ (escala de σ)."""
    alpha: float
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise DomainError(f'kappa deve ser positivo (recebido {self.kappa})')
        if not self.alpha >= 0:
            raise DomainError(f'alpha deve ser >= 0 (recebido {self.alpha})')


def _check_sigma(sigma: ArrayLike) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(~(sigma > 0)):
        raise DomainError('sigma deve ser estritamente positivo')
    return sigma


def gaussian_nll(y: ArrayLike, mu: ArrayLike, sigma: ArrayLike) -> np.ndarray:
    """
    −log N(y; μ, σ) por amostra.

    Args:
        y: Alvo
        mu: Média prevista
        sigma: Desvio padrão previsto (> 0)

    Returns:
        ½log(2π) + log σ + (y−μ)²/(2σ²)
    """
    sigma = _check_sigma(sigma)
    residual = np.asarray(y, dtype=np.float64) - np.asarray(mu, dtype=np.float64)
    return HALF_LOG_2PI + np.log(sigma) + residual ** 2 / (2.0 * sigma ** 2)


def prediction_weight(sigma: ArrayLike, kappa: float) -> np.ndarray:
    """q = min(1, (κ/σ)²); vale exatamente 1 quando σ ≤ κ."""
    sigma = _check_sigma(sigma)
    if not kappa > 0:
        raise DomainError(f'kappa deve ser positivo (recebido {kappa})')
    return np.where(sigma <= kappa, 1.0, (kappa / sigma) ** 2)


def abstention_loss(y: ArrayLike, mu: ArrayLike, sigma: ArrayLike,
                    params: AbstentionParams) -> np.ndarray:
    """
    Perda de abstenção L = q·NLL − α·log q.

    Args:
        y: Alvo
        mu: Média prevista
        sigma: Desvio padrão previsto
        params: α e κ

    Returns:
        Perda por amostra; idêntica à NLL quando σ ≤ κ
    """
    q = prediction_weight(sigma, params.kappa)
    return q * gaussian_nll(y, mu, sigma) - params.alpha * np.log(q)


def mae_loss(y: ArrayLike, mu: ArrayLike) -> np.ndarray:
    """|y − μ| por amostra."""
    return np.abs(np.asarray(y, dtype=np.float64) - np.asarray(mu, dtype=np.float64))


def loss_gradients(kind: Union[LossKind, str], y: ArrayLike, mu: ArrayLike,
                   sigma: Optional[ArrayLike] = None,
                   params: Optional[AbstentionParams] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Derivadas analíticas (∂L/∂μ, ∂L/∂σ) por amostra.

    Args:
        kind: Tipo de perda
        y, mu, sigma: Alvo e previsão
        params: Obrigatório para a perda de abstenção

    Returns:
        Tupla (dμ, dσ); para MAE dσ é zero
    """
    try:
        kind = LossKind(kind)
    except ValueError:
        raise ConfigurationError(f'Tipo de perda desconhecido: {kind}') from None

    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)

    if kind is LossKind.MAE:
        d_mu = np.sign(mu - y)
        return d_mu, np.zeros_like(d_mu)

    sigma = _check_sigma(sigma)
    residual = y - mu
    nll_d_mu = -residual / sigma ** 2
    nll_d_sigma = 1.0 / sigma - residual ** 2 / sigma ** 3

    if kind is LossKind.GAUSSIAN_NLL:
        return nll_d_mu, nll_d_sigma

    if params is None:
        raise ConfigurationError('A perda de abstenção exige AbstentionParams')

    q = prediction_weight(sigma, params.kappa)
    nll = gaussian_nll(y, mu, sigma)
    # No ramo limitado (σ ≤ κ) dq/dσ = 0, inclusive na igualdade
    clamped = sigma <= params.kappa
    d_q = np.where(clamped, 0.0, -2.0 * q / sigma)
    d_sigma = d_q * nll + q * nll_d_sigma - params.alpha * d_q / q
    return q * nll_d_mu, d_sigma


def batch_loss(kind: Union[LossKind, str], y: np.ndarray, pred: PredictionPair,
               params: Optional[AbstentionParams] = None) -> float:
    """Perda média do lote."""
    kind = LossKind(kind)
    if kind is LossKind.MAE:
        return float(np.mean(mae_loss(y, pred.mu)))
    if pred.sigma is None:
        raise ConfigurationError(f'A perda {kind.value} exige um modelo com saída σ')
    if kind is LossKind.GAUSSIAN_NLL:
        return float(np.mean(gaussian_nll(y, pred.mu, pred.sigma)))
    if params is None:
        raise ConfigurationError('A perda de abstenção exige AbstentionParams')
    return float(np.mean(abstention_loss(y, pred.mu, pred.sigma, params)))


def batch_gradients(kind: Union[LossKind, str], y: np.ndarray, pred: PredictionPair,
                    params: Optional[AbstentionParams] = None) -> np.ndarray:
    """
    Gradientes da perda média do lote em relação a cada saída.

    Returns:
        [n × 2] com (∂L̄/∂μ_i, ∂L̄/∂σ_i), ou [n] para MAE
    """
    kind = LossKind(kind)
    n = len(pred)
    d_mu, d_sigma = loss_gradients(kind, y, pred.mu, pred.sigma, params)
    if kind is LossKind.MAE:
        return d_mu / n
    return np.column_stack([d_mu, d_sigma]) / n
