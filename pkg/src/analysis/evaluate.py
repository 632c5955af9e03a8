"""
Análise pós-treinamento: cobertura por limiar de σ, curvas de MAE × cobertura,
calibração por z-scores e envelopes de ensemble.
"""
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from src.errors import AlignmentError, DomainError
from src.model.net import PredictionPair

DEFAULT_COVERAGE_LEVELS = tuple(np.round(np.arange(0.05, 1.0001, 0.05), 2))
Z_RANGE = (-5.0, 5.0)
Z_BINS = 50


@dataclass
class CoverageCurve:
    """MAE sobre as amostras cobertas em cada nível de cobertura."""
    levels: np.ndarray
    mae: np.ndarray
    n_covered: np.ndarray
    tag: str = 'baseline'
    seed: int = 0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'coverage': self.levels,
            'mae': self.mae,
            'n_covered': self.n_covered,
            'tag': self.tag,
            'seed': self.seed
        })


@dataclass
class CalibrationStats:
    """Estatísticas dos erros padronizados z = (y − μ)/σ."""
    z: np.ndarray = field(repr=False)
    mean: float
    std: float
    edges: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    split: str = 'test'

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'bin_left': self.edges[:-1],
            'bin_right': self.edges[1:],
            'count': self.counts,
            'split': self.split
        })


@dataclass
class Envelope:
    """Mínimo, mediana e máximo por nível de cobertura."""
    levels: np.ndarray
    minimum: np.ndarray
    median: np.ndarray
    maximum: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'coverage': self.levels,
            'mae_min': self.minimum,
            'mae_median': self.median,
            'mae_max': self.maximum
        })


@dataclass(frozen=True)
class CanPoint:
    """Ponto (cobertura realizada, MAE) de uma CAN no conjunto de teste."""
    coverage: float
    mae: float
    n_covered: int
    tag: str
    seed: int
    setpoint: Optional[float] = None


def _sigma_of(preds: Union[PredictionPair, np.ndarray]) -> np.ndarray:
    sigma = preds.sigma if isinstance(preds, PredictionPair) else preds
    if sigma is None:
        raise DomainError('Previsões sem σ não permitem limiar de cobertura')
    return np.asarray(sigma, dtype=np.float64)


def covered_count(coverage: float, n: int) -> int:
    """⌈cobertura·n⌉, tolerante ao arredondamento binário."""
    return int(np.ceil(coverage * n - 1e-9))


def threshold_coverage(preds: Union[PredictionPair, np.ndarray], coverage: float) -> np.ndarray:
    """
    Índices das ⌈cobertura·n⌉ previsões de menor σ (empates pelo índice).

    Args:
        preds: PredictionPair ou vetor de σ
        coverage: Fração em (0, 1]

    Returns:
        Índices cobertos, em ordem crescente de σ
    """
    sigma = _sigma_of(preds)
    if sigma.size == 0:
        raise DomainError('Nenhuma previsão para cobrir')
    if not 0 < coverage <= 1:
        raise DomainError(f'coverage deve estar em (0, 1] (recebido {coverage})')
    order = np.argsort(sigma, kind='stable')
    return order[:covered_count(coverage, sigma.size)]


def tau_coverage(preds: Union[PredictionPair, np.ndarray], tau: float) -> np.ndarray:
    """Modo da CAN: cobre exatamente {i : σ_i ≤ τ}."""
    sigma = _sigma_of(preds)
    if sigma.size == 0:
        raise DomainError('Nenhuma previsão para cobrir')
    return np.flatnonzero(sigma <= tau)


def mae_at_coverage(preds: PredictionPair, y: np.ndarray,
                    levels: Sequence[float] = DEFAULT_COVERAGE_LEVELS,
                    tag: str = 'baseline', seed: int = 0) -> CoverageCurve:
    """
    Curva de MAE × cobertura.

    Para o modelo MAE (sem σ) a curva é plana: o MAE global em todos os níveis.

    Args:
        preds: Previsões
        y: Alvos
        levels: Níveis de cobertura
        tag: Rótulo do modelo
        seed: Semente da execução

    Returns:
        CoverageCurve; níveis sem amostra coberta ficam como NaN
    """
    levels = np.asarray(levels, dtype=np.float64)
    if levels.size == 0:
        raise DomainError('Informe pelo menos um nível de cobertura')
    if np.any(np.diff(levels) <= 0):
        raise DomainError('Níveis de cobertura devem ser estritamente crescentes')

    errors = np.abs(np.asarray(y, dtype=np.float64) - preds.mu)
    n = errors.size

    if not preds.has_sigma:
        return CoverageCurve(levels, np.full(levels.size, errors.mean()),
                             np.full(levels.size, n), tag, seed)

    order = np.argsort(preds.sigma, kind='stable')
    mae, counts = np.full(levels.size, np.nan), np.zeros(levels.size, dtype=int)
    for i, level in enumerate(levels):
        k = covered_count(level, n)
        counts[i] = k
        if k > 0:
            mae[i] = errors[order[:k]].mean()
    return CoverageCurve(levels, mae, counts, tag, seed)


def can_operating_point(preds: PredictionPair, y: np.ndarray, tau: float, tag: str = 'can',
                        seed: int = 0, setpoint: Optional[float] = None) -> CanPoint:
    """Cobertura realizada (σ ≤ τ) e MAE sobre as amostras cobertas."""
    covered = tau_coverage(preds, tau)
    errors = np.abs(np.asarray(y) - preds.mu)
    mae = float(errors[covered].mean()) if covered.size else float('nan')
    return CanPoint(coverage=covered.size / len(preds), mae=mae, n_covered=int(covered.size),
                    tag=tag, seed=seed, setpoint=setpoint)


def zscores(preds: PredictionPair, y: np.ndarray, split: str = 'test') -> CalibrationStats:
    """
    Erros padronizados e histograma de 50 classes em [−5, 5] com classes de transbordo.

    Args:
        preds: Previsões com σ > 0
        y: Alvos
        split: Partição avaliada

    Returns:
        CalibrationStats (desvio padrão populacional)
    """
    sigma = _sigma_of(preds)
    if np.any(~(sigma > 0)):
        raise DomainError('σ deve ser estritamente positivo')
    z = (np.asarray(y, dtype=np.float64) - preds.mu) / sigma

    inner = np.linspace(Z_RANGE[0], Z_RANGE[1], Z_BINS + 1)
    inner_counts, _ = np.histogram(z, bins=inner)
    counts = np.concatenate([[np.sum(z < Z_RANGE[0])], inner_counts, [np.sum(z > Z_RANGE[1])]])
    edges = np.concatenate([[-np.inf], inner, [np.inf]])

    return CalibrationStats(z=z, mean=float(z.mean()), std=float(z.std()),
                            edges=edges, counts=counts.astype(int), split=split)


def ensemble_envelope(curves: Sequence[CoverageCurve]) -> Envelope:
    """
    Mínimo, mediana e máximo ponto a ponto de várias curvas.

    Args:
        curves: Curvas com os mesmos níveis

    Returns:
        Envelope
    """
    if not curves:
        raise AlignmentError('Nenhuma curva para o envelope')
    levels = curves[0].levels
    for curve in curves[1:]:
        if curve.levels.shape != levels.shape or not np.allclose(curve.levels, levels):
            raise AlignmentError('Curvas com níveis de cobertura diferentes')

    stack = np.vstack([c.mae for c in curves])
    with warnings.catch_warnings():
        # Níveis sem nenhuma amostra coberta ficam NaN
        warnings.simplefilter('ignore', RuntimeWarning)
        return Envelope(levels.copy(), np.nanmin(stack, axis=0),
                        np.nanmedian(stack, axis=0), np.nanmax(stack, axis=0))


def coverage_mae_spearman(curve: CoverageCurve) -> float:
    """Correlação de Spearman entre cobertura e MAE (positiva quando o erro cai com a cobertura)."""
    valid = ~np.isnan(curve.mae)
    if valid.sum() < 2:
        return float('nan')
    rho, _ = stats.spearmanr(curve.levels[valid], curve.mae[valid])
    return float(rho)


def flag_enrichment(flags: np.ndarray, covered: np.ndarray, flag: str = 'signal') -> float:
    """
    Razão entre a fração de `flag` nas amostras cobertas e a taxa base.

    Returns:
        Razão (1 = sem enriquecimento); NaN se a taxa base é zero
    """
    flags = np.asarray(flags, dtype=object)
    base = np.mean(flags == flag)
    if base == 0 or covered.size == 0:
        return float('nan')
    return float(np.mean(flags[covered] == flag) / base)


def abstained_flag_fraction(flags: np.ndarray, covered: np.ndarray,
                            flag: str = 'corrupted') -> float:
    """Fração das amostras não cobertas que carregam `flag`."""
    flags = np.asarray(flags, dtype=object)
    abstained = np.ones(flags.size, dtype=bool)
    abstained[covered] = False
    if not abstained.any():
        return float('nan')
    return float(np.mean(flags[abstained] == flag))
