"""
Resposta global como soma de funções lineares por partes em cada ponto de grade.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.errors import DomainError
from src.synthdata.grid import CorrelationModel, GridSpec, correlated_normal

DEFAULT_BREAKPOINTS = (-1.2, -0.4, 0.4, 1.2)
EVAL_CHUNK = 1000


@dataclass
class PiecewiseLinearField:
    """
    F_g contínua com 5 segmentos e F_g(0) = 0 em cada pixel g.

    `slopes` tem formato [n_points × 5]; o segmento k cobre
    [breakpoints[k-1], breakpoints[k]] com extremos abertos em ±∞.
    """
    breakpoints: np.ndarray
    slopes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=np.float64)
        self.slopes = np.asarray(self.slopes, dtype=np.float64)
        if self.slopes.shape[1] != len(self.breakpoints) + 1:
            raise DomainError('Número de inclinações deve ser o de breakpoints + 1')
        if np.any(np.diff(self.breakpoints) <= 0):
            raise DomainError('Breakpoints devem ser estritamente crescentes')

    @property
    def segment_bounds(self):
        """Limites inferior e superior de cada segmento."""
        lower = np.concatenate([[-np.inf], self.breakpoints])
        upper = np.concatenate([self.breakpoints, [np.inf]])
        return lower, upper

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """
        F_g(x_g) para cada pixel; aceita um mapa [n_points] ou lote [n × n_points].

        Usa F(x) = Σ_k β_k·(clip(x, a_k, b_k) − clip(0, a_k, b_k)),
        a integral da inclinação de 0 até x.
        """
        x = np.asarray(x, dtype=np.float64)
        lower, upper = self.segment_bounds
        run = np.clip(x[..., None], lower, upper) - np.clip(0.0, lower, upper)
        return np.sum(self.slopes * run, axis=-1)


def build_response(grid: GridSpec, corr: CorrelationModel, seed: Optional[int] = 0,
                   breakpoints: Sequence[float] = DEFAULT_BREAKPOINTS) -> PiecewiseLinearField:
    """
    Sorteia as inclinações β_n com a mesma correlação espacial dos mapas.

    Args:
        grid: Grade
        corr: Modelo de correlação
        seed: Semente
        breakpoints: Pontos de quebra comuns a todos os pixels

    Returns:
        Campo linear por partes com inclinações escaladas por 1/n_points
    """
    rng = np.random.default_rng(seed)
    slopes = correlated_normal(corr, len(breakpoints) + 1, rng).T / grid.n_points
    return PiecewiseLinearField(breakpoints=np.asarray(breakpoints), slopes=slopes)


def global_response(response: PiecewiseLinearField, x_map: np.ndarray) -> np.ndarray:
    """
    y = Σ_g F_g(x_g).

    Args:
        response: Campo linear por partes
        x_map: Mapa [n_points] ou lote [n × n_points]

    Returns:
        Escalar (mapa único) ou vetor [n]
    """
    x_map = np.asarray(x_map, dtype=np.float64)
    if x_map.ndim == 1:
        return float(response.evaluate(x_map).sum())

    # Em blocos para não materializar [n × pixels × segmentos] de uma vez
    out = np.empty(x_map.shape[0])
    for start in range(0, x_map.shape[0], EVAL_CHUNK):
        stop = start + EVAL_CHUNK
        out[start:stop] = response.evaluate(x_map[start:stop]).sum(axis=-1)
    return out
