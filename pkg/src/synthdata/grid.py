"""
Grade global, matriz de correlação espacial sintética e amostragem de campos de TSM.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg

from src.errors import DomainError, NuggetError

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class GridSpec:
    """Grade regular de 60 longitudes × 15 latitudes (centros das células, em graus)."""
    n_lon: int = 60
    n_lat: int = 15

    @property
    def n_points(self) -> int:
        return self.n_lon * self.n_lat

    @property
    def lons(self) -> np.ndarray:
        step = 360.0 / self.n_lon
        return step / 2 + step * np.arange(self.n_lon)

    @property
    def lats(self) -> np.ndarray:
        step = 180.0 / self.n_lat
        return -90.0 + step / 2 + step * np.arange(self.n_lat)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Longitude e latitude de cada pixel, em ordem latitude-major (achatada)."""
        lon, lat = np.meshgrid(self.lons, self.lats)
        return lon.ravel(), lat.ravel()

    def box_mask(self, lon_range: Tuple[float, float],
                 lat_range: Tuple[float, float]) -> np.ndarray:
        """
        Máscara booleana dos pixels dentro de um retângulo lon/lat.

        Args:
            lon_range: (lon_min, lon_max) em graus leste, 0–360
            lat_range: (lat_min, lat_max) em graus

        Returns:
            Máscara com n_points elementos
        """
        lon, lat = self.mesh()
        return ((lon >= lon_range[0]) & (lon <= lon_range[1])
                & (lat >= lat_range[0]) & (lat <= lat_range[1]))

    def to_dict(self) -> Dict:
        return {'n_lon': self.n_lon, 'n_lat': self.n_lat}


def great_circle_km(lon: np.ndarray, lat: np.ndarray) -> np.ndarray:
    """Matriz de distâncias de grande círculo (haversine) entre todos os pares."""
    lon_r = np.radians(lon)
    lat_r = np.radians(lat)
    dlon = lon_r[:, None] - lon_r[None, :]
    dlat = lat_r[:, None] - lat_r[None, :]
    h = (np.sin(dlat / 2) ** 2
         + np.cos(lat_r)[:, None] * np.cos(lat_r)[None, :] * np.sin(dlon / 2) ** 2)
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def gaussian_kernel(distance_km: np.ndarray, length_scale_km: float) -> np.ndarray:
    """exp(−d²/(2ℓ²))."""
    return np.exp(-distance_km ** 2 / (2.0 * length_scale_km ** 2))


@dataclass
class CorrelationModel:
    """Kernel gaussiano sobre distância de grande círculo e seu fator de Cholesky."""
    grid: GridSpec
    length_scale_km: float
    nugget: float
    correlation: np.ndarray = field(repr=False)
    cholesky: np.ndarray = field(repr=False)
    kernel: str = 'gaussian_greatcircle'


def build_correlation(grid: GridSpec, length_scale_km: float = 2500.0,
                      nugget: float = 1e-6) -> CorrelationModel:
    """
    Monta a matriz de correlação C + nugget·I e fatora por Cholesky.

    Args:
        grid: Grade
        length_scale_km: Escala ℓ do kernel
        nugget: Termo somado à diagonal

    Returns:
        CorrelationModel com o fator triangular inferior L (C = L·Lᵀ)
    """
    if not length_scale_km > 0:
        raise DomainError(f'length_scale_km deve ser positivo (recebido {length_scale_km})')

    lon, lat = grid.mesh()
    corr = gaussian_kernel(great_circle_km(lon, lat), length_scale_km)
    # Simetria exata antes do nugget
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    corr = corr + nugget * np.eye(grid.n_points)

    try:
        chol = linalg.cholesky(corr, lower=True)
    except linalg.LinAlgError as exc:
        suggested = max(nugget * 10.0, 1e-6)
        raise NuggetError(
            f'Cholesky falhou com nugget={nugget:g} ({exc}); tente nugget={suggested:g}',
            suggested_nugget=suggested
        ) from exc

    logger.debug('Correlação %dx%d fatorada (ℓ=%.0f km, nugget=%g)',
                 grid.n_points, grid.n_points, length_scale_km, nugget)
    return CorrelationModel(grid, length_scale_km, nugget, corr, chol)


def correlated_normal(corr: CorrelationModel, n: int,
                      rng: np.random.Generator) -> np.ndarray:
    """n sorteios z·Lᵀ com z normal padrão."""
    z = rng.standard_normal((n, corr.grid.n_points))
    return z @ corr.cholesky.T


def sample_sst_fields(corr: CorrelationModel, n: int,
                      seed: Optional[int] = 0) -> np.ndarray:
    """
    Gera n mapas de anomalia de TSM independentes.

    Args:
        corr: Modelo de correlação
        n: Número de mapas
        seed: Semente

    Returns:
        Matriz [n × n_points]
    """
    if n < 1:
        raise DomainError('n deve ser >= 1')
    return correlated_normal(corr, n, np.random.default_rng(seed))
