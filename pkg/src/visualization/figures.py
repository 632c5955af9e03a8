"""
Figuras estáticas em SVG (matplotlib) geradas pelo `evaluate` da CLI.
"""
import logging
from pathlib import Path
from typing import Optional, Union

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

logger = logging.getLogger(__name__)

# Mesmo conteúdo → mesmo arquivo
matplotlib.rcParams['svg.hashsalt'] = 'can-figures'

COLORS = {
    'baseline': '#95a5a6',
    'median': '#2c3e50',
    'can': '#e67e22',
    'mae': '#9b59b6',
    'hist': '#3498db'
}


def coverage_figure(curves: pd.DataFrame, envelope: Optional[pd.DataFrame] = None,
                    can_points: Optional[pd.DataFrame] = None,
                    title: str = 'MAE × cobertura') -> Figure:
    """
    MAE em função da cobertura: envelope do ensemble base, mediana e pontos das CANs.

    Args:
        curves: Curvas (coverage, mae, tag, seed)
        envelope: Envelope do ensemble base (coverage, mae_min, mae_median, mae_max)
        can_points: Pontos (coverage, mae) das CANs
        title: Título

    Returns:
        Figure do matplotlib
    """
    fig = Figure(figsize=(6, 4.5))
    ax = fig.add_subplot()

    if envelope is not None and not envelope.empty:
        ax.fill_between(envelope['coverage'] * 100, envelope['mae_min'], envelope['mae_max'],
                        color=COLORS['baseline'], alpha=0.4, linewidth=0, label='ANN base (min–máx)')
        ax.plot(envelope['coverage'] * 100, envelope['mae_median'], color=COLORS['median'],
                linewidth=2, label='ANN base (mediana)')

    mae_curves = curves[curves['tag'] == 'mae'] if 'tag' in curves.columns else curves.iloc[0:0]
    if not mae_curves.empty:
        level = float(mae_curves.groupby('seed')['mae'].first().median())
        ax.axhline(level, color=COLORS['mae'], linestyle='--', label='Modelo MAE (mediana)')

    if can_points is not None and not can_points.empty:
        ax.scatter(can_points['coverage'] * 100, can_points['mae'], color=COLORS['can'],
                   edgecolor='black', linewidth=0.5, s=30, zorder=3, label='CAN')

    ax.set_xlim(100, 0)
    ax.set_xlabel('Cobertura (%)')
    ax.set_ylabel('MAE')
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc='best', fontsize=8)
    fig.tight_layout()
    return fig


def zscore_figure(calibration: pd.DataFrame, split: str = 'test',
                  title: Optional[str] = None) -> Figure:
    """
    Histograma dos erros padronizados de uma partição, com a densidade N(0, 1).

    As classes de transbordo (±inf) são omitidas do gráfico.
    """
    fig = Figure(figsize=(5, 4))
    ax = fig.add_subplot()
    ax.set_title(title or f'Erros padronizados ({split})')

    table = calibration[calibration['split'] == split].astype({'bin_left': float, 'bin_right': float})
    table = table[np.isfinite(table['bin_left']) & np.isfinite(table['bin_right'])]
    if table.empty:
        ax.text(0.5, 0.5, 'Sem σ para calibrar', ha='center', va='center', transform=ax.transAxes)
        return fig

    grouped = table.groupby(['bin_left', 'bin_right'], as_index=False)['count'].sum()
    widths = grouped['bin_right'] - grouped['bin_left']
    density = grouped['count'] / (grouped['count'].sum() * widths)
    ax.bar(grouped['bin_left'], density, width=widths, align='edge',
           color=COLORS['hist'], alpha=0.7, edgecolor='white', linewidth=0.3)

    z = np.linspace(grouped['bin_left'].min(), grouped['bin_right'].max(), 200)
    ax.plot(z, np.exp(-0.5 * z ** 2) / np.sqrt(2 * np.pi), color=COLORS['median'],
            linewidth=1.5, label='N(0, 1)')

    ax.set_xlabel('z = (y − μ)/σ')
    ax.set_ylabel('Densidade')
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def save_svg(fig: Figure, path: Union[str, Path], config_hash: Optional[str] = None) -> Path:
    """Grava a figura em SVG sem metadados de data; o hash vai na descrição do arquivo."""
    path = Path(path)
    metadata = {'Date': None}
    if config_hash:
        metadata['Description'] = f'config_hash {config_hash}'
    fig.savefig(path, format='svg', metadata=metadata)
    logger.debug('Figura gravada em %s', path)
    return path
