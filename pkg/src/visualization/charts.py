"""
Módulo de visualizações com gráficos Plotly para o explorador de resultados.
"""
from typing import Optional

import numpy as np
import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots


class DashboardCharts:
    """Gráficos reutilizáveis para o explorador de resultados."""

    # Paleta de cores consistente
    COLORS = {
        'train': '#3498db',
        'val': '#e67e22',
        'baseline': '#95a5a6',
        'median': '#2c3e50',
        'can': '#e74c3c',
        'mae': '#9b59b6',
        'alpha': '#27ae60',
        'warning': '#e67e22',
        'success': '#27ae60',
        'danger': '#c0392b'
    }

    FLAG_COLORS = {
        'signal': '#2ecc71',
        'shuffled_noise': '#95a5a6',
        'corrupted': '#e74c3c',
        'clean': '#3498db',
        'line': '#9b59b6',
        'cloud': '#f1c40f'
    }

    FLAG_LABELS = {
        'signal': 'Sinal',
        'shuffled_noise': 'Ruído embaralhado',
        'corrupted': 'Corrompida',
        'clean': 'Limpa',
        'line': 'Reta',
        'cloud': 'Nuvem'
    }

    @staticmethod
    def training_history(history: pd.DataFrame) -> go.Figure:
        """
        Perda de treino e validação por época, com o fim do spin-up marcado.

        Args:
            history: DataFrame de metrics.csv (epoch, stage, train_loss, val_loss)

        Returns:
            Figure do Plotly
        """
        fig = go.Figure()
        for column, label in (('train_loss', 'Treino'), ('val_loss', 'Validação')):
            fig.add_trace(go.Scatter(
                x=history['epoch'],
                y=history[column],
                mode='lines',
                name=label,
                line=dict(color=DashboardCharts.COLORS['train' if column == 'train_loss' else 'val']),
                hovertemplate='Época %{x}<br>%{y:.4f}<extra></extra>'
            ))

        spinup = history[history['stage'] == 'spinup']
        if not spinup.empty:
            fig.add_vline(x=spinup['epoch'].max() + 0.5, line_dash='dash', line_color='gray',
                          annotation_text='fim do spin-up')

        fig.update_layout(
            xaxis_title='Época',
            yaxis_title='Perda',
            margin=dict(t=30, b=50),
            height=350
        )

        return fig

    @staticmethod
    def abstention_trace(history: pd.DataFrame, setpoint: Optional[float] = None) -> go.Figure:
        """
        Abstenção de validação e α por época (eixos separados).

        Args:
            history: DataFrame de metrics.csv
            setpoint: Setpoint de abstenção, desenhado com a faixa de ±0.1

        Returns:
            Figure do Plotly
        """
        stage = history[history['stage'] == 'abstention']
        fig = make_subplots(specs=[[{'secondary_y': True}]])

        fig.add_trace(go.Scatter(
            x=stage['epoch'], y=stage['val_abstention'] * 100, mode='lines',
            name='Abstenção (val)', line=dict(color=DashboardCharts.COLORS['val']),
            hovertemplate='Época %{x}<br>%{y:.1f}%<extra></extra>'
        ), secondary_y=False)
        fig.add_trace(go.Scatter(
            x=stage['epoch'], y=stage['alpha'], mode='lines', name='α',
            line=dict(color=DashboardCharts.COLORS['alpha'], dash='dot'),
            hovertemplate='Época %{x}<br>α = %{y:.3f}<extra></extra>'
        ), secondary_y=True)

        if setpoint is not None and not pd.isna(setpoint):
            fig.add_hrect(y0=(setpoint - 0.1) * 100, y1=(setpoint + 0.1) * 100,
                          fillcolor=DashboardCharts.COLORS['success'], opacity=0.1, line_width=0)
            fig.add_hline(y=setpoint * 100, line_dash='dash',
                          line_color=DashboardCharts.COLORS['success'])

        fig.update_xaxes(title_text='Época')
        fig.update_yaxes(title_text='Abstenção (%)', secondary_y=False)
        fig.update_yaxes(title_text='α', secondary_y=True)
        fig.update_layout(margin=dict(t=30, b=50), height=350)

        return fig

    @staticmethod
    def coverage_curves(curves: pd.DataFrame, envelope: Optional[pd.DataFrame] = None,
                        can_points: Optional[pd.DataFrame] = None) -> go.Figure:
        """
        MAE × cobertura: envelope do ensemble base, mediana, modelo MAE e pontos das CANs.

        Args:
            curves: coverage_curves.csv
            envelope: envelope.csv
            can_points: can_points.csv

        Returns:
            Figure do Plotly
        """
        fig = go.Figure()

        if envelope is not None and not envelope.empty:
            x = envelope['coverage'] * 100
            fig.add_trace(go.Scatter(x=x, y=envelope['mae_max'], mode='lines',
                                     line=dict(width=0), showlegend=False, hoverinfo='skip'))
            fig.add_trace(go.Scatter(
                x=x, y=envelope['mae_min'], mode='lines', line=dict(width=0),
                fill='tonexty', fillcolor='rgba(149, 165, 166, 0.4)', name='ANN base (min–máx)',
                hoverinfo='skip'
            ))
            fig.add_trace(go.Scatter(
                x=x, y=envelope['mae_median'], mode='lines', name='ANN base (mediana)',
                line=dict(color=DashboardCharts.COLORS['median'], width=2),
                hovertemplate='Cobertura %{x:.0f}%<br>MAE %{y:.4f}<extra></extra>'
            ))

        mae_curves = curves[curves['tag'] == 'mae']
        if not mae_curves.empty:
            fig.add_hline(y=float(mae_curves.groupby('seed')['mae'].first().median()),
                          line_dash='dash', line_color=DashboardCharts.COLORS['mae'],
                          annotation_text='Modelo MAE')

        if can_points is not None and not can_points.empty:
            fig.add_trace(go.Scatter(
                x=can_points['coverage'] * 100, y=can_points['mae'], mode='markers',
                name='CAN', marker=dict(color=DashboardCharts.COLORS['can'], size=8,
                                        line=dict(color='black', width=0.5)),
                customdata=can_points[['seed']],
                hovertemplate='Semente %{customdata[0]}<br>Cobertura %{x:.1f}%<br>'
                              'MAE %{y:.4f}<extra></extra>'
            ))

        fig.update_layout(
            xaxis=dict(title='Cobertura (%)', autorange='reversed'),
            yaxis_title='MAE',
            margin=dict(t=30, b=50),
            height=420
        )

        return fig

    @staticmethod
    def zscore_histogram(calibration: pd.DataFrame, split: str = 'test') -> go.Figure:
        """
        Histograma dos erros padronizados (sem as classes de transbordo) com N(0, 1).

        Args:
            calibration: calibration.csv de uma ou mais execuções
            split: Partição

        Returns:
            Figure do Plotly
        """
        table = calibration[calibration['split'] == split].astype({'bin_left': float,
                                                                   'bin_right': float})
        table = table[np.isfinite(table['bin_left']) & np.isfinite(table['bin_right'])]
        if table.empty:
            return go.Figure()

        grouped = table.groupby(['bin_left', 'bin_right'], as_index=False)['count'].sum()
        widths = grouped['bin_right'] - grouped['bin_left']
        density = grouped['count'] / (grouped['count'].sum() * widths)
        z = np.linspace(grouped['bin_left'].min(), grouped['bin_right'].max(), 200)

        fig = go.Figure(data=[
            go.Bar(x=grouped['bin_left'] + widths / 2, y=density, width=widths,
                   marker_color=DashboardCharts.COLORS['train'], name=split,
                   hovertemplate='z %{x:.1f}<br>%{y:.3f}<extra></extra>'),
            go.Scatter(x=z, y=np.exp(-0.5 * z ** 2) / np.sqrt(2 * np.pi), mode='lines',
                       name='N(0, 1)', line=dict(color=DashboardCharts.COLORS['median']))
        ])

        fig.update_layout(
            xaxis_title='z = (y − μ)/σ',
            yaxis_title='Densidade',
            bargap=0,
            margin=dict(t=30, b=50),
            height=320
        )

        return fig

    @staticmethod
    def prediction_scatter(predictions: pd.DataFrame) -> go.Figure:
        """
        Previsto × observado, colorido por σ; abstidas com marcador vazado.

        Args:
            predictions: predictions.csv (y, mu, sigma, covered)

        Returns:
            Figure do Plotly
        """
        has_sigma = bool(predictions['sigma'].notna().any())
        fig = go.Figure()

        for covered, symbol, label in ((True, 'circle', 'Cobertas'),
                                       (False, 'circle-open', 'Abstidas')):
            part = predictions[predictions['covered'] == covered]
            if part.empty:
                continue
            fig.add_trace(go.Scatter(
                x=part['y'], y=part['mu'], mode='markers', name=label,
                marker=dict(
                    symbol=symbol, size=5,
                    color=part['sigma'] if has_sigma else DashboardCharts.COLORS['mae'],
                    colorscale='Viridis', showscale=has_sigma and covered,
                    colorbar=dict(title='σ') if has_sigma and covered else None,
                    cmin=predictions['sigma'].min() if has_sigma else None,
                    cmax=predictions['sigma'].max() if has_sigma else None
                ),
                hovertemplate='y %{x:.3f}<br>μ %{y:.3f}<extra></extra>'
            ))

        lo = float(min(predictions['y'].min(), predictions['mu'].min()))
        hi = float(max(predictions['y'].max(), predictions['mu'].max()))
        fig.add_shape(type='line', x0=lo, y0=lo, x1=hi, y1=hi,
                      line=dict(color='gray', dash='dash'))

        fig.update_layout(
            xaxis_title='y observado',
            yaxis_title='μ previsto',
            margin=dict(t=30, b=50),
            height=420
        )

        return fig

    @staticmethod
    def sigma_histogram(predictions: pd.DataFrame) -> go.Figure:
        """Distribuição de σ separada em cobertas e abstidas."""
        fig = go.Figure()
        for covered, label, color in ((True, 'Cobertas', DashboardCharts.COLORS['success']),
                                      (False, 'Abstidas', DashboardCharts.COLORS['danger'])):
            part = predictions[predictions['covered'] == covered]
            fig.add_trace(go.Histogram(x=part['sigma'], name=label, marker_color=color,
                                       opacity=0.7, nbinsx=50))

        fig.update_layout(
            barmode='overlay',
            xaxis_title='σ',
            yaxis_title='Amostras',
            margin=dict(t=30, b=50),
            height=320
        )

        return fig

    @staticmethod
    def coverage_gauge(coverage_percentage: float,
                       target_percentage: Optional[float] = None) -> go.Figure:
        """
        Gauge da cobertura realizada, com o alvo como referência.

        Args:
            coverage_percentage: Cobertura realizada (%)
            target_percentage: Cobertura alvo (%)

        Returns:
            Figure do Plotly
        """
        reference = target_percentage if target_percentage is not None else coverage_percentage
        fig = go.Figure(go.Indicator(
            mode='gauge+number+delta',
            value=coverage_percentage,
            domain={'x': [0, 1], 'y': [0, 1]},
            title={'text': 'Cobertura realizada (%)'},
            delta={'reference': reference},
            gauge={
                'axis': {'range': [None, 100]},
                'bar': {'color': DashboardCharts.COLORS['median']},
                'steps': [
                    {'range': [max(reference - 10, 0), min(reference + 10, 100)],
                     'color': DashboardCharts.COLORS['success']}
                ],
                'threshold': {
                    'line': {'color': 'red', 'width': 4},
                    'thickness': 0.75,
                    'value': reference
                }
            }
        ))

        fig.update_layout(
            height=250,
            margin=dict(t=40, b=20, l=20, r=20)
        )

        return fig

    @staticmethod
    def flag_donut(predictions: pd.DataFrame, covered_only: bool = True) -> go.Figure:
        """
        Gráfico de rosca da proveniência das amostras (cobertas, por padrão).

        Args:
            predictions: predictions.csv com coluna 'flag'
            covered_only: Considera apenas as amostras cobertas

        Returns:
            Figure do Plotly
        """
        table = predictions[predictions['covered']] if covered_only else predictions
        flag_counts = table['flag'].value_counts()

        labels = [DashboardCharts.FLAG_LABELS.get(f, f) for f in flag_counts.index]
        colors = [DashboardCharts.FLAG_COLORS.get(f, '#95a5a6') for f in flag_counts.index]

        fig = go.Figure(data=[go.Pie(
            labels=labels,
            values=flag_counts.values,
            hole=0.6,
            marker_colors=colors,
            textinfo='percent+label',
            textposition='outside',
            hovertemplate='%{label}<br>%{value} amostras<br>%{percent}<extra></extra>'
        )])

        fig.update_layout(
            showlegend=False,
            annotations=[{
                'text': f'<b>{len(table):,}</b><br>amostras',
                'x': 0.5, 'y': 0.5,
                'font_size': 14,
                'showarrow': False
            }],
            margin=dict(t=20, b=20, l=20, r=20),
            height=300
        )

        return fig
