"""
Página de Cobertura e Calibração
"""
import sys
from pathlib import Path

import pandas as pd
import streamlit as st

sys.path.append(str(Path(__file__).parent.parent))

from src.visualization.charts import DashboardCharts


@st.cache_data
def load_evaluation(experiment_dir):
    """Tabelas agregadas de <experimento>/evaluation."""
    folder = Path(experiment_dir) / 'evaluation'
    tables = {}
    for name in ('coverage_curves', 'envelope', 'can_points', 'summary'):
        path = folder / f'{name}.csv'
        if path.exists():
            tables[name] = pd.read_csv(path)
    return tables


@st.cache_data
def load_calibration(experiment_dir):
    """calibration.csv de todas as execuções, com nome e modelo."""
    frames = []
    for path in sorted(Path(experiment_dir).glob('runs/*/calibration.csv')):
        frame = pd.read_csv(path)
        if not frame.empty:
            frames.append(frame.assign(name=path.parent.name))
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


st.title("🎯 Cobertura e Calibração")
st.markdown("""
Quanto menor a cobertura, menor deveria ser o erro: as amostras mantidas são
as de menor **σ** previsto. A calibração compara os erros padronizados com N(0, 1).
""")

experiment_dir = st.session_state.get('experiment_dir', 'runs/oned')
evaluation = load_evaluation(experiment_dir)
if 'coverage_curves' not in evaluation:
    st.warning("Tabelas de avaliação não encontradas; rode `python -m src.cli evaluate`.")
    st.stop()

curves = evaluation['coverage_curves']

tab_curves, tab_calibration, tab_summary = st.tabs([
    "📊 MAE × Cobertura",
    "📐 Calibração",
    "📋 Resumo"
])

with tab_curves:
    tags = st.multiselect("Modelos", options=sorted(curves['tag'].unique()),
                          default=sorted(curves['tag'].unique()))
    filtered = curves[curves['tag'].isin(tags)]
    envelope = evaluation.get('envelope') if 'baseline' in tags else None
    can_points = evaluation.get('can_points') if 'can' in tags else None
    st.plotly_chart(DashboardCharts.coverage_curves(filtered, envelope, can_points),
                    use_container_width=True)

    st.subheader("MAE por nível de cobertura")
    pivot = filtered.pivot_table(index='coverage', columns='tag', values='mae', aggfunc='median')
    st.dataframe(pivot.sort_index(ascending=False), use_container_width=True)

with tab_calibration:
    calibration = load_calibration(experiment_dir)
    if calibration.empty:
        st.info("Nenhuma execução com σ para calibrar.")
    else:
        names = sorted(calibration['name'].unique())
        selected = st.multiselect("Execuções", options=names,
                                  default=[n for n in names if n.startswith('baseline')] or names)
        col_left, col_right = st.columns(2)
        for column, split in zip((col_left, col_right, col_left), ('train', 'val', 'test')):
            with column:
                st.subheader(split)
                table = calibration[calibration['name'].isin(selected)]
                st.plotly_chart(DashboardCharts.zscore_histogram(table, split),
                                use_container_width=True)

with tab_summary:
    if 'summary' in evaluation:
        st.dataframe(evaluation['summary'], use_container_width=True, hide_index=True)
