"""
Página de Previsões: μ, σ e amostras abstidas no conjunto de teste
"""
import sys
from pathlib import Path

import pandas as pd
import streamlit as st

sys.path.append(str(Path(__file__).parent.parent))

from src.analysis.reports import list_runs, read_run_tables
from src.visualization.charts import DashboardCharts

st.title("🔍 Previsões")
st.markdown("""
Previsto × observado no conjunto de teste. Amostras **abstidas** são as de σ
acima de τ (CAN) ou fora dos 20% de menor σ (ANN base).
""")

experiment_dir = st.session_state.get('experiment_dir', 'runs/oned')
runs = list_runs(experiment_dir)
if runs.empty:
    st.warning(f"Nenhuma execução encontrada em `{experiment_dir}/runs`.")
    st.stop()

with st.sidebar:
    st.header("🔍 Execução")
    name = st.selectbox("Execução", options=runs['name'].tolist())

run = runs.set_index('name').loc[name]
predictions = read_run_tables(run['run_dir']).get('predictions')
if predictions is None:
    st.info("Execução ainda não avaliada.")
    st.stop()

covered = predictions[predictions['covered']]

col1, col2, col3, col4 = st.columns(4)

with col1:
    st.metric("Amostras", f"{len(predictions):,}")

with col2:
    st.metric("Cobertas", f"{len(covered):,}",
              delta=f"{len(covered) / len(predictions) * 100:.1f}%")

with col3:
    st.metric("MAE (todas)", f"{(predictions['y'] - predictions['mu']).abs().mean():.4f}")

with col4:
    if not covered.empty:
        st.metric("MAE (cobertas)", f"{(covered['y'] - covered['mu']).abs().mean():.4f}")

st.divider()

col_left, col_right = st.columns([2, 1])

with col_left:
    st.subheader("Previsto × observado")
    st.plotly_chart(DashboardCharts.prediction_scatter(predictions), use_container_width=True)

with col_right:
    st.subheader("Proveniência das cobertas")
    st.plotly_chart(DashboardCharts.flag_donut(predictions), use_container_width=True)

    if pd.notna(run['realized_coverage']):
        target = None if pd.isna(run['setpoint']) else (1 - run['setpoint']) * 100
        st.plotly_chart(DashboardCharts.coverage_gauge(run['realized_coverage'] * 100, target),
                        use_container_width=True)

if predictions['sigma'].notna().any():
    st.subheader("Distribuição de σ")
    st.plotly_chart(DashboardCharts.sigma_histogram(predictions), use_container_width=True)

with st.expander("📄 predictions.csv"):
    flags = st.multiselect("Proveniência", options=sorted(predictions['flag'].unique()),
                           default=sorted(predictions['flag'].unique()))
    st.dataframe(predictions[predictions['flag'].isin(flags)], use_container_width=True,
                 hide_index=True)
