"""
Página de Treinamento: histórico por execução
"""
import json
import sys
from pathlib import Path

import pandas as pd
import streamlit as st

sys.path.append(str(Path(__file__).parent.parent))

from src.analysis.reports import list_runs, read_run_tables
from src.visualization.charts import DashboardCharts

# Nota: st.set_page_config() deve ser chamado apenas no app.py principal


@st.cache_data
def load_run(run_dir):
    """Tabelas e resumo de abstenção de uma execução."""
    tables = read_run_tables(run_dir)
    abstention_path = Path(run_dir) / 'abstention.json'
    abstention = json.loads(abstention_path.read_text()) if abstention_path.exists() else None
    return tables, abstention


st.title("🏋️ Treinamento")
st.markdown("""
Perdas de treino e validação por época, fração de abstenção na validação
e evolução de **α** durante o estágio de abstenção.
""")

experiment_dir = st.session_state.get('experiment_dir', 'runs/oned')
runs = list_runs(experiment_dir)
if runs.empty:
    st.warning(f"Nenhuma execução encontrada em `{experiment_dir}/runs`.")
    st.stop()

with st.sidebar:
    st.header("🔍 Execução")
    tag = st.selectbox("Modelo", options=sorted(runs['tag'].unique()))
    name = st.selectbox("Execução", options=runs.loc[runs['tag'] == tag, 'name'].tolist())

run = runs.set_index('name').loc[name]
tables, abstention = load_run(run['run_dir'])
history = tables['metrics']

col1, col2, col3, col4 = st.columns(4)

with col1:
    st.metric("Melhor época", int(run['best_epoch']))

with col2:
    st.metric("Perda de validação", f"{run['best_val_loss']:.4f}")

with col3:
    if pd.notna(run['realized_coverage']):
        st.metric("Cobertura realizada", f"{run['realized_coverage'] * 100:.1f}%")

with col4:
    if pd.notna(run['tau']):
        st.metric("τ", f"{run['tau']:.4f}")

st.divider()

st.subheader("📉 Perdas")
st.plotly_chart(DashboardCharts.training_history(history), use_container_width=True)

if (history['stage'] == 'abstention').any():
    st.subheader("🎚️ Abstenção e α")
    setpoint = None if pd.isna(run['setpoint']) else float(run['setpoint'])
    st.plotly_chart(DashboardCharts.abstention_trace(history, setpoint), use_container_width=True)

if abstention is not None:
    with st.expander("📋 κ, τ e percentis de σ no fim do spin-up"):
        st.json(abstention)

if 'control_steps' in tables:
    with st.expander("🕹️ Passos do controlador PID"):
        st.dataframe(tables['control_steps'], use_container_width=True, hide_index=True)

with st.expander("📄 metrics.csv"):
    st.dataframe(history, use_container_width=True, hide_index=True)
