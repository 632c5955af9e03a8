"""
Explorador de Resultados - Redes de Regressão com Abstenção
Página principal
"""
import json
import sys
from pathlib import Path

import pandas as pd
import streamlit as st

# Adiciona o diretório raiz ao path
sys.path.append(str(Path(__file__).parent))

from src.analysis.reports import list_runs, read_run_tables
from src.visualization.charts import DashboardCharts

# Configuração da página
st.set_page_config(
    page_title="Redes com Abstenção - Resultados",
    page_icon="📉",
    layout="wide",
    initial_sidebar_state="expanded"
)

# CSS customizado com responsividade
st.markdown("""
<style>
    .main-header {
        font-size: 2.5rem;
        font-weight: 700;
        color: #1a1a1a;
        margin-bottom: 1rem;
    }
    .stMetric {
        background: linear-gradient(135deg, #667eea 0%, #764ba2 100%);
        padding: 1rem;
        border-radius: 8px;
        color: white;
    }

    /* Mobile (até 768px) */
    @media (max-width: 768px) {
        .main-header {
            font-size: 1.5rem !important;
        }
        [data-testid="column"] {
            width: 100% !important;
            flex: 1 1 100% !important;
            min-width: 100% !important;
        }
        [data-testid="stMetricValue"] {
            font-size: 1.2rem !important;
        }
        .js-plotly-plot {
            width: 100% !important;
        }
    }

    /* Desktop grande (acima de 1200px) */
    @media (min-width: 1200px) {
        .main .block-container {
            max-width: 1400px !important;
            padding: 2rem 3rem !important;
        }
    }
</style>
""", unsafe_allow_html=True)


@st.cache_data
def load_runs(experiment_dir):
    """Lista as execuções do experimento."""
    return list_runs(experiment_dir)


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


# Header
st.markdown('<h1 class="main-header">📉 Redes de Regressão com Abstenção</h1>',
            unsafe_allow_html=True)
st.markdown("**Resultados de treinamento e avaliação gerados pela linha de comando**")

with st.expander("ℹ️ Sobre os experimentos", expanded=False):
    st.info("""
    **Como gerar os resultados**

    ```
    python -m src.cli reproduce oned --out runs/oned
    python -m src.cli reproduce enso_pid --out runs/enso_pid --jobs 4
    ```

    - **ANN base**: prevê μ e σ com perda gaussiana (NLL)
    - **CAN**: mesma rede treinada com a perda de abstenção, que aprende a
      descartar amostras com σ acima de τ
    - **Modelo MAE**: prevê apenas μ, sem estimativa de incerteza

    Os dados são sintéticos e gerados a partir da semente da configuração.
    """)

st.divider()

# Sidebar
with st.sidebar:
    st.header("📂 Experimento")
    experiment_dir = st.text_input("Diretório de saída", value="runs/oned")
    st.session_state['experiment_dir'] = experiment_dir

    st.divider()
    st.markdown("### 📄 Sobre")
    st.markdown("""
    - 🏋️ **Treinamento**: perdas, abstenção e α por época
    - 🎯 **Cobertura**: MAE × cobertura e calibração
    - 🔍 **Previsões**: μ, σ e amostras abstidas
    """)

runs = load_runs(experiment_dir)
if runs.empty:
    st.warning(f"Nenhuma execução encontrada em `{experiment_dir}/runs`.")
    st.stop()

config_path = Path(experiment_dir) / 'config.json'
config = json.loads(config_path.read_text()) if config_path.exists() else {}

# Métricas principais
st.header("📈 Métricas Principais")

col1, col2, col3, col4 = st.columns(4)

with col1:
    st.metric("Execuções", len(runs), delta=config.get('experiment'))

with col2:
    st.metric("Modelos", ", ".join(sorted(runs['tag'].unique())))

with col3:
    can = runs[runs['tag'] == 'can']
    if not can.empty:
        st.metric("Cobertura média (CAN)", f"{can['realized_coverage'].mean() * 100:.1f}%")

with col4:
    st.metric("Épocas (mediana)", f"{runs['best_epoch'].median():.0f}")

st.subheader("Execuções")
st.dataframe(runs.drop(columns=['run_dir']), use_container_width=True, hide_index=True)

st.divider()

# Curvas de cobertura
st.header("📊 MAE × Cobertura")
evaluation = load_evaluation(experiment_dir)
if 'coverage_curves' in evaluation:
    fig = DashboardCharts.coverage_curves(evaluation['coverage_curves'],
                                          evaluation.get('envelope'),
                                          evaluation.get('can_points'))
    st.plotly_chart(fig, use_container_width=True)
else:
    st.info("Rode `python -m src.cli evaluate` para gerar as tabelas de avaliação.")

st.divider()

# Primeira CAN como destaque
if not can.empty:
    st.header("🎯 CAN em destaque")
    first = can.iloc[0]
    tables = read_run_tables(first['run_dir'])

    col_left, col_right = st.columns(2)
    with col_left:
        target = None if pd.isna(first['setpoint']) else (1 - first['setpoint']) * 100
        st.plotly_chart(DashboardCharts.coverage_gauge(first['realized_coverage'] * 100, target),
                        use_container_width=True)
    with col_right:
        if 'predictions' in tables:
            st.plotly_chart(DashboardCharts.flag_donut(tables['predictions']),
                            use_container_width=True)

st.divider()

st.header("🧭 Explore Mais")
st.markdown("""
Navegue pelas páginas laterais para análises mais detalhadas:
- **🏋️ Treinamento**: histórico de cada execução e passos do controlador
- **🎯 Cobertura**: curvas por modelo, calibração e resumo por execução
- **🔍 Previsões**: dispersão previsto × observado e distribuição de σ
""")

st.divider()
st.markdown("""
<div style='text-align: center; color: #666; padding: 20px;'>
    <p>Explorador desenvolvido com Streamlit | Dados sintéticos</p>
</div>
""", unsafe_allow_html=True)
