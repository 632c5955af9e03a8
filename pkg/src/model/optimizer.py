"""
Otimizador Adam sobre os parâmetros de um MlpModel.
"""
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from src.errors import ConfigurationError, DimensionError
from src.model.net import MlpModel, ParameterGradients


@dataclass
class OptimizerState:
    """Momentos do Adam por parâmetro e contador de passos."""
    learning_rate: float
    kind: str = 'adam'
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    first_moments: List[np.ndarray] = field(default_factory=list)
    second_moments: List[np.ndarray] = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if self.kind != 'adam':
            raise ConfigurationError(f'Otimizador não suportado: {self.kind}')
        if self.learning_rate <= 0:
            raise ConfigurationError('learning_rate deve ser positivo')

    @classmethod
    def for_model(cls, model: MlpModel, learning_rate: float) -> 'OptimizerState':
        """Estado zerado com momentos no formato dos parâmetros do modelo."""
        params = model.parameters()
        return cls(
            learning_rate=learning_rate,
            first_moments=[np.zeros_like(p) for p in params],
            second_moments=[np.zeros_like(p) for p in params]
        )


def optimizer_step(state: OptimizerState, model: MlpModel,
                   grads: ParameterGradients) -> Tuple[MlpModel, OptimizerState]:
    """
    Aplica um passo do Adam in-place.

    Args:
        state: Estado do otimizador (momentos e passo)
        model: Rede a atualizar
        grads: Gradientes no mesmo formato dos parâmetros

    Returns:
        Tupla (modelo, estado) atualizados
    """
    params = model.parameters()
    grad_arrays = grads.arrays()
    if not state.first_moments:
        state.first_moments = [np.zeros_like(p) for p in params]
        state.second_moments = [np.zeros_like(p) for p in params]

    if len(grad_arrays) != len(params):
        raise DimensionError(
            f'{len(grad_arrays)} gradientes para {len(params)} parâmetros',
            layer=len(model.layers) - 1
        )
    for i, (p, g, m) in enumerate(zip(params, grad_arrays, state.first_moments)):
        if p.shape != g.shape or p.shape != m.shape:
            raise DimensionError(
                f'Gradiente {g.shape} incompatível com parâmetro {p.shape}',
                layer=i // 2
            )

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step

    for p, g, m, v in zip(params, grad_arrays, state.first_moments, state.second_moments):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)

    return model, state
