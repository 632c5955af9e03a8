"""
Módulo da rede densa com duas saídas (μ e σ bruto) e backpropagation analítico.
"""
import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from src.errors import ConfigurationError, DimensionError, NumericError

logger = logging.getLogger(__name__)

# Piso de σ após o softplus
SIGMA_EPS = 1e-6
# softplus⁻¹(1): viés inicial da cabeça de σ, para σ inicial ≈ 1
SIGMA_BIAS_INIT = float(np.log(np.expm1(1.0)))
CHECKPOINT_FORMAT_VERSION = 1


class Activation(str, Enum):
    """Ativações suportadas pelas camadas densas."""
    RELU = 'relu'
    LINEAR = 'linear'


@dataclass(frozen=True)
class LayerSpec:
    """Largura de entrada/saída e ativação de uma camada densa."""
    input_width: int
    output_width: int
    activation: Activation = Activation.RELU

    def __post_init__(self):
        if self.input_width < 1 or self.output_width < 1:
            raise ConfigurationError(
                f'Larguras de camada devem ser >= 1 '
                f'(recebido {self.input_width}x{self.output_width})'
            )
        object.__setattr__(self, 'activation', Activation(self.activation))

    def to_dict(self) -> Dict:
        return {
            'input_width': self.input_width,
            'output_width': self.output_width,
            'activation': self.activation.value
        }


@dataclass
class PredictionPair:
    """
    Saída da rede por amostra, vetorizada: μ_i e σ_i de uma normal condicional.

    Para o modelo MAE (uma saída) `sigma` e `raw_sigma` ficam como None.
    """
    mu: np.ndarray
    sigma: Optional[np.ndarray] = None
    raw_sigma: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.mu)

    @property
    def has_sigma(self) -> bool:
        return self.sigma is not None

    def subset(self, index: np.ndarray) -> 'PredictionPair':
        """Seleciona amostras pelo índice."""
        return PredictionPair(
            mu=self.mu[index],
            sigma=None if self.sigma is None else self.sigma[index],
            raw_sigma=None if self.raw_sigma is None else self.raw_sigma[index]
        )


@dataclass
class ParameterGradients:
    """Gradientes de cada matriz de pesos e vetor de viés."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def arrays(self) -> List[np.ndarray]:
        """Lista intercalada [dW0, db0, dW1, db1, ...]."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]


@dataclass(eq=False)
class MlpModel:
    """Pesos, vieses e metadados da rede totalmente conectada."""
    layers: List[LayerSpec]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    sigma_transform: str = 'softplus_eps'
    l2_first_layer: float = 0.0

    def __post_init__(self):
        if self.sigma_transform != 'softplus_eps':
            raise ConfigurationError(f'sigma_transform desconhecido: {self.sigma_transform}')
        if self.l2_first_layer < 0:
            raise ConfigurationError('l2_first_layer deve ser >= 0')
        if not self.layers:
            raise ConfigurationError('O modelo precisa de pelo menos uma camada')
        if self.layers[-1].output_width not in (1, 2):
            raise ConfigurationError('A camada final deve ter 1 (MAE) ou 2 (μ, σ) saídas')
        if not (len(self.layers) == len(self.weights) == len(self.biases)):
            raise ConfigurationError('layers, weights e biases com tamanhos diferentes')

        for i, (spec, w, b) in enumerate(zip(self.layers, self.weights, self.biases)):
            if w.shape != (spec.input_width, spec.output_width) or b.shape != (spec.output_width,):
                raise DimensionError(
                    f'Camada {i}: pesos {w.shape} / viés {b.shape} não correspondem '
                    f'a {spec.input_width}x{spec.output_width}',
                    layer=i
                )
            if i > 0 and self.layers[i - 1].output_width != spec.input_width:
                raise DimensionError(
                    f'Camada {i}: entrada {spec.input_width} não encadeia com a saída '
                    f'{self.layers[i - 1].output_width} da camada {i - 1}',
                    layer=i
                )

    @property
    def distributional(self) -> bool:
        """True quando a rede prevê (μ, σ)."""
        return self.layers[-1].output_width == 2

    @property
    def input_width(self) -> int:
        return self.layers[0].input_width

    @property
    def n_parameters(self) -> int:
        return int(sum(w.size + b.size for w, b in zip(self.weights, self.biases)))

    def parameters(self) -> List[np.ndarray]:
        """Lista intercalada [W0, b0, W1, b1, ...] (referências, não cópias)."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def copy(self) -> 'MlpModel':
        return MlpModel(
            layers=list(self.layers),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            sigma_transform=self.sigma_transform,
            l2_first_layer=self.l2_first_layer
        )

    def l2_penalty(self) -> float:
        """Penalidade ridge λ·ΣW² da primeira camada."""
        if self.l2_first_layer == 0:
            return 0.0
        return float(self.l2_first_layer * np.sum(self.weights[0] ** 2))

    @classmethod
    def build(cls, input_width: int, hidden_widths: Sequence[int],
              distributional: bool = True, l2_first_layer: float = 0.0,
              seed: Union[int, np.random.Generator, None] = 0) -> 'MlpModel':
        """
        Cria uma rede com inicialização Glorot uniforme.

        Args:
            input_width: Número de atributos de entrada
            hidden_widths: Larguras das camadas ocultas (ReLU)
            distributional: Se True, duas saídas (μ, σ); senão uma (MAE)
            l2_first_layer: Coeficiente λ da penalidade na primeira camada
            seed: Semente ou gerador do numpy

        Returns:
            Modelo inicializado
        """
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        widths = [input_width, *hidden_widths, 2 if distributional else 1]

        layers, weights, biases = [], [], []
        for i in range(len(widths) - 1):
            is_last = i == len(widths) - 2
            layers.append(LayerSpec(
                widths[i], widths[i + 1],
                Activation.LINEAR if is_last else Activation.RELU
            ))
            limit = np.sqrt(6.0 / (widths[i] + widths[i + 1]))
            weights.append(rng.uniform(-limit, limit, size=(widths[i], widths[i + 1])))
            biases.append(np.zeros(widths[i + 1]))

        if distributional:
            biases[-1][1] = SIGMA_BIAS_INIT

        model = cls(layers, weights, biases, l2_first_layer=l2_first_layer)
        logger.debug('Rede %s criada com %d parâmetros', widths, model.n_parameters)
        return model

    def to_dict(self) -> Dict:
        """Contêiner de checkpoint auto-descritivo (parâmetros em float64)."""
        flat = np.concatenate([a.ravel() for a in self.parameters()])
        return {
            'format_version': CHECKPOINT_FORMAT_VERSION,
            'sigma_transform': self.sigma_transform,
            'l2_first_layer': self.l2_first_layer,
            'layers': [spec.to_dict() for spec in self.layers],
            'parameters': flat.astype(np.float64).tolist()
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'MlpModel':
        version = data.get('format_version')
        if version != CHECKPOINT_FORMAT_VERSION:
            raise ConfigurationError(f'Versão de checkpoint não suportada: {version}')

        layers = [LayerSpec(**spec) for spec in data['layers']]
        flat = np.asarray(data['parameters'], dtype=np.float64)
        expected = sum(s.input_width * s.output_width + s.output_width for s in layers)
        if flat.size != expected:
            raise ConfigurationError(
                f'Checkpoint com {flat.size} parâmetros; esperado {expected}'
            )

        weights, biases, offset = [], [], 0
        for spec in layers:
            n_w = spec.input_width * spec.output_width
            weights.append(flat[offset:offset + n_w].reshape(spec.input_width, spec.output_width))
            offset += n_w
            biases.append(flat[offset:offset + spec.output_width].copy())
            offset += spec.output_width

        return cls(layers, weights, biases,
                   sigma_transform=data['sigma_transform'],
                   l2_first_layer=float(data['l2_first_layer']))

    def save(self, path: Union[str, Path], config_hash: Optional[str] = None) -> Path:
        """Grava o checkpoint; `config_hash` identifica a configuração que o produziu."""
        path = Path(path)
        content = self.to_dict()
        if config_hash is not None:
            content = {'format_version': content.pop('format_version'),
                       'config_hash': config_hash, **content}
        path.write_text(json.dumps(content))
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'MlpModel':
        return cls.from_dict(json.loads(Path(path).read_text()))


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + eˣ) sem overflow."""
    return np.logaddexp(0.0, x)


def _check_input(model: MlpModel, batch_x: np.ndarray) -> np.ndarray:
    batch_x = np.asarray(batch_x, dtype=np.float64)
    if batch_x.ndim == 1:
        batch_x = batch_x.reshape(-1, 1) if model.input_width == 1 else batch_x.reshape(1, -1)
    if batch_x.ndim != 2 or batch_x.shape[1] != model.input_width:
        raise DimensionError(
            f'Camada 0 espera {model.input_width} atributos; '
            f'entrada com formato {batch_x.shape}',
            layer=0
        )
    return batch_x


def _forward_cache(model: MlpModel,
                   batch_x: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Propaga e guarda ativações (entradas de cada camada) e pré-ativações."""
    activations = [batch_x]
    pre_activations = []
    a = batch_x
    for spec, w, b in zip(model.layers, model.weights, model.biases):
        z = a @ w + b
        pre_activations.append(z)
        a = np.maximum(z, 0.0) if spec.activation is Activation.RELU else z
        activations.append(a)
    return activations, pre_activations


def _to_prediction(model: MlpModel, output: np.ndarray) -> PredictionPair:
    if not model.distributional:
        return PredictionPair(mu=output[:, 0].copy())
    raw = output[:, 1].copy()
    return PredictionPair(mu=output[:, 0].copy(), sigma=softplus(raw) + SIGMA_EPS, raw_sigma=raw)


def forward(model: MlpModel, batch_x: np.ndarray) -> PredictionPair:
    """
    Calcula (μ, σ) para cada amostra do lote.

    Args:
        model: Rede
        batch_x: Matriz [n_amostras × n_atributos]

    Returns:
        PredictionPair com σ = softplus(bruto) + 1e-6
    """
    batch_x = _check_input(model, batch_x)
    activations, _ = _forward_cache(model, batch_x)
    return _to_prediction(model, activations[-1])


def backward(model: MlpModel, batch_x: np.ndarray,
             loss_grads: np.ndarray) -> ParameterGradients:
    """
    Backpropagation exato a partir dos gradientes da perda por amostra.

    Args:
        model: Rede
        batch_x: Mesmo lote usado no forward
        loss_grads: [n × 2] com (∂L/∂μ, ∂L/∂σ) por amostra, ou [n] para o modelo MAE.
            A cadeia pelo softplus da cabeça de σ é feita aqui.

    Returns:
        Gradientes de todos os pesos e vieses (inclui 2λW na primeira camada)
    """
    batch_x = _check_input(model, batch_x)
    loss_grads = np.asarray(loss_grads, dtype=np.float64)
    if loss_grads.ndim == 1:
        loss_grads = loss_grads.reshape(-1, 1)
    if loss_grads.shape[0] != batch_x.shape[0]:
        raise DimensionError(
            f'{loss_grads.shape[0]} gradientes para um lote de {batch_x.shape[0]} amostras',
            layer=len(model.layers) - 1
        )

    bad = np.argwhere(~np.isfinite(loss_grads))
    if bad.size:
        idx = int(bad[0, 0])
        raise NumericError(f'Gradiente não finito na amostra {idx}', sample_index=idx)

    activations, pre_activations = _forward_cache(model, batch_x)

    delta = np.zeros_like(pre_activations[-1])
    delta[:, 0] = loss_grads[:, 0]
    if model.distributional:
        # d softplus(r)/dr = sigmoid(r)
        delta[:, 1] = loss_grads[:, 1] * expit(pre_activations[-1][:, 1])

    grad_w: List[np.ndarray] = [None] * len(model.layers)
    grad_b: List[np.ndarray] = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ model.weights[i].T
            if model.layers[i - 1].activation is Activation.RELU:
                delta = delta * (pre_activations[i - 1] > 0)

    if model.l2_first_layer > 0:
        grad_w[0] = grad_w[0] + 2.0 * model.l2_first_layer * model.weights[0]

    return ParameterGradients(weights=grad_w, biases=grad_b)
