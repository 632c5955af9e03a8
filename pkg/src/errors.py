"""
Hierarquia de exceções do framework de redes com abstenção.
"""
from typing import Any, Dict, Optional


class AbstentionError(Exception):
    """Erro base de todo o pacote."""

    def __init__(self, message: str, **fields: Any):
        super().__init__(message)
        self.message = message
        self.fields = fields

    def to_dict(self) -> Dict[str, Any]:
        """
        Representação serializável usada pela CLI.

        Returns:
            Dicionário com nome da classe, mensagem e campos extras
        """
        return {'error': type(self).__name__, 'message': self.message, **self.fields}

    def __reduce__(self):
        # Permite atravessar o pool de processos com os campos extras
        return (_restore_error, (type(self), self.message, self.fields))


def _restore_error(cls, message: str, fields: Dict[str, Any]) -> AbstentionError:
    error = cls.__new__(cls)
    AbstentionError.__init__(error, message, **fields)
    for key, value in fields.items():
        setattr(error, key, value)
    return error


class DimensionError(AbstentionError, ValueError):
    """Entrada com largura incompatível com uma camada."""

    def __init__(self, message: str, layer: int):
        super().__init__(message, layer=layer)
        self.layer = layer


class NumericError(AbstentionError, ArithmeticError):
    """Valor não finito encontrado durante o backward."""

    def __init__(self, message: str, sample_index: int):
        super().__init__(message, sample_index=sample_index)
        self.sample_index = sample_index


class DomainError(AbstentionError, ValueError):
    """Argumento fora do domínio da operação."""


class ConfigurationError(AbstentionError, ValueError):
    """Configuração inválida ou inconsistente."""


class TrainingDivergedError(AbstentionError):
    """O treinamento produziu valores não finitos."""


class SetpointUnreachableError(AbstentionError):
    """Nenhuma época ficou dentro da faixa de elegibilidade do setpoint."""

    def __init__(self, message: str, closest_fraction: Optional[float]):
        super().__init__(message, closest_fraction=closest_fraction)
        self.closest_fraction = closest_fraction


class NuggetError(AbstentionError, ArithmeticError):
    """Falha na decomposição de Cholesky da matriz de correlação."""

    def __init__(self, message: str, suggested_nugget: float):
        super().__init__(message, suggested_nugget=suggested_nugget)
        self.suggested_nugget = suggested_nugget


class AlignmentError(AbstentionError, ValueError):
    """Curvas de cobertura com níveis diferentes."""


class MissingCheckpointError(AbstentionError, FileNotFoundError):
    """Diretório de execução sem checkpoint."""

    def __init__(self, message: str, path: str):
        super().__init__(message, path=path)
        self.path = path


class OutputExistsError(AbstentionError, FileExistsError):
    """Saída já existe e --force não foi informado."""

    def __init__(self, message: str, path: str):
        super().__init__(message, path=path)
        self.path = path


class UsageError(AbstentionError):
    """Uso incorreto da linha de comando."""


class EnsembleMemberError(AbstentionError):
    """Falha de um membro do ensemble, com o índice da execução."""

    def __init__(self, message: str, run_index: int, cause: Optional[BaseException] = None):
        fields: Dict[str, Any] = {'run_index': run_index}
        if isinstance(cause, AbstentionError):
            fields['cause'] = cause.to_dict()
        elif cause is not None:
            fields['cause'] = {'error': type(cause).__name__, 'message': str(cause)}
        super().__init__(message, **fields)
        self.run_index = run_index
        self.cause = cause
