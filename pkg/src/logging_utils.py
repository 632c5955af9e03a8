"""
Configuração de logging da linha de comando.
"""
import logging
from typing import Union

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def setup_logging(level: Union[int, str] = logging.INFO) -> logging.Logger:
    """
    Configura um único handler de console para o pacote `src`.

    Args:
        level: Nível de log (nome ou número)

    Returns:
        Logger raiz do pacote
    """
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)

    logger = logging.getLogger('src')
    logger.setLevel(level)

    # Evita handlers duplicados em chamadas repetidas
    if not any(getattr(h, '_can_handler', False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._can_handler = True
        logger.addHandler(handler)

    return logger
