"""
Linha de comando: gera dados, treina ensembles, avalia e reproduz experimentos.

    python -m src.cli generate --experiment enso_pid --out runs/enso_pid
    python -m src.cli train --config runs/enso_pid/config.json --jobs 4
    python -m src.cli evaluate runs/enso_pid/runs --out runs/enso_pid/evaluation
    python -m src.cli reproduce oned --seed 7
    python -m src.cli describe runs/oned/data
"""
import argparse
import json
import logging
import shutil
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from src.analysis.reports import RUN_FILE, ExperimentReport, evaluate_experiment, save_run
from src.config import (EXPERIMENTS, DataConfig, ExperimentConfig, RunSpec, content_hash,
                        default_config)
from src.errors import AbstentionError, ConfigurationError, OutputExistsError, UsageError
from src.logging_utils import setup_logging
from src.synthdata.experiments import generate_splits
from src.synthdata.storage import (METADATA_FILE, describe, load_splits, read_metadata,
                                   save_splits)
from src.training.trainer import Trainer, run_parallel

logger = logging.getLogger(__name__)

DATA_DIR = 'data'
RUNS_DIR = 'runs'
EVALUATION_DIR = 'evaluation'
CONFIG_FILE = 'config.json'
ERROR_FILE = 'error.json'

# Partições carregadas uma vez por processo do pool
_worker_data = {}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser que levanta UsageError em vez de sair."""

    def error(self, message):
        raise UsageError(message)


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Configuração efetiva: arquivo (--config) ou padrão do experimento, com
    --seed e --out aplicados por cima.
    """
    if getattr(args, 'config', None):
        cfg = ExperimentConfig.load(args.config)
    elif getattr(args, 'experiment', None):
        cfg = default_config(args.experiment)
    else:
        raise UsageError('Informe --config ou --experiment')

    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out:
        cfg = replace(cfg, output_dir=str(args.out))
    return cfg


def cmd_generate(cfg: ExperimentConfig, force: bool = False) -> Path:
    """
    Gera treino/validação/teste e grava em <saída>/data.

    Returns:
        Diretório dos dados
    """
    out = Path(cfg.output_dir)
    data_dir = out / DATA_DIR
    if (data_dir / METADATA_FILE).exists() and not force:
        raise OutputExistsError(f'Dados já existem em {data_dir}; use --force',
                                path=str(data_dir))

    config_hash = cfg.config_hash()
    logger.info('Gerando dados de %s (hash %s)', cfg.experiment, config_hash)
    splits = generate_splits(cfg.data, config_hash)
    save_splits(splits, data_dir, config_hash, cfg.data.to_dict(), force=True)
    cfg.save(out / CONFIG_FILE)
    return data_dir


def check_data_matches(cfg: ExperimentConfig, data_dir: Path) -> Dict:
    """
    Confere se os dados gravados vieram da seção `data` da configuração.

    Returns:
        Metadados dos dados

    Raises:
        MissingCheckpointError: Dados ausentes
        ConfigurationError: Dados gerados por outra configuração
    """
    metadata = read_metadata(data_dir)
    stored = content_hash(DataConfig(**metadata['generator']).to_dict())
    if stored != cfg.data_hash():
        raise ConfigurationError(
            f'Os dados em {data_dir} foram gerados por outra configuração '
            f'(dados {stored}, configuração {cfg.data_hash()}); rode generate --force',
            path=str(data_dir), data_hash=stored, expected_hash=cfg.data_hash()
        )
    return metadata


def _init_worker(data_dir: str, log_level: int):
    setup_logging(log_level)
    _worker_data['splits'] = load_splits(data_dir)


def _train_one(spec: RunSpec, run_dir: str, data_dir: str, config_hash: str) -> Dict:
    """Treina e grava uma execução; erros do domínio viram um resultado com falha."""
    result = {'name': spec.name, 'tag': spec.tag, 'seed': spec.train.seed,
              'setpoint': spec.setpoint, 'status': 'ok', 'best_epoch': None,
              'realized_coverage': None, 'error': None}
    try:
        record = Trainer(spec.train, name=spec.name, tag=spec.tag).fit(_worker_data['splits'])
        save_run(record, run_dir, config_hash, spec.train.to_dict(), data_dir, spec.setpoint)
        result.update(best_epoch=record.best_epoch, realized_coverage=record.realized_coverage)
    except AbstentionError as exc:
        Path(run_dir).mkdir(parents=True, exist_ok=True)
        (Path(run_dir) / ERROR_FILE).write_text(json.dumps(
            {**exc.to_dict(), 'config_hash': config_hash}, indent=2, sort_keys=True, default=str))
        result.update(status='failed', error=exc.to_dict())
    return result


def cmd_train(cfg: ExperimentConfig, jobs: int = 1, force: bool = False) -> List[Dict]:
    """
    Treina todas as execuções do experimento; a falha de uma não interrompe as demais.

    Returns:
        Um resultado por execução (status ok/failed), também gravado em runs/runs.csv
    """
    out = Path(cfg.output_dir)
    data_dir = out / DATA_DIR
    check_data_matches(cfg, data_dir)

    specs = cfg.expand_runs()
    runs_dir = out / RUNS_DIR
    existing = [s.name for s in specs if (runs_dir / s.name / RUN_FILE).exists()]
    if existing and not force:
        raise OutputExistsError(f'{len(existing)} execuções já existem em {runs_dir}; use --force',
                                path=str(runs_dir))
    for spec in specs:
        if (runs_dir / spec.name).exists():
            shutil.rmtree(runs_dir / spec.name)

    cfg.save(out / CONFIG_FILE)
    config_hash = cfg.config_hash()
    logger.info('Treinando %d execuções de %s com %d processo(s)', len(specs), cfg.experiment, jobs)

    tasks = [(spec, str(runs_dir / spec.name), str(data_dir), config_hash) for spec in specs]
    log_level = logging.getLogger('src').getEffectiveLevel()
    results = run_parallel(_train_one, tasks, jobs, initializer=_init_worker,
                           initargs=(str(data_dir), log_level))

    table = pd.DataFrame(results)
    table['error'] = table['error'].map(lambda e: None if e is None else e['error'])
    table['config_hash'] = config_hash
    runs_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(runs_dir / 'runs.csv', index=False)

    for result in results:
        if result['status'] == 'failed':
            logger.warning('Execução %s falhou: %s', result['name'], result['error']['message'])
    return results


def find_run_dirs(paths: Sequence[str]) -> List[Path]:
    """Expande diretórios que agrupam execuções (contêm subdiretórios com run.json)."""
    found = []
    for path in map(Path, paths):
        if (path / RUN_FILE).exists() or not path.is_dir():
            found.append(path)
        else:
            children = sorted(p.parent for p in path.glob(f'*/{RUN_FILE}'))
            found.extend(children or [path])
    return found


def cmd_evaluate(run_dirs: Sequence[str], out: str) -> ExperimentReport:
    """Avalia as execuções e grava tabelas agregadas e figuras SVG em `out`."""
    if not run_dirs:
        raise UsageError('Nenhum diretório de execução informado')
    report = evaluate_experiment(find_run_dirs(run_dirs), out)
    logger.info('Avaliação gravada em %s', out)
    return report


def cmd_reproduce(cfg: ExperimentConfig, jobs: int = 1, force: bool = False) -> List[Dict]:
    """generate + train + evaluate com a mesma configuração."""
    out = Path(cfg.output_dir)
    cmd_generate(cfg, force=force)
    results = cmd_train(cfg, jobs=jobs, force=force)
    ok = [str(out / RUNS_DIR / r['name']) for r in results if r['status'] == 'ok']
    if ok:
        cmd_evaluate(ok, str(out / EVALUATION_DIR))
    return results


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Arquivo JSON do experimento')
    common.add_argument('--seed', type=int, default=None, help='Semente de dados e treino')
    common.add_argument('--jobs', type=int, default=1, help='Processos em paralelo')
    common.add_argument('--force', action='store_true', help='Sobrescreve saídas existentes')
    common.add_argument('--out', help='Diretório de saída')

    parser = _Parser(prog='python -m src.cli',
                     description='Redes de regressão com abstenção controlada')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    sub = parser.add_subparsers(dest='command', required=True)

    for name, text in (('generate', 'Gera os dados do experimento'),
                       ('train', 'Treina as execuções do experimento')):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument('--experiment', choices=EXPERIMENTS)

    p = sub.add_parser('evaluate', parents=[common], help='Avalia diretórios de execução')
    p.add_argument('run_dirs', nargs='*')

    p = sub.add_parser('reproduce', parents=[common], help='generate + train + evaluate')
    p.add_argument('experiment', choices=EXPERIMENTS)

    p = sub.add_parser('describe', help='Resumo dos arquivos de dados')
    p.add_argument('data_dir')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Ponto de entrada. Erros saem como JSON no stderr.

    Returns:
        0 em sucesso, 1 em falha, 2 em erro de uso
    """
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.log_level)

        if args.command == 'describe':
            print(describe(args.data_dir).to_string())
            return 0
        if args.command == 'evaluate':
            if not args.run_dirs:
                raise UsageError('Nenhum diretório de execução informado')
            out = args.out or str(Path(args.run_dirs[0]).parent / EVALUATION_DIR)
            cmd_evaluate(args.run_dirs, out)
            return 0

        if args.jobs < 1:
            raise UsageError('--jobs deve ser >= 1')
        cfg = resolve_config(args)
        if args.command == 'reproduce' and cfg.experiment != args.experiment:
            raise UsageError(f'--config descreve {cfg.experiment}, não {args.experiment}')
        if args.command == 'generate':
            cmd_generate(cfg, force=args.force)
            return 0
        if args.command == 'train':
            results = cmd_train(cfg, jobs=args.jobs, force=args.force)
        else:
            results = cmd_reproduce(cfg, jobs=args.jobs, force=args.force)

        failed = [r for r in results if r['status'] == 'failed']
        for result in failed:
            print(json.dumps({'run': result['name'], **result['error']}, default=str),
                  file=sys.stderr)
        return 1 if failed else 0

    except UsageError as exc:
        print(json.dumps(exc.to_dict(), default=str), file=sys.stderr)
        return 2
    except AbstentionError as exc:
        print(json.dumps(exc.to_dict(), default=str), file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
