"""
Persistência das execuções e tabelas de avaliação (por execução e agregadas).

Layout de um diretório de execução:
    config.json          configuração de treino + hash do experimento
    metrics.csv          epoch, stage, train_loss, val_loss, val_abstention, alpha, config_hash
    control_steps.csv    passos do PID (somente CAN no modo pid)
    abstention.json      κ, τ e percentis de σ ao fim do spin-up (somente CAN)
    checkpoint.json      melhor modelo
    run.json             resumo (melhor época, cobertura realizada, duração, caminhos)
    evaluation.csv       coverage, mae, n_covered, tag, seed, config_hash
    calibration.csv      bin_left, bin_right, count, split, config_hash
    predictions.csv      y, mu, sigma, flag, covered (teste)
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.analysis.evaluate import (DEFAULT_COVERAGE_LEVELS, CanPoint, CoverageCurve,
                                   abstained_flag_fraction, can_operating_point,
                                   coverage_mae_spearman, ensemble_envelope,
                                   flag_enrichment, mae_at_coverage, tau_coverage,
                                   threshold_coverage, zscores)
from src.errors import MissingCheckpointError, UsageError
from src.model.net import MlpModel, forward
from src.synthdata.experiments import DataSplits
from src.training.trainer import RunRecord
from src.visualization.figures import coverage_figure, save_svg, zscore_figure

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = 'checkpoint.json'
RUN_FILE = 'run.json'
# Cobertura usada para marcar amostras 'covered' nos modelos sem τ
POSTHOC_COVERAGE = 0.2


def _csv(frame: pd.DataFrame, path: Path, config_hash: str) -> Path:
    frame = frame.copy()
    frame['config_hash'] = config_hash
    frame.to_csv(path, index=False)
    return path


def save_run(record: RunRecord, run_dir: Union[str, Path], config_hash: str,
             train_config: Dict, data_dir: str, setpoint: Optional[float] = None) -> RunRecord:
    """
    Grava o RunRecord no diretório da execução e preenche `record.paths`.

    Args:
        record: Resultado do treinamento
        run_dir: Diretório da execução
        config_hash: Hash da configuração do experimento
        train_config: Configuração de treino efetiva
        data_dir: Diretório dos dados usados
        setpoint: Setpoint de abstenção (CAN pid)

    Returns:
        O mesmo record, com os caminhos gravados
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    record.config_hash = config_hash

    paths = {
        'config': run_dir / 'config.json',
        'metrics': run_dir / 'metrics.csv',
        'checkpoint': run_dir / CHECKPOINT_FILE
    }
    paths['config'].write_text(json.dumps(
        {'config_hash': config_hash, 'train': train_config}, indent=2, sort_keys=True))
    _csv(record.history_frame(), paths['metrics'], config_hash)
    record.model.save(paths['checkpoint'], config_hash)

    if record.abstention is not None:
        paths['abstention'] = run_dir / 'abstention.json'
        paths['abstention'].write_text(json.dumps(
            {'config_hash': config_hash, **record.abstention.to_dict()}, indent=2, sort_keys=True))
    if record.control_steps:
        paths['control_steps'] = _csv(record.control_frame(), run_dir / 'control_steps.csv',
                                      config_hash)

    record.paths = {k: str(v) for k, v in paths.items()}
    summary = {
        'name': record.name,
        'tag': record.tag,
        'seed': record.seed,
        'config_hash': config_hash,
        'data_dir': str(data_dir),
        'setpoint': setpoint,
        'best_epoch': record.best_epoch,
        'best_val_loss': record.best_val_loss,
        'val_abstention': record.val_abstention,
        'realized_coverage': record.realized_coverage,
        'tau': None if record.abstention is None else record.abstention.tau,
        'duration_s': record.duration_s,
        'paths': record.paths
    }
    (run_dir / RUN_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True))
    return record


@dataclass
class LoadedRun:
    """Execução lida do disco para avaliação."""
    run_dir: Path
    name: str
    tag: str
    seed: int
    config_hash: str
    model: MlpModel
    data_dir: str
    tau: Optional[float] = None
    setpoint: Optional[float] = None


def load_run(run_dir: Union[str, Path]) -> LoadedRun:
    """Lê resumo e checkpoint de uma execução."""
    run_dir = Path(run_dir)
    checkpoint = run_dir / CHECKPOINT_FILE
    if not checkpoint.exists() or not (run_dir / RUN_FILE).exists():
        raise MissingCheckpointError(f'Checkpoint ausente em {run_dir}', path=str(checkpoint))
    summary = json.loads((run_dir / RUN_FILE).read_text())
    return LoadedRun(
        run_dir=run_dir, name=summary['name'], tag=summary['tag'], seed=summary['seed'],
        config_hash=summary['config_hash'], model=MlpModel.load(checkpoint),
        data_dir=summary['data_dir'], tau=summary.get('tau'), setpoint=summary.get('setpoint')
    )


@dataclass
class RunEvaluation:
    """Tabelas de avaliação de uma execução no conjunto de teste."""
    run: LoadedRun
    curve: CoverageCurve
    calibration: pd.DataFrame
    predictions: pd.DataFrame
    can_point: Optional[CanPoint] = None
    summary: Optional[Dict] = None


def evaluate_run(run: LoadedRun, splits: DataSplits,
                 levels: Sequence[float] = DEFAULT_COVERAGE_LEVELS) -> RunEvaluation:
    """
    Avalia uma execução: curva de cobertura, calibração, ponto da CAN e previsões.

    Args:
        run: Execução carregada
        splits: Partições de dados
        levels: Níveis de cobertura

    Returns:
        RunEvaluation (também gravada no diretório da execução)
    """
    test = splits.test
    pred = forward(run.model, test.x)
    curve = mae_at_coverage(pred, test.y, levels, tag=run.tag, seed=run.seed)

    calibration_frames = []
    summary = {'name': run.name, 'tag': run.tag, 'seed': run.seed, 'setpoint': run.setpoint,
               'mae_all': float(np.mean(np.abs(test.y - pred.mu)))}
    if pred.has_sigma:
        for name, part in splits.items():
            part_pred = pred if name == 'test' else forward(run.model, part.x)
            stats = zscores(part_pred, part.y, split=name)
            calibration_frames.append(stats.to_frame())
            summary[f'z_mean_{name}'] = stats.mean
            summary[f'z_std_{name}'] = stats.std
        summary['spearman_coverage_mae'] = coverage_mae_spearman(curve)

    can_point = None
    if run.tau is not None and pred.has_sigma:
        can_point = can_operating_point(pred, test.y, run.tau, tag=run.tag, seed=run.seed,
                                        setpoint=run.setpoint)
        covered = tau_coverage(pred, run.tau)
        summary.update(coverage=can_point.coverage, mae_covered=can_point.mae)
    elif pred.has_sigma:
        covered = threshold_coverage(pred, POSTHOC_COVERAGE)
    else:
        covered = np.arange(len(test))

    summary['signal_enrichment'] = flag_enrichment(test.flags, covered, 'signal')
    summary['abstained_corrupted_fraction'] = abstained_flag_fraction(test.flags, covered,
                                                                      'corrupted')

    covered_mask = np.zeros(len(test), dtype=bool)
    covered_mask[covered] = True
    predictions = pd.DataFrame({
        'y': test.y,
        'mu': pred.mu,
        'sigma': pred.sigma if pred.has_sigma else np.nan,
        'flag': test.flags,
        'covered': covered_mask
    })
    calibration = (pd.concat(calibration_frames, ignore_index=True) if calibration_frames
                   else pd.DataFrame(columns=['bin_left', 'bin_right', 'count', 'split']))

    _csv(curve.to_frame(), run.run_dir / 'evaluation.csv', run.config_hash)
    _csv(calibration, run.run_dir / 'calibration.csv', run.config_hash)
    _csv(predictions, run.run_dir / 'predictions.csv', run.config_hash)

    return RunEvaluation(run, curve, calibration, predictions, can_point, summary)


@dataclass
class ExperimentReport:
    """Tabelas agregadas de um conjunto de execuções."""
    curves: pd.DataFrame
    envelope: Optional[pd.DataFrame]
    can_points: pd.DataFrame
    summary: pd.DataFrame
    evaluations: List[RunEvaluation]


def evaluate_experiment(run_dirs: Sequence[Union[str, Path]], out_dir: Union[str, Path],
                        splits: Optional[DataSplits] = None,
                        levels: Sequence[float] = DEFAULT_COVERAGE_LEVELS) -> ExperimentReport:
    """
    Avalia várias execuções e grava as tabelas agregadas.

    Args:
        run_dirs: Diretórios das execuções
        out_dir: Diretório das tabelas agregadas
        splits: Partições (se None, lidas de `data_dir` de cada execução)
        levels: Níveis de cobertura

    Returns:
        ExperimentReport
    """
    from src.synthdata.storage import load_splits

    if not run_dirs:
        raise UsageError('Nenhum diretório de execução informado')
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cache: Dict[str, DataSplits] = {}
    evaluations = []
    for run_dir in sorted(Path(d) for d in run_dirs):
        run = load_run(run_dir)
        data = splits
        if data is None:
            data = cache.setdefault(run.data_dir, load_splits(run.data_dir))
        evaluations.append(evaluate_run(run, data, levels))
        logger.info('Avaliada %s', run.name)

    config_hash = evaluations[0].run.config_hash
    curves = pd.concat([e.curve.to_frame() for e in evaluations], ignore_index=True)
    baseline_curves = [e.curve for e in evaluations if e.run.tag == 'baseline']
    envelope = ensemble_envelope(baseline_curves).to_frame() if baseline_curves else None
    can_points = pd.DataFrame(
        [vars(e.can_point) for e in evaluations if e.can_point is not None],
        columns=['coverage', 'mae', 'n_covered', 'tag', 'seed', 'setpoint']
    )
    summary = pd.DataFrame([e.summary for e in evaluations])

    _csv(curves, out_dir / 'coverage_curves.csv', config_hash)
    if envelope is not None:
        _csv(envelope, out_dir / 'envelope.csv', config_hash)
    _csv(can_points, out_dir / 'can_points.csv', config_hash)
    _csv(summary, out_dir / 'summary.csv', config_hash)

    title = f'MAE × cobertura ({config_hash})'
    save_svg(coverage_figure(curves, envelope, can_points, title), out_dir / 'coverage.svg',
             config_hash)
    calibration = pd.concat([e.calibration for e in evaluations if e.run.tag == 'baseline']
                            or [pd.DataFrame(columns=['bin_left', 'bin_right', 'count', 'split'])],
                            ignore_index=True)
    for name in ('train', 'val', 'test'):
        figure = zscore_figure(calibration, split=name,
                               title=f'Erros padronizados ({name}, {config_hash})')
        save_svg(figure, out_dir / f'zscores_{name}.svg', config_hash)

    return ExperimentReport(curves, envelope, can_points, summary, evaluations)


def list_runs(experiment_dir: Union[str, Path]) -> pd.DataFrame:
    """
    Resumo de todas as execuções de um experimento (uma linha por run.json).

    Args:
        experiment_dir: Diretório de saída do experimento (contém runs/)

    Returns:
        DataFrame ordenado por nome, com a coluna run_dir
    """
    columns = ['name', 'tag', 'seed', 'setpoint', 'best_epoch', 'best_val_loss',
               'val_abstention', 'realized_coverage', 'tau', 'run_dir']
    rows = []
    for path in sorted(Path(experiment_dir).glob(f'runs/*/{RUN_FILE}')):
        summary = json.loads(path.read_text())
        rows.append({**{k: summary.get(k) for k in columns[:-1]}, 'run_dir': str(path.parent)})
    return pd.DataFrame(rows, columns=columns)


def read_run_tables(run_dir: Union[str, Path]) -> Dict[str, pd.DataFrame]:
    """Tabelas CSV disponíveis de uma execução, pelo nome do arquivo sem extensão."""
    run_dir = Path(run_dir)
    tables = {}
    for name in ('metrics', 'control_steps', 'evaluation', 'calibration', 'predictions'):
        path = run_dir / f'{name}.csv'
        if path.exists():
            tables[name] = pd.read_csv(path)
    return tables
