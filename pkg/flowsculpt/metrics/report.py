"""
Method comparison over a target set and the evaluation target generator.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from tqdm import tqdm

from flow.forward import NUM_CLASSES, render

from .complexity import perimetric_complexity
from .exceptions import MetricInputError
from .similarity import SsimParams, pmr, ssim

logger = logging.getLogger(__name__)

REPORT_HEADER = ('target_id', 'method', 'pmr', 'ssim')


@dataclass(frozen=True)
class EvalRow:
    target_id: str
    method: str
    pmr: float
    ssim: float
    sequence: tuple = ()
    error: str = ''


@dataclass(frozen=True)
class EvalReport:
    """
    Attributes:
        rows (list[EvalRow]): One row per (target, method), targets outermost.
        averages (dict[str, tuple[float, float]]): Mean PMR and SSIM per
            method over its successful rows.
    """
    rows: list
    averages: dict

    def ranking(self):
        """
        Method names by mean PMR, best first.
        """
        def key(name):
            mean_pmr = self.averages[name][0]
            return (math.isnan(mean_pmr), -mean_pmr if not math.isnan(mean_pmr) else 0.0)
        return sorted(self.averages, key=key)


def _mean(values):
    finite = [v for v in values if not math.isnan(v)]
    return float(np.mean(finite)) if finite else math.nan


def eval_report(targets, methods, library, target_ids=None, ssim_params=None):
    """
    Scores every method on every target by re-rendering its predicted sequence.

    Args:
        targets (list[np.ndarray]): Target shapes.
        methods (dict[str, Callable]): Name -> callable(target) returning a pillar sequence.
        library (PillarLibrary): Maps used to re-render predictions.
        target_ids (list[str] | None): Row labels (target_00, target_01, ... by default).
        ssim_params (SsimParams | None): SSIM window settings.
    Returns:
        EvalReport: Rows in target order and per-method averages.
    """
    if not targets:
        raise MetricInputError('evaluation needs at least one target')
    if not methods:
        raise MetricInputError('evaluation needs at least one method')
    target_ids = target_ids or [f'target_{i:02d}' for i in range(len(targets))]
    ssim_params = ssim_params or SsimParams()
    progress = settings.FLOWSCULPT['PROGRESS']

    rows = []
    for target_id, target in tqdm(list(zip(target_ids, targets)), desc='eval', leave=False, disable=not progress):
        for name, predictor in methods.items():
            try:
                sequence = tuple(predictor(target))
                shape = render(list(sequence), library)
                rows.append(EvalRow(target_id, name, pmr(target, shape), ssim(target, shape, ssim_params), sequence))
            except Exception as exc:
                # a failing predictor costs its row, not the report
                logger.warning('%s failed on %s: %s', name, target_id, exc)
                rows.append(EvalRow(target_id, name, math.nan, math.nan, error=str(exc)))

    averages = {}
    for name in methods:
        mine = [row for row in rows if row.method == name]
        averages[name] = (_mean([row.pmr for row in mine]), _mean([row.ssim for row in mine]))
        logger.info('%s: mean pmr %.4f, mean ssim %.4f', name, *averages[name])
    return EvalReport(rows=rows, averages=averages)


def _number(value):
    return 'nan' if math.isnan(value) else f'{value:.6f}'


def report_to_csv(report):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(REPORT_HEADER)
    for row in report.rows:
        writer.writerow((row.target_id, row.method, _number(row.pmr), _number(row.ssim)))
    for name, (mean_pmr, mean_ssim) in report.averages.items():
        writer.writerow(('average', name, _number(mean_pmr), _number(mean_ssim)))
    return buffer.getvalue()


def make_targets(n, seed, library, pillars=10, min_complexity=None, max_draws=None):
    """
    Renders seeded random sequences into evaluation targets.

    With `min_complexity`, draws continue until `n` targets exceed it.

    Returns:
        list[tuple[list[int], np.ndarray]]: Generating sequence and target shape.
    Raises:
        MetricInputError: If the gate rejects too many draws.
    """
    if n < 1 or pillars < 1:
        raise MetricInputError('need at least one target of at least one pillar')
    max_draws = max_draws or 1000 * n
    targets = []
    draw = 0
    while len(targets) < n:
        if draw >= max_draws:
            raise MetricInputError(
                f'only {len(targets)} of {n} targets passed complexity > {min_complexity} in {draw} draws'
            )
        rng = np.random.default_rng([seed, draw])
        draw += 1
        sequence = [int(k) for k in rng.integers(1, NUM_CLASSES + 1, size=pillars)]
        shape = render(sequence, library)
        if min_complexity is not None:
            if not shape.any() or perimetric_complexity(shape).complexity <= min_complexity:
                continue
        targets.append((sequence, shape))
    logger.info('picked %d targets from %d draws (seed %d)', n, draw, seed)
    return targets
