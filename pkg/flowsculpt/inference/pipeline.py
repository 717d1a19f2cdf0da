"""
Greedy two-stage pillar sequence inference.

Stage A grows the sequence toward the bridging shape predicted for the
target; Stage B continues toward the target itself. Each step predicts one
pillar from the current render and the stage target, appends it and
re-renders.
"""
import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings

from architectures.predictors import predict_bridge, predict_pillar
from flow.forward import MAX_SEQUENCE_LENGTH, NUM_CLASSES, render, validate_sequence
from metrics.similarity import pmr
from networks.exceptions import ShapeMismatchError

from .exceptions import MissingModelError, SequenceLimitError

logger = logging.getLogger(__name__)

STAGE_A = 'A'
STAGE_B = 'B'


class Mode(enum.Enum):
    APN_ONLY = 'apn'
    APN_C_ONLY = 'apnc'
    APN_ITN = 'apn+itn'
    ORACLE = 'oracle'
    ORACLE_ITN = 'oracle+itn'

    @property
    def uses_bridge(self):
        return self in (Mode.APN_ITN, Mode.ORACLE_ITN)

    @property
    def uses_oracle(self):
        return self in (Mode.ORACLE, Mode.ORACLE_ITN)

    @property
    def classifier(self):
        """
        Key of the step classifier in the models mapping (None for the oracle).
        """
        if self.uses_oracle:
            return None
        return 'apnc' if self is Mode.APN_C_ONLY else 'apn'


@dataclass(frozen=True)
class InferenceConfig:
    """
    Attributes:
        tau_a (float): PMR to the bridging shape that ends Stage A.
        tau_b (float): PMR to the target that ends Stage B.
        max_steps_total (int): Pillars appended over both stages.
        max_steps_stage_a (int): Pillars Stage A may append.
        no_improve_patience (int): Consecutive steps without a better stage
            PMR before a stage gives up.
        mode (Mode): Predictor combination.
        prune (bool): Remove redundant pillars from the returned sequence.
    """
    tau_a: float = 0.95
    tau_b: float = 0.99
    max_steps_total: int = 20
    max_steps_stage_a: int = 10
    no_improve_patience: int = 3
    mode: Mode = Mode.APN_ITN
    prune: bool = False

    def __post_init__(self):
        for name in ('tau_a', 'tau_b'):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f'{name} must lie in (0, 1], got {value}')
        for name in ('max_steps_total', 'max_steps_stage_a', 'no_improve_patience'):
            if getattr(self, name) < 1:
                raise ValueError(f'{name} must be at least 1, got {getattr(self, name)}')
        if self.max_steps_total > MAX_SEQUENCE_LENGTH:
            raise ValueError(f'max_steps_total cannot exceed {MAX_SEQUENCE_LENGTH}')

    @classmethod
    def from_settings(cls, **overrides):
        """
        Defaults from settings.FLOWSCULPT['INFERENCE'], then `overrides`.
        """
        values = dict(settings.FLOWSCULPT['INFERENCE'])
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


@dataclass(frozen=True)
class StepRecord:
    step: int
    stage: str
    pillar: int
    posterior_max: float
    pmr_stage: float
    pmr_final: float


@dataclass
class InferenceTrace:
    """
    Attributes:
        records (list[StepRecord]): One record per appended pillar.
        final_sequence (list[int]): Everything appended, in order.
        best_sequence (list[int]): Prefix with the best PMR to the target.
        initial_pmr (float): PMR of the empty sequence to the target.
        bridge (np.ndarray | None): Stage A target, when one was used.
    """
    records: list = field(default_factory=list)
    final_sequence: list = field(default_factory=list)
    best_sequence: list = field(default_factory=list)
    initial_pmr: float = 0.0
    bridge: np.ndarray | None = None


def _candidate_scores(sequence, target, library):
    return np.array([pmr(render(list(sequence) + [k], library), target) for k in range(1, NUM_CLASSES + 1)])


def oracle_step(sequence, target, library):
    """
    Exhaustive one-step lookahead: the pillar whose render is closest to
    `target`, lowest index on ties.

    Raises:
        SequenceLimitError: If the sequence is already at the length cap.
    """
    if len(sequence) >= MAX_SEQUENCE_LENGTH:
        raise SequenceLimitError(f'sequence already holds {MAX_SEQUENCE_LENGTH} pillars')
    return int(np.argmax(_candidate_scores(sequence, target, library))) + 1


def oracle_predictor(library):
    """
    Predictor whose confidence is the PMR its best candidate reaches.
    """
    def predict(sequence, current, stage_target):
        if len(sequence) >= MAX_SEQUENCE_LENGTH:
            raise SequenceLimitError(f'sequence already holds {MAX_SEQUENCE_LENGTH} pillars')
        scores = _candidate_scores(sequence, stage_target, library)
        best = int(np.argmax(scores))
        return best + 1, float(scores[best])
    return predict


def network_predictor(model):
    def predict(sequence, current, stage_target):
        index, posterior = predict_pillar(model, current, stage_target)
        return index, float(posterior.max())
    return predict


def run_stage(sequence, stage_target, predictor, config, budget, library,
              stage=STAGE_B, final_target=None, first_step=1):
    """
    Appends predicted pillars until the stage target is matched, the budget
    runs out, or the stage PMR stops improving.

    Args:
        sequence (list[int]): Starting sequence.
        stage_target (np.ndarray): Shape this stage steers toward.
        predictor (Callable): (sequence, current shape, stage target) -> (pillar, confidence).
        config (InferenceConfig): Thresholds and patience.
        budget (int): Most pillars this stage may append.
        library (PillarLibrary): Deformation maps.
        stage (str): 'A' (threshold tau_a) or 'B' (threshold tau_b).
        final_target (np.ndarray | None): Shape scored in the trace's
            pmr_final column (the stage target when None).
        first_step (int): Step number of the first record.
    Returns:
        tuple[list[int], list[StepRecord]]: Extended sequence and its records.
    """
    if budget < 1:
        raise ValueError(f'stage budget must be at least 1, got {budget}')
    validate_sequence(sequence)
    final_target = stage_target if final_target is None else final_target
    threshold = config.tau_a if stage == STAGE_A else config.tau_b
    sequence = list(sequence)
    current = render(sequence, library)
    best_stage = pmr(current, stage_target)
    records = []
    if best_stage >= threshold:
        return sequence, records

    stale = 0
    for _ in range(budget):
        if len(sequence) >= MAX_SEQUENCE_LENGTH:
            break
        pillar, confidence = predictor(sequence, current, stage_target)
        sequence.append(pillar)
        current = render(sequence, library)
        record = StepRecord(
            step=first_step + len(records),
            stage=stage,
            pillar=pillar,
            posterior_max=confidence,
            pmr_stage=pmr(current, stage_target),
            pmr_final=pmr(current, final_target),
        )
        records.append(record)
        logger.debug('step %d stage %s: pillar %d (pmr %.4f)', record.step, stage, pillar, record.pmr_stage)
        if record.pmr_stage >= threshold:
            break
        if record.pmr_stage > best_stage:
            best_stage, stale = record.pmr_stage, 0
        else:
            stale += 1
            if stale >= config.no_improve_patience:
                break
    return sequence, records


def _best_prefix(sequence, records, initial_pmr):
    best_length, best_pmr = 0, initial_pmr
    for length, record in enumerate(records, start=1):
        # strict comparison keeps the earliest prefix on ties
        if record.pmr_final > best_pmr:
            best_length, best_pmr = length, record.pmr_final
    return sequence[:best_length]


def run_pipeline(target, library, config, models=None):
    """
    Infers a pillar sequence whose render approximates `target`.

    Args:
        target (np.ndarray): Final target shape.
        library (PillarLibrary): Deformation maps.
        config (InferenceConfig): Mode, thresholds and budgets.
        models (dict | None): 'apn', 'apnc' and 'itn' models as the mode requires.
    Returns:
        tuple[list[int], InferenceTrace]: Best-so-far (optionally pruned)
        sequence and the full trace.
    Raises:
        MissingModelError: If the mode needs a model that is absent.
        ShapeMismatchError: If the target does not match the channel.
    """
    models = models or {}
    mode = config.mode
    target = np.asarray(target, dtype=np.uint8)
    if target.shape != library.channel.shape:
        raise ShapeMismatchError('run_pipeline', library.channel.shape, target.shape)
    required = [key for key in (mode.classifier, 'itn' if mode.uses_bridge else None) if key]
    missing = [key for key in required if models.get(key) is None]
    if missing:
        raise MissingModelError(f'mode {mode.value} needs the {", ".join(missing)} model')

    predictor = oracle_predictor(library) if mode.uses_oracle else network_predictor(models[mode.classifier])
    trace = InferenceTrace(initial_pmr=pmr(render([], library), target))
    if trace.initial_pmr >= config.tau_b:
        logger.info('target already matched by the empty sequence (pmr %.4f)', trace.initial_pmr)
        return [], trace

    sequence = []
    remaining = config.max_steps_total
    if mode.uses_bridge:
        trace.bridge = predict_bridge(models['itn'], target)
        budget = min(config.max_steps_stage_a, remaining)
        sequence, records = run_stage(sequence, trace.bridge, predictor, config, budget, library,
                                      stage=STAGE_A, final_target=target)
        trace.records.extend(records)
        remaining -= len(records)
        logger.info('stage A: %d pillars, pmr to bridge %.4f', len(records),
                    records[-1].pmr_stage if records else pmr(render([], library), trace.bridge))
    if remaining > 0:
        sequence, records = run_stage(sequence, target, predictor, config, remaining, library,
                                      stage=STAGE_B, final_target=target, first_step=len(trace.records) + 1)
        trace.records.extend(records)
        logger.info('stage B: %d pillars, pmr to target %.4f', len(records),
                    records[-1].pmr_stage if records else trace.initial_pmr)

    trace.final_sequence = sequence
    trace.best_sequence = _best_prefix(sequence, trace.records, trace.initial_pmr)
    result = trace.best_sequence
    if config.prune:
        result = prune_redundant(result, target, library)
    return result, trace


def prune_redundant(sequence, target, library):
    """
    Single left-to-right pass dropping every pillar whose removal does not
    lower the PMR to `target`.
    """
    kept = list(sequence)
    score = pmr(render(kept, library), target)
    position = 0
    while position < len(kept):
        candidate = kept[:position] + kept[position + 1:]
        candidate_score = pmr(render(candidate, library), target)
        if candidate_score >= score:
            kept, score = candidate, candidate_score
        else:
            position += 1
    if len(kept) < len(sequence):
        logger.info('pruned %d redundant pillars', len(sequence) - len(kept))
    return kept
