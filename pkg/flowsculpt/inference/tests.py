import unittest

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, tag

from architectures.predictors import ApnModel, ItnModel
from flow.exceptions import InvalidPillarError
from flow.forward import MapGenParams, initial_shape, render
from flow.library import PillarLibrary
from metrics.similarity import pmr
from networks.exceptions import ShapeMismatchError

from .exceptions import MissingModelError, SequenceLimitError
from .pipeline import (
    STAGE_A,
    STAGE_B,
    InferenceConfig,
    InferenceTrace,
    Mode,
    StepRecord,
    oracle_predictor,
    oracle_step,
    prune_redundant,
    run_pipeline,
    run_stage,
)
from .tracefile import sequence_from_text, sequence_to_text, trace_from_csv, trace_to_csv

SLOW = settings.FLOWSCULPT['SLOW_TESTS']


class LibraryMixin:
    library = None
    flat = None

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        if LibraryMixin.library is None:
            LibraryMixin.library = PillarLibrary.build()
            LibraryMixin.flat = PillarLibrary.build(params=MapGenParams(amplitude=0.0))


class ConfigTests(SimpleTestCase):

    def test_defaults_follow_settings(self):
        config = InferenceConfig.from_settings()
        self.assertEqual((config.tau_a, config.tau_b), (0.95, 0.99))
        self.assertEqual((config.max_steps_total, config.max_steps_stage_a, config.no_improve_patience), (20, 10, 3))
        self.assertIs(config.mode, Mode.APN_ITN)

    def test_overrides(self):
        config = InferenceConfig.from_settings(tau_b=0.5, mode=Mode.ORACLE, max_steps_total=None)
        self.assertEqual(config.tau_b, 0.5)
        self.assertEqual(config.max_steps_total, 20)
        self.assertIs(config.mode, Mode.ORACLE)

    def test_invalid_values(self):
        for kwargs in ({'tau_a': 0.0}, {'tau_b': 1.5}, {'max_steps_total': 0},
                       {'max_steps_total': 21}, {'no_improve_patience': 0}):
            with self.subTest(**kwargs), self.assertRaises(ValueError):
                InferenceConfig(**kwargs)

    def test_mode_values(self):
        self.assertEqual([mode.value for mode in Mode], ['apn', 'apnc', 'apn+itn', 'oracle', 'oracle+itn'])
        self.assertEqual(Mode('apnc').classifier, 'apnc')
        self.assertIsNone(Mode.ORACLE_ITN.classifier)
        self.assertTrue(Mode.ORACLE_ITN.uses_bridge)


class OracleTests(LibraryMixin, SimpleTestCase):

    def test_recovers_every_single_pillar(self):
        for k in range(1, 33):
            target = render([k], self.library)
            with self.subTest(pillar=k):
                chosen = oracle_step([], target, self.library)
                self.assertEqual(chosen, k)
                self.assertEqual(pmr(render([chosen], self.library), target), 1.0)

    def test_ties_go_to_lowest_index(self):
        # every map is the identity, so all 32 candidates score the same
        target = np.random.default_rng(0).integers(0, 2, size=(12, 100), dtype=np.uint8)
        self.assertEqual(oracle_step([4, 9], target, self.flat), 1)

    def test_length_cap(self):
        target = initial_shape(self.library.channel)
        with self.assertRaises(SequenceLimitError):
            oracle_step([1] * 20, target, self.library)
        with self.assertRaises(SequenceLimitError):
            oracle_predictor(self.library)([1] * 20, target, target)


class RunStageTests(LibraryMixin, SimpleTestCase):

    def setUp(self):
        self.config = InferenceConfig(mode=Mode.ORACLE)
        self.predictor = oracle_predictor(self.library)

    def test_matched_target_takes_no_step(self):
        target = render([3, 17], self.library)
        sequence, records = run_stage([3, 17], target, self.predictor, self.config, 5, self.library)
        self.assertEqual(sequence, [3, 17])
        self.assertEqual(records, [])

    def test_one_step_to_a_single_pillar(self):
        target = render([9], self.library)
        sequence, records = run_stage([], target, self.predictor, self.config, 5, self.library)
        self.assertEqual(sequence, [9])
        self.assertEqual(len(records), 1)
        self.assertEqual(records[0].pmr_stage, 1.0)
        self.assertEqual(records[0].posterior_max, 1.0)
        self.assertEqual((records[0].step, records[0].stage), (1, STAGE_B))

    def test_budget_of_one(self):
        target = render([2, 30, 7], self.library)
        sequence, records = run_stage([], target, self.predictor, self.config, 1, self.library)
        self.assertLessEqual(len(sequence), 1)
        self.assertEqual(len(records), len(sequence))

    def test_patience_stops_a_stalled_stage(self):
        # identity maps never change the shape, so no step can improve
        target = render([1, 1], self.library)
        config = InferenceConfig(mode=Mode.ORACLE, no_improve_patience=2)
        sequence, records = run_stage([], target, oracle_predictor(self.flat), config, 10, self.flat)
        self.assertEqual(len(records), 2)
        self.assertEqual(sequence, [1, 1])

    def test_stage_a_uses_its_own_threshold(self):
        target = render([12], self.library)
        config = InferenceConfig(mode=Mode.ORACLE, tau_a=pmr(initial_shape(self.library.channel), target))
        sequence, records = run_stage([], target, self.predictor, config, 5, self.library, stage=STAGE_A)
        self.assertEqual((sequence, records), ([], []))

    def test_invalid_budget(self):
        with self.assertRaises(ValueError):
            run_stage([], render([1], self.library), self.predictor, self.config, 0, self.library)


class PipelineTests(LibraryMixin, SimpleTestCase):

    def test_oracle_recovers_single_pillars(self):
        config = InferenceConfig(mode=Mode.ORACLE, tau_b=1.0, prune=True)
        for k in range(1, 33):
            target = render([k], self.library)
            with self.subTest(pillar=k):
                sequence, trace = run_pipeline(target, self.library, config)
                self.assertEqual(pmr(render(sequence, self.library), target), 1.0)
                self.assertLessEqual(len(sequence), 1)

    def test_stripe_target_needs_no_pillar(self):
        models = {'apn': ApnModel.build(seed=0), 'itn': ItnModel.build(seed=0)}
        target = initial_shape(self.library.channel)
        sequence, trace = run_pipeline(target, self.library, InferenceConfig(mode=Mode.APN_ITN), models)
        self.assertEqual(sequence, [])
        self.assertEqual(trace.records, [])
        self.assertEqual(trace.initial_pmr, 1.0)

    def test_missing_models(self):
        target = render([5], self.library)
        with self.assertRaises(MissingModelError):
            run_pipeline(target, self.library, InferenceConfig(mode=Mode.APN_ITN), {'apn': ApnModel.build()})
        with self.assertRaises(MissingModelError):
            run_pipeline(target, self.library, InferenceConfig(mode=Mode.ORACLE_ITN))
        with self.assertRaises(MissingModelError):
            run_pipeline(target, self.library, InferenceConfig(mode=Mode.APN_C_ONLY), {'apn': ApnModel.build()})

    def test_target_must_match_channel(self):
        with self.assertRaises(ShapeMismatchError):
            run_pipeline(np.zeros((12, 99), dtype=np.uint8), self.library, InferenceConfig(mode=Mode.ORACLE))

    def test_bridge_stage_runs_first(self):
        target = render([1, 9, 20, 26], self.library)
        config = InferenceConfig(mode=Mode.ORACLE_ITN, max_steps_total=6, max_steps_stage_a=2)
        sequence, trace = run_pipeline(target, self.library, config, {'itn': ItnModel.build(seed=3)})
        self.assertEqual(trace.bridge.shape, (12, 100))
        stages = [record.stage for record in trace.records]
        self.assertEqual(stages, sorted(stages))
        self.assertLessEqual(stages.count(STAGE_A), 2)
        self.assertLessEqual(len(trace.final_sequence), 6)
        self.assertEqual([record.step for record in trace.records], list(range(1, len(stages) + 1)))

    def test_network_predictor_steps(self):
        target = render([1, 9], self.library)
        config = InferenceConfig(mode=Mode.APN_ONLY, max_steps_total=2, no_improve_patience=5)
        sequence, trace = run_pipeline(target, self.library, config, {'apn': ApnModel.build(seed=1)})
        self.assertLessEqual(len(trace.final_sequence), 2)
        for record in trace.records:
            self.assertTrue(1 <= record.pillar <= 32)
            self.assertTrue(0 < record.posterior_max <= 1)

    def test_deterministic(self):
        target = render([6, 14, 22], self.library)
        config = InferenceConfig(mode=Mode.ORACLE, max_steps_total=4)
        first = run_pipeline(target, self.library, config)
        second = run_pipeline(target, self.library, config)
        self.assertEqual(first[0], second[0])
        self.assertEqual(first[1].records, second[1].records)

    def test_randomized_invariants(self):
        rng = np.random.default_rng(2024)
        for run in range(200):
            truth = [int(k) for k in rng.integers(1, 33, size=int(rng.integers(1, 4)))]
            target = render(truth, self.library)
            config = InferenceConfig(
                mode=Mode.ORACLE,
                max_steps_total=int(rng.integers(1, 5)),
                no_improve_patience=int(rng.integers(1, 4)),
                prune=bool(rng.integers(0, 2)),
            )
            with self.subTest(run=run, truth=truth):
                sequence, trace = run_pipeline(target, self.library, config)
                self.assertLessEqual(len(trace.final_sequence), config.max_steps_total)
                self.assertEqual(len(trace.records), len(trace.final_sequence))
                self.assertEqual(trace.final_sequence[:len(trace.best_sequence)], trace.best_sequence)
                best = pmr(render(trace.best_sequence, self.library), target)
                self.assertGreaterEqual(best, trace.initial_pmr)
                for length, record in enumerate(trace.records, start=1):
                    self.assertEqual(record.pmr_final, pmr(render(trace.final_sequence[:length], self.library), target))
                    self.assertGreaterEqual(best, record.pmr_final)
                self.assertLessEqual(len(sequence), len(trace.best_sequence))
                self.assertGreaterEqual(pmr(render(sequence, self.library), target), best)

    @tag('slow')
    @unittest.skipUnless(SLOW, 'set FLOWSCULPT_SLOW_TESTS to run')
    def test_oracle_on_five_pillar_targets(self):
        rng = np.random.default_rng(5)
        scores = []
        for _ in range(20):
            target = render([int(k) for k in rng.integers(1, 33, size=5)], self.library)
            sequence, _ = run_pipeline(target, self.library, InferenceConfig(mode=Mode.ORACLE))
            scores.append(pmr(render(sequence, self.library), target))
        self.assertGreaterEqual(np.median(scores), 0.85)


class PruneTests(LibraryMixin, SimpleTestCase):

    def test_empty(self):
        self.assertEqual(prune_redundant([], render([1], self.library), self.library), [])

    def test_identity_pillars_are_dropped(self):
        target = initial_shape(self.flat.channel)
        self.assertEqual(prune_redundant([3, 3], target, self.flat), [])

    def test_minimal_sequence_is_kept(self):
        target = render([1], self.library)
        self.assertEqual(prune_redundant([1], target, self.library), [1])

    def test_never_lowers_pmr(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            target = render([int(k) for k in rng.integers(1, 33, size=3)], self.library)
            sequence = [int(k) for k in rng.integers(1, 33, size=5)]
            pruned = prune_redundant(sequence, target, self.library)
            self.assertLessEqual(len(pruned), len(sequence))
            self.assertGreaterEqual(
                pmr(render(pruned, self.library), target),
                pmr(render(sequence, self.library), target),
            )


class TraceFileTests(SimpleTestCase):

    def test_trace_csv(self):
        trace = InferenceTrace(records=[
            StepRecord(1, STAGE_A, 7, 0.5, 0.75, 0.125),
            StepRecord(2, STAGE_B, 32, 1.0, 0.99, 0.99),
        ])
        text = trace_to_csv(trace)
        self.assertEqual(text.splitlines(), [
            'step,stage,pillar,posterior_max,pmr_stage,pmr_final',
            '1,A,7,0.500000,0.750000,0.125000',
            '2,B,32,1.000000,0.990000,0.990000',
        ])
        self.assertEqual(trace_from_csv(text), trace.records)

    def test_trace_header_checked(self):
        with self.assertRaises(ValueError):
            trace_from_csv('target_id,method,pmr,ssim\n')

    def test_sequence_text(self):
        self.assertEqual(sequence_to_text([3, 5, 7]), '3,5,7\n')
        self.assertEqual(sequence_to_text([]), '\n')
        self.assertEqual(sequence_from_text('3, 5,7\n'), [3, 5, 7])
        self.assertEqual(sequence_from_text('\n'), [])

    def test_bad_sequence_text(self):
        with self.assertRaises(ValueError):
            sequence_from_text('1,x')
        with self.assertRaises(InvalidPillarError):
            sequence_from_text('33')
        with self.assertRaises(SequenceLimitError):
            sequence_from_text(','.join(['1'] * 21))
