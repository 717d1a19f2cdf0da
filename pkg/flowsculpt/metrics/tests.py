import math

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from flow.forward import render
from flow.library import PillarLibrary

from .complexity import perimetric_complexity
from .exceptions import MetricInputError
from .report import EvalReport, EvalRow, eval_report, make_targets, report_to_csv
from .similarity import SsimParams, pmr, ssim

QUIET = {**settings.FLOWSCULPT, 'PROGRESS': False}


def random_shape(seed, shape=(12, 100)):
    return np.random.default_rng(seed).integers(0, 2, size=shape, dtype=np.uint8)


class PmrTests(SimpleTestCase):

    def test_identical_and_complement(self):
        a = random_shape(0)
        self.assertEqual(pmr(a, a), 1.0)
        self.assertEqual(pmr(a, 1 - a), 0.0)

    def test_sixty_mismatches(self):
        a = np.zeros((12, 100), dtype=np.uint8)
        b = a.copy()
        b.flat[:60] = 1
        self.assertAlmostEqual(pmr(a, b), 0.95, places=12)

    def test_symmetric(self):
        a, b = random_shape(1), random_shape(2)
        self.assertEqual(pmr(a, b), pmr(b, a))

    def test_size_mismatch(self):
        with self.assertRaises(MetricInputError):
            pmr(np.zeros((12, 100)), np.zeros((12, 99)))


class SsimTests(SimpleTestCase):

    def test_identical_images(self):
        for seed in range(5):
            a = random_shape(seed)
            self.assertAlmostEqual(ssim(a, a), 1.0, delta=1e-12)

    def test_zero_against_one(self):
        c1 = SsimParams().c1
        value = ssim(np.zeros((12, 100)), np.ones((12, 100)))
        self.assertAlmostEqual(value, c1 / (1 + c1), delta=1e-9)
        self.assertAlmostEqual(value, 9.999e-5, delta=1e-8)

    def test_symmetric(self):
        for seed in range(5):
            a, b = random_shape(seed), random_shape(seed + 10)
            self.assertAlmostEqual(ssim(a, b), ssim(b, a), delta=1e-12)

    def test_window_larger_than_image(self):
        with self.assertRaises(MetricInputError):
            ssim(np.zeros((7, 100)), np.zeros((7, 100)))
        with self.assertRaises(MetricInputError):
            ssim(np.zeros((12, 100)), np.zeros((12, 100)), SsimParams(window=13))

    def test_stride_reduces_windows(self):
        a, b = random_shape(3), random_shape(4)
        self.assertNotEqual(ssim(a, b, SsimParams(stride=4)), ssim(a, b))

    def test_invalid_params(self):
        with self.assertRaises(MetricInputError):
            SsimParams(dynamic_range=0)


class ComplexityTests(SimpleTestCase):

    def test_full_rectangle(self):
        report = perimetric_complexity(np.ones((12, 100), dtype=np.uint8))
        self.assertEqual((report.perimeter, report.area), (224, 1200))
        self.assertAlmostEqual(report.complexity, 224 ** 2 / (4 * math.pi * 1200), delta=1e-12)
        self.assertAlmostEqual(report.complexity, 3.327, delta=1e-3)
        self.assertFalse(report.passes_gate)

    def test_single_pixel(self):
        shape = np.zeros((12, 100), dtype=np.uint8)
        shape[5, 40] = 1
        report = perimetric_complexity(shape)
        self.assertEqual((report.perimeter, report.area), (4, 1))
        self.assertAlmostEqual(report.complexity, 4 / math.pi, delta=1e-12)

    def test_gate(self):
        comb = np.zeros((12, 100), dtype=np.uint8)
        comb[:, ::2] = 1
        self.assertTrue(perimetric_complexity(comb).passes_gate)

    def test_translation_and_mirror_invariance(self):
        shape = np.zeros((12, 100), dtype=np.uint8)
        shape[3:8, 10:30] = random_shape(5, (5, 20))
        shape[3, 10] = 1
        moved = np.roll(shape, (2, 40), axis=(0, 1))
        reference = perimetric_complexity(shape)
        self.assertEqual(perimetric_complexity(moved), reference)
        self.assertEqual(perimetric_complexity(shape[:, ::-1]), reference)

    def test_empty_shape(self):
        with self.assertRaises(MetricInputError):
            perimetric_complexity(np.zeros((12, 100)))


@override_settings(FLOWSCULPT=QUIET)
class ReportTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.library = PillarLibrary.build()
        cls.targets = make_targets(3, seed=11, library=cls.library, pillars=4)

    def test_true_sequence_scores_perfectly(self):
        truth = {shape.tobytes(): sequence for sequence, shape in self.targets}
        report = eval_report(
            [shape for _, shape in self.targets],
            {'truth': lambda target: truth[target.tobytes()]},
            self.library,
        )
        self.assertEqual(len(report.rows), 3)
        for row in report.rows:
            self.assertEqual((row.pmr, row.ssim), (1.0, 1.0))
        self.assertEqual(report.averages['truth'], (1.0, 1.0))

    def test_averages_are_row_means(self):
        methods = {'empty': lambda target: [], 'one': lambda target: [7]}
        report = eval_report([shape for _, shape in self.targets], methods, self.library)
        self.assertEqual(len(report.rows), 6)
        for name in methods:
            mine = [row for row in report.rows if row.method == name]
            self.assertAlmostEqual(report.averages[name][0], np.mean([r.pmr for r in mine]), delta=1e-12)
            self.assertAlmostEqual(report.averages[name][1], np.mean([r.ssim for r in mine]), delta=1e-12)

    def test_failures_become_rows(self):
        calls = []

        def flaky(target):
            calls.append(target)
            if len(calls) == 2:
                raise RuntimeError('boom')
            return [3]

        with self.assertLogs('metrics.report', level='WARNING'):
            report = eval_report([shape for _, shape in self.targets], {'flaky': flaky}, self.library)
        failed = [row for row in report.rows if row.error]
        self.assertEqual(len(failed), 1)
        self.assertTrue(math.isnan(failed[0].pmr))
        finite = [row.pmr for row in report.rows if not row.error]
        self.assertAlmostEqual(report.averages['flaky'][0], np.mean(finite), delta=1e-12)

    def test_csv_layout(self):
        report = EvalReport(
            rows=[EvalRow('target_00', 'apn', 0.5, 0.25), EvalRow('target_00', 'smc', math.nan, math.nan, error='x')],
            averages={'apn': (0.5, 0.25), 'smc': (math.nan, math.nan)},
        )
        self.assertEqual(report_to_csv(report).splitlines(), [
            'target_id,method,pmr,ssim',
            'target_00,apn,0.500000,0.250000',
            'target_00,smc,nan,nan',
            'average,apn,0.500000,0.250000',
            'average,smc,nan,nan',
        ])
        self.assertEqual(report.ranking(), ['apn', 'smc'])

    def test_targets_are_seeded_renders(self):
        again = make_targets(3, seed=11, library=self.library, pillars=4)
        for (sequence, shape), (sequence2, shape2) in zip(self.targets, again):
            self.assertEqual(sequence, sequence2)
            self.assertEqual(len(sequence), 4)
            np.testing.assert_array_equal(shape, render(sequence, self.library))
            np.testing.assert_array_equal(shape, shape2)

    def test_complexity_gate(self):
        gated = make_targets(2, seed=5, library=self.library, pillars=4, min_complexity=1.0)
        for _, shape in gated:
            self.assertGreater(perimetric_complexity(shape).complexity, 1.0)
        with self.assertRaises(MetricInputError):
            make_targets(1, seed=5, library=self.library, pillars=1, min_complexity=1000.0, max_draws=20)
