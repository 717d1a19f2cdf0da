import math

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from flow.exceptions import InvalidPillarError
from flow.forward import ChannelSpec, initial_shape, render
from flow.library import PillarLibrary
from networks.exceptions import ShapeMismatchError

from .dataset import APN, ITN, SMC, Dataset, dataset_from_bytes, dataset_to_bytes
from .exceptions import DatasetFormatError
from .generation import (
    assemble_apn_input,
    draw_apn,
    draw_itn,
    draw_smc,
    gen_apn,
    gen_apnc,
    gen_itn,
    gen_smc,
    sample_rng,
    truncate,
)

QUIET = {**settings.FLOWSCULPT, 'PROGRESS': False}


class TruncateTests(SimpleTestCase):

    def test_odd_and_even_lengths(self):
        self.assertEqual(len(truncate(list(range(1, 8)))), 4)
        self.assertEqual(len(truncate(list(range(1, 11)))), 5)
        self.assertEqual(truncate([4, 9]), [4])
        self.assertEqual(truncate([3]), [3])

    def test_keeps_the_leading_pillars(self):
        self.assertEqual(truncate([5, 6, 7, 8, 9]), [5, 6, 7])

    def test_empty_sequence(self):
        with self.assertRaises(InvalidPillarError):
            truncate([])


class AssembleTests(SimpleTestCase):

    def test_zero_inputs(self):
        zero = np.zeros((12, 100), dtype=np.uint8)
        out = assemble_apn_input(zero, zero)
        self.assertEqual(out.shape, (29, 100))
        self.assertFalse(out.any())

    def test_padding_rows_stay_empty(self):
        stripe = initial_shape(ChannelSpec())
        out = assemble_apn_input(stripe, stripe)
        self.assertFalse(out[12:17].any())

    def test_slices_recover_inputs(self):
        rng = np.random.default_rng(0)
        pre = rng.integers(0, 2, size=(12, 100), dtype=np.uint8)
        post = rng.integers(0, 2, size=(12, 100), dtype=np.uint8)
        out = assemble_apn_input(pre, post)
        np.testing.assert_array_equal(out[:12], pre)
        np.testing.assert_array_equal(out[17:], post)

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeMismatchError):
            assemble_apn_input(np.zeros((12, 100)), np.zeros((12, 99)))


class DrawTests(SimpleTestCase):

    def test_label_histogram_is_uniform(self):
        n = 32000
        counts = np.zeros(33, dtype=int)
        for index in range(n):
            _, label = draw_apn(sample_rng(17, 'train', index))
            counts[label] += 1
        self.assertEqual(counts[0], 0)
        sigma = math.sqrt(n * (1 / 32) * (31 / 32))
        self.assertLess(np.abs(counts[1:] - n / 32).max(), 4 * sigma)

    def test_prefix_lengths_span_the_range(self):
        lengths = {len(draw_apn(sample_rng(1, 'train', i))[0]) for i in range(500)}
        self.assertEqual(lengths, set(range(0, 10)))
        lengths = {len(draw_itn(sample_rng(1, 'train', i))) for i in range(500)}
        self.assertEqual(lengths, set(range(2, 11)))

    def test_class_subset(self):
        picks = {k for i in range(200) for k in draw_smc(sample_rng(2, 'train', i), classes=[3, 7])}
        self.assertEqual(picks, {3, 7})

    def test_splits_use_separate_streams(self):
        train = [draw_smc(sample_rng(5, 'train', i)) for i in range(5)]
        valid = [draw_smc(sample_rng(5, 'valid', i)) for i in range(5)]
        self.assertNotEqual(train, valid)

    def test_unknown_split(self):
        with self.assertRaises(ValueError):
            sample_rng(0, 'test', 0)


@override_settings(FLOWSCULPT=QUIET)
class GeneratorTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.library = PillarLibrary.build()

    def test_apn_samples_hold_their_construction(self):
        data = gen_apn(8, seed=3, library=self.library)
        self.assertEqual(data.pixels.shape, (8, 29, 100))
        for index in range(8):
            prefix, label = draw_apn(sample_rng(3, 'train', index))
            self.assertEqual(int(data.labels[index, 0]), label)
            np.testing.assert_array_equal(data.pixels[index, :12], render(prefix, self.library))
            np.testing.assert_array_equal(data.pixels[index, 17:], render(prefix + [label], self.library))

    def test_apnc_matches_apn_draws(self):
        apn = gen_apn(4, seed=9, library=self.library)
        apnc = gen_apnc(4, seed=9, library=self.library)
        np.testing.assert_array_equal(apn.labels, apnc.labels)
        np.testing.assert_array_equal(apnc.pixels[:, 0], apn.pixels[:, :12])
        np.testing.assert_array_equal(apnc.pixels[:, 1], apn.pixels[:, 17:])
        self.assertEqual(apnc.inputs().shape, (4, 2, 12, 100))

    def test_itn_pairs_of_two_pillars(self):
        data = gen_itn(6, seed=2, library=self.library, lengths=(2, 2))
        for index in range(6):
            first, _ = draw_itn(sample_rng(2, 'train', index), lengths=(2, 2))
            np.testing.assert_array_equal(data.pixels[index, 1], render([first], self.library))
        self.assertEqual(data.labels.shape, (6, 0))
        self.assertEqual(data.inputs().shape, (6, 1, 12, 100))
        self.assertEqual(data.targets().shape, (6, 1200))

    def test_smc_inputs_render_from_labels(self):
        data = gen_smc(5, seed=8, library=self.library)
        self.assertEqual(data.labels.shape, (5, 10))
        for index in range(5):
            sequence = [int(k) for k in data.labels[index]]
            np.testing.assert_array_equal(data.pixels[index], render(sequence, self.library))
        self.assertEqual(data.targets().shape, (5, 10))

    def test_single_pillar_smc(self):
        data = gen_smc(4, seed=8, library=self.library, pillars=1)
        self.assertEqual(data.labels.shape, (4, 1))
        for index in range(4):
            np.testing.assert_array_equal(data.pixels[index], render([int(data.labels[index, 0])], self.library))

    def test_same_seed_gives_identical_bytes(self):
        first = dataset_to_bytes(gen_apn(1, seed=42, library=self.library))
        second = dataset_to_bytes(gen_apn(1, seed=42, library=self.library))
        self.assertEqual(first, second)

    def test_worker_count_does_not_change_output(self):
        single = dataset_to_bytes(gen_smc(12, seed=4, library=self.library, threads=1))
        pooled = dataset_to_bytes(gen_smc(12, seed=4, library=self.library, threads=4))
        self.assertEqual(single, pooled)

    def test_validation_split_differs(self):
        train = gen_itn(4, seed=1, library=self.library)
        valid = gen_itn(4, seed=1, library=self.library, split='valid')
        self.assertFalse(np.array_equal(train.pixels, valid.pixels))

    def test_invalid_requests(self):
        with self.assertRaises(ValueError):
            gen_apn(0, seed=1, library=self.library)
        with self.assertRaises(InvalidPillarError):
            gen_smc(1, seed=1, library=self.library, classes=[0, 5])


class CodecTests(SimpleTestCase):

    def _dataset(self):
        rng = np.random.default_rng(3)
        return Dataset(
            kind=SMC,
            pixels=rng.integers(0, 2, size=(3, 12, 100), dtype=np.uint8),
            labels=rng.integers(1, 33, size=(3, 10)).astype(np.uint16),
        )

    def test_round_trip(self):
        original = self._dataset()
        data = dataset_to_bytes(original)
        self.assertEqual(data[:4], b'FSDS')
        restored = dataset_from_bytes(data)
        self.assertEqual(restored.kind, SMC)
        np.testing.assert_array_equal(restored.pixels, original.pixels)
        np.testing.assert_array_equal(restored.labels, original.labels)

    def test_round_trip_without_labels(self):
        original = Dataset(kind=ITN, pixels=np.ones((2, 2, 3, 4), dtype=np.uint8),
                           labels=np.zeros((2, 0), dtype=np.uint16))
        restored = dataset_from_bytes(dataset_to_bytes(original))
        self.assertEqual(restored.labels.shape, (2, 0))
        np.testing.assert_array_equal(restored.pixels, original.pixels)

    def test_truncated_payload(self):
        data = dataset_to_bytes(self._dataset())
        with self.assertRaises(DatasetFormatError):
            dataset_from_bytes(data[:-1])
        with self.assertRaises(DatasetFormatError):
            dataset_from_bytes(data[:8])

    def test_bad_magic_and_kind(self):
        data = dataset_to_bytes(self._dataset())
        with self.assertRaises(DatasetFormatError):
            dataset_from_bytes(b'FSNN' + data[4:])
        with self.assertRaises(DatasetFormatError):
            dataset_from_bytes(data[:8] + bytes([9]) + data[9:])

    def test_non_binary_pixels(self):
        dataset = Dataset(kind=APN, pixels=np.full((1, 29, 100), 2, dtype=np.uint8),
                          labels=np.ones((1, 1), dtype=np.uint16))
        with self.assertRaises(DatasetFormatError):
            dataset_from_bytes(dataset_to_bytes(dataset))
