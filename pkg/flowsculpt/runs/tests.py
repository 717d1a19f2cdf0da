import json
import os
import tempfile
import unittest
from io import StringIO
from unittest import mock

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.db import OperationalError
from django.test import SimpleTestCase, TestCase, override_settings, tag

from architectures.builders import build_apn, build_itn, build_smc
from architectures.predictors import ItnModel, SmcModel, load_model, predict_bridge, predict_sequence_smc
from datagen.dataset import read_dataset
from flow.forward import initial_shape, render
from flow.imaging import read_shape, shape_to_pgm
from flow.library import PillarLibrary, library_from_bytes, library_to_bytes
from metrics.similarity import pmr
from networks.checkpoint import Checkpoint, save
from networks.training import evaluate

from .models import Run
from .utils import atomic_write, manifest_path, read_manifest, record_run

QUIET = {**settings.FLOWSCULPT, 'PROGRESS': False}
SLOW = settings.FLOWSCULPT['SLOW_TESTS']


def read_bytes(path):
    with open(path, 'rb') as handle:
        return handle.read()


def read_text(path):
    with open(path, encoding='utf-8') as handle:
        return handle.read()


def run(name, *args, **options):
    out = StringIO()
    call_command(name, *args, stdout=out, stderr=StringIO(), **options)
    return out.getvalue()


class PillarsListTests(SimpleTestCase):

    def test_class_table(self):
        rows = run('pillars_list').splitlines()
        self.assertEqual(len(rows), 32)
        self.assertEqual(rows[0], '1 0.000 0.375')
        self.assertEqual(rows[1], '2 0.125 0.375')
        self.assertEqual(len({tuple(row.split()[1:]) for row in rows}), 32)


class UtilsTests(TestCase):

    def setUp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.tmp = directory.name

    def test_atomic_write_creates_directories(self):
        path = os.path.join(self.tmp, 'nested', 'out.txt')
        atomic_write(path, 'hello\n')
        self.assertEqual(read_text(path), 'hello\n')
        self.assertEqual(os.listdir(os.path.dirname(path)), ['out.txt'])

    def test_manifest_fields_are_checked(self):
        path = os.path.join(self.tmp, 'broken.manifest.json')
        atomic_write(path, json.dumps({'command': 'render'}))
        with self.assertRaises(ValueError):
            read_manifest(path)

    def test_unavailable_registry_only_warns(self):
        manifest = {'command': 'render', 'arguments': [], 'seeds': [], 'inputs': [],
                    'outputs': [], 'version': '1.0.0', 'duration': 0.1}
        with mock.patch.object(Run.objects, 'create', side_effect=OperationalError('no such table')):
            with self.assertLogs('runs.utils', level='WARNING'):
                self.assertIsNone(record_run(manifest))
        self.assertEqual(record_run(manifest).command, 'render')


@override_settings(FLOWSCULPT=QUIET)
class CommandTests(TestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        directory = tempfile.TemporaryDirectory()
        cls.addClassCleanup(directory.cleanup)
        cls.shared = directory.name
        cls.library = PillarLibrary.build()
        cls.maps = os.path.join(cls.shared, 'maps.fsmp')
        atomic_write(cls.maps, library_to_bytes(cls.library))

    def setUp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.tmp = directory.name

    def path(self, name):
        return os.path.join(self.tmp, name)

    def write_target(self, sequence, name='target.pgm'):
        path = self.path(name)
        atomic_write(path, shape_to_pgm(render(sequence, self.library)))
        return path

    def test_maps_build(self):
        out = self.path('built.fsmp')
        run('maps_build', out=out)
        built = library_from_bytes(read_bytes(out))
        for k in (1, 5, 32):
            np.testing.assert_array_equal(built.grid(k), self.library.grid(k))
        manifest = read_manifest(manifest_path(out))
        self.assertEqual(manifest['command'], 'maps_build')
        self.assertEqual(manifest['outputs'], [os.path.abspath(out)])
        self.assertIn('--amplitude', manifest['arguments'])
        self.assertEqual(Run.objects.get().command, 'maps_build')

    def test_render_empty_sequence_is_the_stripe(self):
        out = self.path('empty.pgm')
        run('render', seq='', maps=self.maps, out=out)
        self.assertEqual(read_bytes(out), shape_to_pgm(initial_shape(self.library.channel)))

    def test_render_sequence(self):
        out = self.path('shape.pgm')
        run('render', seq='3,17,9', maps=self.maps, out=out)
        np.testing.assert_array_equal(read_shape(out), render([3, 17, 9], self.library))

    def test_invalid_sequence_writes_nothing(self):
        out = self.path('bad.pgm')
        with self.assertRaises(CommandError):
            run('render', seq='1,40', maps=self.maps, out=out)
        self.assertFalse(os.path.exists(out))
        self.assertFalse(os.path.exists(manifest_path(out)))

    def test_missing_maps_file(self):
        with self.assertRaises(CommandError):
            run('render', seq='1', maps=self.path('absent.fsmp'), out=self.path('x.pgm'))

    def test_dataset_with_validation_split(self):
        out, valid = self.path('train.fsds'), self.path('valid.fsds')
        run('dataset', kind='apn', n=4, seed=3, maps=self.maps, out=out, valid_out=valid, valid_n=2, threads=2)
        train_set, valid_set = read_dataset(out), read_dataset(valid)
        self.assertEqual((len(train_set), len(valid_set)), (4, 2))
        self.assertEqual(train_set.pixels.shape[1:], (29, 100))
        self.assertFalse(np.array_equal(train_set.pixels[:2], valid_set.pixels))
        manifest = read_manifest(manifest_path(out))
        self.assertEqual(manifest['seeds'], [3])
        self.assertEqual(len(manifest['outputs']), 2)

    def test_replay_is_byte_identical(self):
        out = self.path('smc.fsds')
        run('dataset', kind='smc', n=3, seed=9, maps=self.maps, out=out)
        first = read_bytes(out)
        os.remove(out)
        run('replay', manifest_path(out))
        self.assertEqual(read_bytes(out), first)
        self.assertEqual(Run.objects.count(), 2)

    def test_train_itn(self):
        data, valid, ckpt = self.path('itn.fsds'), self.path('itn-valid.fsds'), self.path('itn.ckpt')
        run('dataset', kind='itn', n=4, seed=1, maps=self.maps, out=data, valid_out=valid, valid_n=2)
        output = run('train', arch='itn', data=data, valid=valid, epochs=1, batch=2, seed=4, out=ckpt)
        self.assertIn('ITN:', output)
        model = load_model(ckpt, ItnModel)
        self.assertEqual(predict_bridge(model, render([1], self.library)).shape, (12, 100))
        self.assertEqual(read_manifest(manifest_path(ckpt))['seeds'], [4])

    def test_train_rejects_mismatched_data(self):
        data, valid = self.path('smc.fsds'), self.path('smc-valid.fsds')
        run('dataset', kind='smc', n=2, seed=1, maps=self.maps, out=data, valid_out=valid, valid_n=1)
        with self.assertRaises(CommandError):
            run('train', arch='apn', data=data, valid=valid, epochs=1, out=self.path('apn.ckpt'))
        self.assertFalse(os.path.exists(self.path('apn.ckpt')))

    def test_train_smc(self):
        data, valid, ckpt = self.path('smc.fsds'), self.path('smc-valid.fsds'), self.path('smc.ckpt')
        run('dataset', kind='smc', n=4, seed=2, maps=self.maps, out=data, valid_out=valid, valid_n=2)
        output = run('train', arch='smc', data=data, valid=valid, epochs=1, batch=2, seed=5, out=ckpt)
        self.assertIn('SMC10:', output)
        model = load_model(ckpt, SmcModel)
        sequence = predict_sequence_smc(model, render([3, 12], self.library))
        self.assertEqual(len(sequence), 10)
        self.assertTrue(all(1 <= k <= 32 for k in sequence))
        self.assertEqual(read_manifest(manifest_path(ckpt))['command'], 'train')

    def test_dataset_valid_split_excludes_valid_out(self):
        out, valid = self.path('valid.fsds'), self.path('valid-again.fsds')
        with self.assertRaises(CommandError):
            run('dataset', kind='apn', n=2, split='valid', maps=self.maps, out=out, valid_out=valid)
        self.assertFalse(os.path.exists(out))
        self.assertFalse(os.path.exists(valid))

    def test_infer_oracle_single_pillar(self):
        target = self.write_target([9])
        out, trace, frames = self.path('seq.txt'), self.path('trace.csv'), self.path('frames')
        run('infer', target=target, mode='oracle', maps=self.maps, tau_b=1.0, out=out, trace=trace, frames=frames)
        self.assertEqual(read_text(out), '9\n')
        lines = read_text(trace).splitlines()
        self.assertEqual(lines[0], 'step,stage,pillar,posterior_max,pmr_stage,pmr_final')
        self.assertEqual(lines[1], '1,B,9,1.000000,1.000000,1.000000')
        self.assertEqual(sorted(os.listdir(frames)), ['frame_00.pgm', 'frame_01.pgm'])
        np.testing.assert_array_equal(read_shape(os.path.join(frames, 'frame_01.pgm')), render([9], self.library))

    def test_infer_needs_its_models(self):
        out = self.path('seq.txt')
        with self.assertRaises(CommandError):
            run('infer', target=self.write_target([2]), mode='apn+itn', maps=self.maps, out=out)
        self.assertFalse(os.path.exists(out))

    def test_infer_rejects_wrong_checkpoint(self):
        ckpt = self.path('smc.ckpt')
        atomic_write(ckpt, save(Checkpoint(network=build_smc())))
        with self.assertRaises(CommandError):
            run('infer', target=self.write_target([2]), mode='apn', apn=ckpt, maps=self.maps, out=self.path('s.txt'))

    def test_targets_and_oracle_eval(self):
        targets = self.path('targets')
        run('targets', n=2, seed=6, pillars=2, maps=self.maps, out=targets)
        self.assertEqual(sorted(os.listdir(targets)), [
            'sequences.csv', 'sequences.csv.manifest.json', 'target_00.pgm', 'target_01.pgm',
        ])
        rows = read_text(os.path.join(targets, 'sequences.csv')).splitlines()
        self.assertEqual(rows[0], 'target_id,sequence')
        sequence = [int(k) for k in rows[1].split(',', 1)[1].strip('"').split(',')]
        np.testing.assert_array_equal(read_shape(os.path.join(targets, 'target_00.pgm')), render(sequence, self.library))

        report = self.path('report.csv')
        run('eval', targets=targets, methods='oracle', maps=self.maps, max_steps=4, report=report)
        lines = read_text(report).splitlines()
        self.assertEqual(lines[0], 'target_id,method,pmr,ssim')
        self.assertEqual([line.split(',')[:2] for line in lines[1:]],
                         [['target_00', 'oracle'], ['target_01', 'oracle'], ['average', 'oracle']])

    def test_eval_network_methods(self):
        targets = self.path('targets')
        run('targets', n=2, seed=2, pillars=3, maps=self.maps, out=targets)
        checkpoints = {}
        for key, net in (('apn', build_apn()), ('itn', build_itn()), ('smc', build_smc())):
            checkpoints[key] = self.path(f'{key}.ckpt')
            atomic_write(checkpoints[key], save(Checkpoint(network=net)))
        report = self.path('report.csv')
        run('eval', targets=targets, methods='smc,apn,apn+itn', maps=self.maps, max_steps=3,
            stage_a_steps=1, report=report, **checkpoints)
        lines = read_text(report).splitlines()
        self.assertEqual(len(lines), 1 + 6 + 3)
        self.assertEqual([line.split(',')[1] for line in lines[-3:]], ['smc', 'apn', 'apn+itn'])

    def test_eval_validates_methods(self):
        targets = self.path('targets')
        run('targets', n=1, seed=2, pillars=2, maps=self.maps, out=targets)
        with self.assertRaises(CommandError):
            run('eval', targets=targets, methods='beam', maps=self.maps, report=self.path('r.csv'))
        with self.assertRaises(CommandError):
            run('eval', targets=targets, methods='smc', maps=self.maps, report=self.path('r.csv'))
        self.assertFalse(os.path.exists(self.path('r.csv')))

    def test_complexity(self):
        image = self.path('full.pgm')
        atomic_write(image, shape_to_pgm(np.ones((12, 100), dtype=np.uint8)))
        output = run('complexity', image=image)
        self.assertIn('perimeter 224 area 1200 complexity 3.327', output)
        self.assertIn('fails', output)

    def test_complexity_of_empty_image(self):
        image = self.path('empty.pgm')
        atomic_write(image, shape_to_pgm(np.zeros((12, 100), dtype=np.uint8)))
        with self.assertRaises(CommandError):
            run('complexity', image=image)

    def test_runs_listing(self):
        self.assertEqual(run('runs').strip(), 'no runs recorded')
        run('render', seq='4', maps=self.maps, out=self.path('a.pgm'))
        run('render', seq='5', maps=self.maps, out=self.path('b.pgm'))
        lines = run('runs', limit=1).splitlines()
        self.assertEqual(len(lines), 1)
        self.assertIn('render', lines[0])


@tag('slow')
@unittest.skipUnless(SLOW, 'set FLOWSCULPT_SLOW_TESTS to run')
class DeskScaleTests(TestCase):
    """
    Train at the desk preset and check held-out quality.
    """

    def setUp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.tmp = directory.name
        self.maps = os.path.join(self.tmp, 'maps.fsmp')
        run('maps_build', out=self.maps)

    def checkpoint(self, arch):
        data, valid, ckpt = (os.path.join(self.tmp, name) for name in (f'{arch}.fsds', f'{arch}-valid.fsds', f'{arch}.ckpt'))
        if not os.path.exists(ckpt):
            run('dataset', kind=arch, seed=1, maps=self.maps, out=data, valid_out=valid)
            run('train', arch=arch, data=data, valid=valid, seed=1, out=ckpt)
        return ckpt, valid

    def train(self, arch):
        ckpt, valid = self.checkpoint(arch)
        return load_model(ckpt), read_dataset(valid)

    def accuracy(self, arch):
        model, valid = self.train(arch)
        return evaluate(model.network, valid.inputs(), valid.targets())[1]

    def test_apn_learns(self):
        self.assertGreaterEqual(self.accuracy('apn'), 0.5)

    def test_apnc_matches_apn(self):
        self.assertLessEqual(abs(self.accuracy('apnc') - self.accuracy('apn')), 0.10)

    def test_itn_bridges(self):
        model, valid = self.train('itn')
        scores = [
            pmr(predict_bridge(model, pixels[0]), pixels[1])
            for pixels in valid.pixels
        ]
        self.assertGreaterEqual(np.median(scores), 0.85)

    def test_pipeline_beats_single_shot_classifier(self):
        checkpoints = {arch: self.checkpoint(arch)[0] for arch in ('apn', 'itn', 'smc')}
        targets, report = os.path.join(self.tmp, 'targets'), os.path.join(self.tmp, 'report.csv')
        run('targets', n=20, seed=11, pillars=10, maps=self.maps, out=targets)
        run('eval', targets=targets, methods='smc,apn,apn+itn', maps=self.maps, report=report, **checkpoints)
        averages = {
            method: (float(mean_pmr), float(mean_ssim))
            for kind, method, mean_pmr, mean_ssim in (line.split(',') for line in read_text(report).splitlines()[1:])
            if kind == 'average'
        }
        self.assertGreaterEqual(averages['apn+itn'][0], averages['smc'][0] + 0.05)
        self.assertGreater(averages['apn+itn'][1], averages['smc'][1])
        self.assertGreaterEqual(averages['apn+itn'][0], averages['apn'][0])
