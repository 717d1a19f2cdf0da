import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from datagen.generation import gen_apn
from flow.library import PillarLibrary
from networks.checkpoint import Checkpoint, load, save
from networks.exceptions import ShapeMismatchError
from networks.layers import Dense, Softmax
from networks.network import NLL, Network
from networks.training import TrainConfig, train

from .builders import build_apn, build_apnc, build_itn, build_smc
from .exceptions import ArchitectureMismatchError
from .predictors import (
    ApnCModel,
    ApnModel,
    ItnModel,
    SmcModel,
    from_checkpoint,
    predict_bridge,
    predict_pillar,
    predict_sequence_smc,
)


def zeroed(model):
    for param in model.network.parameters():
        param[...] = 0.0
    return model


def random_shape(seed):
    return np.random.default_rng(seed).integers(0, 2, size=(12, 100), dtype=np.uint8)


class ShapeChainTests(SimpleTestCase):

    def test_apn_chain(self):
        net = build_apn()
        self.assertEqual(net.output_shape, (32,))
        self.assertEqual(net.describe()[6], ('Flatten', (11500,)))

    def test_apnc_chain(self):
        net = build_apnc()
        self.assertEqual(net.layers[0].widths, [2300, 2300])
        self.assertEqual(net.output_shape, (32,))

    def test_itn_chain(self):
        net = build_itn()
        self.assertEqual(net.output_shape, (1200,))
        self.assertEqual([shape for _, shape in net.describe()][1::2], [(500,), (500,), (500,), (1200,)])

    def test_smc_chain(self):
        net = build_smc()
        self.assertEqual(net.tag, 'SMC10')
        self.assertEqual(net.output_shape, (320,))
        self.assertEqual(net.loss.heads, 10)


class PredictPillarTests(SimpleTestCase):

    def test_zero_weights_give_uniform_posterior(self):
        for model in (zeroed(ApnModel.build()), zeroed(ApnCModel.build())):
            index, posterior = predict_pillar(model, random_shape(0), random_shape(1))
            self.assertEqual(index, 1)
            np.testing.assert_allclose(posterior, np.full(32, 1 / 32), rtol=0, atol=1e-15)

    def test_posterior_sums_to_one(self):
        model = ApnModel.build(seed=3)
        index, posterior = predict_pillar(model, random_shape(2), random_shape(3))
        self.assertTrue(1 <= index <= 32)
        self.assertEqual(index, int(np.argmax(posterior)) + 1)
        self.assertAlmostEqual(posterior.sum(), 1.0, delta=1e-12)

    def test_prediction_is_deterministic(self):
        model = ApnCModel.build(seed=4)
        first = predict_pillar(model, random_shape(5), random_shape(6))
        second = predict_pillar(model, random_shape(5), random_shape(6))
        self.assertEqual(first[0], second[0])
        np.testing.assert_array_equal(first[1], second[1])

    def test_towers_are_independent(self):
        model = ApnCModel.build(seed=7)
        current, target = random_shape(8), random_shape(9)
        _, before = predict_pillar(model, current, target)
        towers = model.network.layers[0].towers
        left = [p for layer in towers[0] for p in layer.parameters()]
        right = [p for layer in towers[1] for p in layer.parameters()]
        for a, b in zip(left, right):
            saved = a.copy()
            a[...] = b
            b[...] = saved
        _, after = predict_pillar(model, current, target)
        self.assertFalse(np.allclose(before, after))

    def test_dimension_mismatch(self):
        model = ApnModel.build()
        with self.assertRaises(ShapeMismatchError):
            predict_pillar(model, np.zeros((12, 99)), np.zeros((12, 100)))


class PredictBridgeTests(SimpleTestCase):

    def test_threshold_bounds(self):
        network = build_itn(seed=1)
        target = random_shape(10)
        self.assertFalse(predict_bridge(ItnModel(network, threshold=1.0), target).any())
        self.assertTrue(predict_bridge(ItnModel(network, threshold=0.0), target).all())

    def test_zero_weights_sit_at_half(self):
        model = zeroed(ItnModel.build())
        bridge = predict_bridge(model, random_shape(11))
        self.assertEqual(bridge.shape, (12, 100))
        self.assertEqual(bridge.dtype, np.uint8)
        self.assertTrue(bridge.all())

    def test_invalid_threshold(self):
        with self.assertRaises(ValueError):
            ItnModel(build_itn(), threshold=1.5)


class PredictSequenceTests(SimpleTestCase):

    def test_zero_weights_pick_first_class(self):
        model = zeroed(SmcModel.build())
        self.assertEqual(predict_sequence_smc(model, random_shape(12)), [1] * 10)

    def test_always_ten_pillars(self):
        model = SmcModel.build(seed=2)
        for seed in range(3):
            sequence = predict_sequence_smc(model, random_shape(seed))
            self.assertEqual(len(sequence), 10)
            self.assertTrue(all(1 <= k <= 32 for k in sequence))

    def test_each_head_sums_to_one(self):
        model = SmcModel.build(seed=5)
        out, _ = model.network.forward(random_shape(13)[None, None].astype(float))
        np.testing.assert_allclose(out[0].reshape(10, 32).sum(axis=1), 1.0, rtol=0, atol=1e-12)


class CheckpointDispatchTests(SimpleTestCase):

    def test_tags_select_model_types(self):
        cases = [(build_itn(), ItnModel), (build_smc(), SmcModel)]
        for network, model_type in cases:
            restored = load(save(Checkpoint(network)))
            self.assertIsInstance(from_checkpoint(restored), model_type)

    def test_expected_type_is_enforced(self):
        with self.assertRaises(ArchitectureMismatchError):
            from_checkpoint(Checkpoint(build_itn()), expected=ApnModel)

    def test_unknown_tag(self):
        network = Network((4,), [Dense(32), Softmax()], NLL(), tag='MYSTERY')
        with self.assertRaises(ArchitectureMismatchError):
            from_checkpoint(Checkpoint(network))

    def test_layout_must_match_tag(self):
        network = Network((4,), [Dense(32), Softmax()], NLL(), tag='APN')
        with self.assertRaises(ArchitectureMismatchError):
            ApnModel(network)
        with self.assertRaises(ArchitectureMismatchError):
            ApnModel(build_smc())


@override_settings(FLOWSCULPT={**settings.FLOWSCULPT, 'PROGRESS': False})
class ToyLearningTests(SimpleTestCase):

    def test_apn_separates_two_pillars(self):
        # a centred pillar against a large wall pillar, with at most one pillar before it
        library = PillarLibrary.build()
        classes = [1, 21]
        train_set = gen_apn(80, 0, library, lengths=(0, 1), classes=classes)
        valid_set = gen_apn(20, 0, library, lengths=(0, 1), split='valid', classes=classes)
        config = TrainConfig(learning_rate=0.01, batch_size=5, max_epochs=20, patience=20, seed=0)
        _, history = train(
            build_apn(seed=0),
            (train_set.inputs(), train_set.targets()),
            (valid_set.inputs(), valid_set.targets()),
            config,
        )
        self.assertLessEqual(len(history), 20)
        self.assertGreater(max(record.valid_accuracy for record in history), 0.9)
