import math

import numpy as np
from django.test import SimpleTestCase, override_settings

from .checkpoint import Checkpoint, load, save
from .exceptions import CheckpointError, EmptyDatasetError, LabelRangeError, ShapeMismatchError
from .gradcheck import check_layer, grad_check
from .layers import (
    Activation,
    ConcatTowers,
    Conv2dValid,
    Dense,
    Flatten,
    MaxPool2x2,
    Softmax,
)
from .network import MSE, NLL, Network, SummedNLL
from .training import TrainConfig, train

GRAD_TOLERANCE = 1e-4


def zero_classifier(features=6, classes=32):
    net = Network((features,), [Dense(classes), Softmax()], NLL())
    for param in net.parameters():
        param[...] = 0.0
    return net


class ForwardTests(SimpleTestCase):

    def test_zero_weights_give_uniform_posterior(self):
        net = zero_classifier()
        out, _ = net.forward(np.random.default_rng(0).normal(size=(3, 6)))
        np.testing.assert_allclose(out, np.full((3, 32), 1 / 32), rtol=0, atol=1e-15)

    def test_softmax_rows_sum_to_one(self):
        net = Network((10,), [Dense(32), Softmax()], NLL(), seed=3)
        out, _ = net.forward(np.random.default_rng(1).normal(scale=5.0, size=(20, 10)))
        self.assertTrue(np.all(out >= 0))
        np.testing.assert_allclose(out.sum(axis=1), 1.0, rtol=0, atol=1e-12)

    def test_valid_conv_shape(self):
        net = Network((1, 29, 100), [Conv2dValid(40, 5, 5)], MSE())
        self.assertEqual(net.output_shape, (40, 25, 96))
        out, _ = net.forward(np.zeros((2, 1, 29, 100)))
        self.assertEqual(out.shape, (2, 40, 25, 96))

    def test_pooling_floors_odd_extents(self):
        net = Network((3, 25, 5), [MaxPool2x2()], MSE())
        self.assertEqual(net.output_shape, (3, 12, 2))

    def test_full_action_stack_shapes(self):
        net = Network((1, 29, 100), [
            Conv2dValid(40, 5, 5), Activation('tanh'), MaxPool2x2(),
            Conv2dValid(100, 3, 3), Activation('tanh'), MaxPool2x2(),
            Flatten(), Dense(500), Activation('tanh'), Dense(32), Softmax(),
        ], NLL())
        shapes = [shape for _, shape in net.describe()]
        self.assertEqual(shapes, [
            (40, 25, 96), (40, 25, 96), (40, 12, 48),
            (100, 10, 46), (100, 10, 46), (100, 5, 23),
            (11500,), (500,), (500,), (32,), (32,),
        ])

    def test_shape_mismatch_names_layer(self):
        net = Network((1, 8, 8), [Conv2dValid(2, 3, 3), Flatten(), Dense(4)], MSE())
        with self.assertRaises(ShapeMismatchError) as ctx:
            net.forward(np.zeros((1, 1, 8, 9)))
        self.assertEqual(ctx.exception.expected, (1, 8, 8))
        self.assertEqual(ctx.exception.actual, (1, 8, 9))
        self.assertIn('input', str(ctx.exception))

    def test_layer_rejects_wrong_input(self):
        layer = Dense(4)
        layer.build((5,), np.random.default_rng(0))
        with self.assertRaisesMessage(ShapeMismatchError, 'Dense(4)'):
            layer.forward(np.zeros((2, 6)))


class LossTests(SimpleTestCase):

    def test_perfect_prediction_has_zero_nll(self):
        outputs = np.eye(32)[[0, 4, 31]]
        self.assertAlmostEqual(NLL().value(outputs, np.array([1, 5, 32])), 0.0, places=12)

    def test_uniform_posterior_nll(self):
        outputs = np.full((4, 32), 1 / 32)
        self.assertAlmostEqual(NLL().value(outputs, np.array([1, 2, 3, 4])), math.log(32), places=12)
        self.assertAlmostEqual(math.log(32), 3.4657, places=4)

    def test_summed_nll_adds_heads(self):
        outputs = np.full((2, 320), 1 / 32)
        labels = np.tile(np.arange(1, 11), (2, 1))
        self.assertAlmostEqual(SummedNLL(10).value(outputs, labels), 10 * math.log(32), places=10)

    def test_label_out_of_range(self):
        outputs = np.full((1, 32), 1 / 32)
        with self.assertRaises(LabelRangeError):
            NLL().value(outputs, np.array([33]))
        with self.assertRaises(LabelRangeError):
            NLL().value(outputs, np.array([0]))

    def test_mse_is_non_negative(self):
        rng = np.random.default_rng(2)
        self.assertGreaterEqual(MSE().value(rng.random((3, 5)), rng.random((3, 5))), 0.0)


class BackwardTests(SimpleTestCase):

    def test_mse_at_target_has_zero_gradients(self):
        net = Network((4,), [Dense(3), Activation('sigmoid')], MSE(), seed=1)
        x = np.random.default_rng(0).normal(size=(5, 4))
        target, _ = net.forward(x)
        _, grads = net.gradients(x, target.copy())
        for grad, param in zip(grads, net.parameters()):
            self.assertEqual(grad.shape, param.shape)
            np.testing.assert_array_equal(grad, 0.0)

    def test_dense_gradient_is_outer_product(self):
        net = Network((2,), [Dense(2)], MSE())
        W, b = net.parameters()
        W[...] = [[1.0, 2.0], [3.0, 4.0]]
        b[...] = [0.5, -0.5]
        x = np.array([[1.0, -2.0]])
        target = np.array([[0.0, 1.0]])
        _, (dW, db) = net.gradients(x, target)
        # out = x W + b = [-4.5, -6.5]; residual = out - target
        residual = np.array([-4.5, -7.5])
        np.testing.assert_allclose(dW, np.outer(x[0], residual))
        np.testing.assert_allclose(db, residual)

    def test_each_layer_kind_against_finite_differences(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            cases = [
                (Conv2dValid(2, 3, 2), (2, 5, 6), rng.normal(size=(2, 2, 5, 6))),
                # distinct values keep every pooling window's winner stable
                (MaxPool2x2(), (2, 5, 7), 0.05 * rng.permutation(2 * 2 * 5 * 7).reshape(2, 2, 5, 7)),
                (Dense(3), (4,), rng.normal(size=(3, 4))),
                (Activation('sigmoid'), (5,), rng.normal(size=(3, 5))),
                (Activation('tanh'), (5,), rng.normal(size=(3, 5))),
                (Activation('relu'), (5,), rng.choice([-1, 1], size=(3, 5)) * rng.uniform(0.1, 1, size=(3, 5))),
                (Softmax(), (6,), rng.normal(size=(3, 6))),
                (Softmax(groups=3), (6,), rng.normal(size=(3, 6))),
                (Flatten(), (2, 3, 2), rng.normal(size=(2, 2, 3, 2))),
                (ConcatTowers([[Flatten(), Dense(2)], [Flatten(), Dense(3)]]), (2, 3, 2),
                 rng.normal(size=(2, 2, 3, 2))),
            ]
            for layer, input_shape, x in cases:
                layer.build(input_shape, rng)
                with self.subTest(seed=seed, layer=layer.name):
                    self.assertLess(check_layer(layer, x, seed=seed), GRAD_TOLERANCE)

    def test_each_loss_against_finite_differences(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x = rng.normal(size=(4, 5))
            nll = Network((5,), [Dense(4), Activation('tanh'), Dense(6), Softmax()], NLL(), seed=seed)
            mse = Network((5,), [Dense(4), Activation('sigmoid'), Dense(3), Activation('sigmoid')], MSE(), seed=seed)
            summed = Network((5,), [Dense(4), Activation('tanh'), Dense(6), Softmax(groups=3)], SummedNLL(3), seed=seed)
            cases = [
                (nll, rng.integers(1, 7, size=4)),
                (mse, rng.random((4, 3))),
                (summed, rng.integers(1, 3, size=(4, 3))),
            ]
            for net, targets in cases:
                with self.subTest(seed=seed, loss=type(net.loss).__name__):
                    self.assertLess(grad_check(net, x, targets), GRAD_TOLERANCE)

    def test_small_conv_network_against_finite_differences(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            net = Network((1, 6, 7), [
                Conv2dValid(2, 3, 3), Activation('tanh'), Flatten(), Dense(4), Softmax(),
            ], NLL(), seed=seed)
            with self.subTest(seed=seed):
                self.assertLess(grad_check(net, rng.normal(size=(3, 1, 6, 7)), rng.integers(1, 5, size=3)),
                                GRAD_TOLERANCE)

    def test_grad_check_restores_parameters(self):
        net = Network((3,), [Dense(2), Softmax()], NLL(), seed=4)
        before = net.copy_parameters()
        grad_check(net, np.ones((2, 3)), np.array([1, 2]))
        for param, saved in zip(net.parameters(), before):
            np.testing.assert_array_equal(param, saved)


class SgdTests(SimpleTestCase):

    def setUp(self):
        self.net = Network((3,), [Dense(2), Activation('tanh'), Dense(2)], MSE(), seed=5)

    def test_zero_gradients_leave_parameters(self):
        before = self.net.copy_parameters()
        self.net.sgd_step([np.zeros_like(p) for p in self.net.parameters()], 0.1)
        for param, saved in zip(self.net.parameters(), before):
            np.testing.assert_array_equal(param, saved)

    def test_unit_rate_with_theta_gradient_zeroes_parameters(self):
        self.net.sgd_step(self.net.copy_parameters(), 1.0)
        for param in self.net.parameters():
            np.testing.assert_array_equal(param, 0.0)

    def test_two_steps_equal_one_summed_step(self):
        rng = np.random.default_rng(6)
        first = [rng.normal(size=p.shape) for p in self.net.parameters()]
        second = [rng.normal(size=p.shape) for p in self.net.parameters()]
        twin = Network((3,), [Dense(2), Activation('tanh'), Dense(2)], MSE(), seed=5)
        self.net.sgd_step(first, 0.01).sgd_step(second, 0.01)
        twin.sgd_step([a + b for a, b in zip(first, second)], 0.01)
        for a, b in zip(self.net.parameters(), twin.parameters()):
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


@override_settings(FLOWSCULPT={'PROGRESS': False})
class TrainingTests(SimpleTestCase):

    def _diverging_sets(self):
        # training pushes class 1 up while validation asks for class 2
        x = np.ones((10, 3))
        return (x, np.ones(10, dtype=int)), (x[:4], np.full(4, 2))

    def test_patience_stops_after_first_non_improving_epoch(self):
        train_set, valid_set = self._diverging_sets()
        net = Network((3,), [Dense(2), Softmax()], NLL(), seed=7)
        config = TrainConfig(learning_rate=0.1, batch_size=5, max_epochs=10, patience=1, seed=11)
        checkpoint, history = train(net, train_set, valid_set, config)
        self.assertEqual(len(history), 2)
        self.assertGreater(history[1].valid_loss, history[0].valid_loss)
        self.assertEqual(checkpoint.best_metric, history[0].valid_loss)

        reference = Network((3,), [Dense(2), Softmax()], NLL(), seed=7)
        one_epoch = TrainConfig(learning_rate=0.1, batch_size=5, max_epochs=1, patience=1, seed=11)
        train(reference, train_set, valid_set, one_epoch)
        for a, b in zip(net.parameters(), reference.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_same_seed_gives_identical_runs(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(40, 4))
        y = (x[:, 0] > 0).astype(int) + 1
        blobs = []
        histories = []
        for _ in range(2):
            net = Network((4,), [Dense(5), Activation('tanh'), Dense(2), Softmax()], NLL(), seed=9, tag='toy')
            checkpoint, history = train(net, (x[:30], y[:30]), (x[30:], y[30:]),
                                        TrainConfig(batch_size=7, max_epochs=5, seed=3))
            blobs.append(save(checkpoint))
            histories.append(history)
        self.assertEqual(histories[0], histories[1])
        self.assertEqual(blobs[0], blobs[1])

    def test_empty_dataset_is_rejected(self):
        net = zero_classifier()
        with self.assertRaises(EmptyDatasetError):
            train(net, (np.zeros((0, 6)), np.zeros(0)), (np.zeros((1, 6)), np.ones(1)), TrainConfig())

    def test_invalid_config(self):
        with self.assertRaises(ValueError):
            TrainConfig(learning_rate=0)
        with self.assertRaises(ValueError):
            TrainConfig(patience=0)


class CheckpointTests(SimpleTestCase):

    def _network(self):
        return Network((2, 6, 6), [
            ConcatTowers([
                [Conv2dValid(2, 3, 3), Activation('tanh'), MaxPool2x2(), Flatten()],
                [Conv2dValid(2, 3, 3), Activation('tanh'), MaxPool2x2(), Flatten()],
            ]),
            Dense(4), Activation('relu'), Dense(6), Softmax(groups=2),
        ], SummedNLL(2), seed=12, tag='TOY')

    def test_round_trip_is_bitwise(self):
        original = Checkpoint(self._network(), epochs=7, best_metric=0.25, seed=99)
        restored = load(save(original))
        self.assertEqual(restored.tag, 'TOY')
        self.assertEqual((restored.epochs, restored.best_metric, restored.seed), (7, 0.25, 99))
        self.assertEqual(restored.network.describe(), original.network.describe())
        self.assertIsInstance(restored.network.loss, SummedNLL)
        self.assertEqual(restored.network.loss.heads, 2)
        for a, b in zip(original.network.parameters(), restored.network.parameters()):
            self.assertEqual(a.tobytes(), b.tobytes())

    def test_truncated_file(self):
        blob = save(Checkpoint(self._network()))
        with self.assertRaisesMessage(CheckpointError, 'truncated'):
            load(blob[:len(blob) // 2])

    def test_bad_magic(self):
        blob = save(Checkpoint(self._network()))
        with self.assertRaises(CheckpointError):
            load(b'XXXX' + blob[4:])

    def test_towers_have_independent_parameters(self):
        net = self._network()
        left, right = net.layers[0].towers
        self.assertFalse(np.array_equal(left[0].W, right[0].W))
        self.assertEqual(len(net.parameters()), 4 + 4)
