"""
Minibatch SGD with early stopping on the validation loss.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from tqdm import tqdm

from .checkpoint import Checkpoint
from .exceptions import EmptyDatasetError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """
    Attributes:
        learning_rate (float): SGD step size.
        batch_size (int): Samples per minibatch.
        max_epochs (int): Hard epoch limit.
        patience (int): Epochs without validation improvement before stopping.
        seed (int): Seeds the per-epoch minibatch permutations.
    """
    learning_rate: float = 0.01
    batch_size: int = 50
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f'learning_rate must be positive, got {self.learning_rate}')
        if self.batch_size < 1:
            raise ValueError(f'batch_size must be at least 1, got {self.batch_size}')
        if self.patience < 1:
            raise ValueError(f'patience must be at least 1, got {self.patience}')
        if self.max_epochs < 1:
            raise ValueError(f'max_epochs must be at least 1, got {self.max_epochs}')
        if self.seed < 0:
            raise ValueError(f'seed must be non-negative, got {self.seed}')


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float
    valid_accuracy: float | None


def evaluate(net, inputs, targets, chunk=500):
    """
    Returns:
        tuple[float, float | None]: Loss and accuracy (None for regression losses).
    """
    outputs = net.predict(inputs, chunk=chunk)
    return net.loss_value(outputs, targets), net.loss.accuracy(outputs, targets)


def train(net, train_set, valid_set, config):
    """
    Trains `net` in place and keeps the parameters of the best validation epoch.

    Args:
        net (Network): Network to train.
        train_set (tuple): (inputs, targets) arrays.
        valid_set (tuple): (inputs, targets) arrays.
        config (TrainConfig): Optimiser and stopping settings.
    Returns:
        tuple[Checkpoint, list[EpochRecord]]: Best-epoch checkpoint and per-epoch history.
    Raises:
        EmptyDatasetError: If either set has no samples.
    """
    train_x, train_y = train_set
    valid_x, valid_y = valid_set
    if len(train_x) == 0 or len(valid_x) == 0:
        raise EmptyDatasetError('training and validation sets must be non-empty')

    rng = np.random.default_rng(config.seed)
    progress = settings.FLOWSCULPT['PROGRESS']
    history = []
    best_loss = math.inf
    best_epoch = 0
    best_params = net.copy_parameters()
    batches = math.ceil(len(train_x) / config.batch_size)

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_x))
        total = 0.0
        for b in tqdm(range(batches), desc=f'epoch {epoch}', leave=False, disable=not progress):
            picks = order[b * config.batch_size:(b + 1) * config.batch_size]
            loss, grads = net.gradients(train_x[picks], train_y[picks])
            net.sgd_step(grads, config.learning_rate)
            total += loss * len(picks)
        valid_loss, valid_accuracy = evaluate(net, valid_x, valid_y)
        record = EpochRecord(epoch, total / len(train_x), valid_loss, valid_accuracy)
        history.append(record)

        if valid_loss < best_loss:
            best_loss, best_epoch = valid_loss, epoch
            best_params = net.copy_parameters()
        logger.info(
            'epoch %d: train %.6f valid %.6f acc %s (best epoch %d)',
            epoch, record.train_loss, valid_loss,
            'n/a' if valid_accuracy is None else f'{valid_accuracy:.4f}', best_epoch,
        )
        if epoch - best_epoch >= config.patience:
            logger.info('early stop at epoch %d, restoring epoch %d', epoch, best_epoch)
            break

    net.load_parameters(best_params)
    checkpoint = Checkpoint(
        network=net,
        epochs=len(history),
        best_metric=best_loss,
        seed=config.seed,
    )
    return checkpoint, history
