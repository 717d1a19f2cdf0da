"""
Central finite-difference checks of analytic gradients.

Errors are norm-wise per array: ||a - n|| / max(||a|| + ||n||, 1e-8).
"""
import numpy as np


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    return float(np.linalg.norm(analytic - numeric) / max(scale, 1e-8))


def _sample_indices(size, max_checks, rng):
    if max_checks is None or size <= max_checks:
        return np.arange(size)
    return np.sort(rng.choice(size, size=max_checks, replace=False))


def _central_differences(array, indices, objective, epsilon):
    numeric = np.empty(len(indices))
    for slot, i in enumerate(indices):
        original = array.flat[i]
        array.flat[i] = original + epsilon
        plus = objective()
        array.flat[i] = original - epsilon
        minus = objective()
        array.flat[i] = original
        numeric[slot] = (plus - minus) / (2 * epsilon)
    return numeric


def grad_check(net, batch, targets, epsilon=1e-3, max_checks=None, seed=0):
    """
    Compares back-propagated parameter gradients with central differences
    of the network loss.

    Args:
        net (Network): Network under test; parameters are restored afterwards.
        batch (np.ndarray): Inputs.
        targets (np.ndarray): Labels or regression targets.
        epsilon (float): Perturbation size.
        max_checks (int | None): Entries sampled per parameter array (all when None).
        seed (int): Seeds the entry sampling.
    Returns:
        float: Largest relative error over the parameter arrays.
    """
    rng = np.random.default_rng(seed)
    batch = np.asarray(batch, dtype=np.float64)
    _, grads = net.gradients(batch, targets)

    def objective():
        return net.loss_value(net.forward(batch)[0], targets)

    worst = 0.0
    for param, grad in zip(net.parameters(), grads):
        indices = _sample_indices(param.size, max_checks, rng)
        numeric = _central_differences(param, indices, objective, epsilon)
        worst = max(worst, relative_error(grad.ravel()[indices], numeric))
    return worst


def check_layer(layer, x, epsilon=1e-3, seed=0):
    """
    Checks one built layer in isolation against the probe loss sum(out * R)
    for a random R, covering the input gradient and every parameter.

    Returns:
        float: Largest relative error.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x, dtype=np.float64)
    out, cache = layer.forward(x)
    probe = rng.normal(size=out.shape)
    dx, grads = layer.backward(probe, cache)

    def objective():
        return float((layer.forward(x)[0] * probe).sum())

    worst = 0.0
    for array, grad in [(x, dx), *zip(layer.parameters(), grads)]:
        indices = np.arange(array.size)
        numeric = _central_differences(array, indices, objective, epsilon)
        worst = max(worst, relative_error(grad.ravel(), numeric))
    return worst
