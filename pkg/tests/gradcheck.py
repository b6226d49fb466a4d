"""Finite-difference helpers shared by the gradient tests and the acceptance suite."""

from __future__ import annotations

import numpy as np

from exlab import losses
from exlab.nn import build_mlp, finite_diff_check, relative_error

EPS = 1e-5
KINK_MARGIN = 1e-3


def input_fd_error(fn, arrays, n_grads, eps=EPS):
    """Max relative error of ``fn(*arrays).grads`` against central differences.

    Only the first ``n_grads`` arrays are differentiated; the rest are held
    constant, matching the loss's documented gradient list.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    out = fn(*arrays)
    worst = 0.0
    for k in range(n_grads):
        flat = arrays[k].reshape(-1)
        analytic = out.grads[k].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = fn(*arrays).value
            flat[i] = orig - eps
            down = fn(*arrays).value
            flat[i] = orig
            worst = max(worst, relative_error(analytic[i], (up - down) / (2 * eps)))
    return worst


def _wasserstein_inputs(rng, n, d):
    # away from sort ties and sign changes, where the loss has kinks
    while True:
        a, v = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        gaps = np.diff(np.sort(a, axis=0), axis=0)
        diff = np.sort(a, axis=0) - np.sort(v, axis=0)
        if gaps.min() > KINK_MARGIN and np.abs(diff).min() > KINK_MARGIN:
            return a, v


def loss_case(tag, seed):
    """``(fn, arrays, n_grads)`` for one random instance of loss ``tag``."""
    rng = np.random.default_rng(seed)
    n, d = 6, 4
    if tag == "mse":
        return losses.mse, [rng.normal(size=(n, d)), rng.normal(size=(n, d))], 1
    if tag == "neg_cosine_sym":
        return losses.neg_cosine_sym, [rng.normal(size=(n, d)) for _ in range(4)], 1
    if tag == "info_nce":
        return (lambda z, zp: losses.info_nce(z, zp, 0.5)), [rng.normal(size=(n, d)), rng.normal(size=(n, d))], 2
    if tag == "soft_nn":
        groups = np.repeat(np.arange(n // 2), 2)
        return (lambda r: losses.soft_nn(r, groups, 1.0)), [rng.normal(size=(n, d))], 1
    if tag == "sup_con":
        labels = np.array([0, 0, 1, 1, 2, 2])
        return (lambda z: losses.sup_con(z, labels, 0.5)), [rng.normal(size=(n, d))], 1
    if tag == "barlow":
        return (lambda z, zp: losses.barlow(z, zp, 5e-3)), [rng.normal(size=(n, d)), rng.normal(size=(n, d))], 2
    if tag == "wasserstein_1d":
        return losses.wasserstein_1d, list(_wasserstein_inputs(rng, n, d)), 1
    raise ValueError(tag)


def loss_fd_error(tag, seed):
    fn, arrays, n_grads = loss_case(tag, seed)
    if tag == "neg_cosine_sym":
        # gradients are for p1 and p2 (arguments 0 and 2)
        p1, z2, p2, z1 = arrays
        e1 = input_fd_error(lambda a, b, c, d: fn(a, b, c, d), [p1, z2, p2, z1], 1)
        swapped = input_fd_error(lambda c, b, a, d: _second(fn(a, b, c, d)), [p2, z2, p1, z1], 1)
        return max(e1, swapped)
    return input_fd_error(fn, arrays, n_grads)


def _second(out):
    return losses.LossOutput(out.value, (out.grads[1],))


def away_from_kinks(net, rng, batch, in_dim):
    """A batch whose relu pre-activations all sit at least ``KINK_MARGIN`` from zero."""
    for _ in range(1000):
        x = rng.normal(size=(batch, in_dim))
        trace = net.forward(x)
        pre = [a for a, layer in zip(trace.preacts, net.layers) if layer.activation == "relu"]
        if all(np.abs(a).min() > KINK_MARGIN for a in pre):
            return x
    raise RuntimeError("could not sample away from relu kinks")


def layer_fd_error(activation, seed):
    """Error of a 3-layer network using ``activation`` in every hidden layer, MSE on top."""
    rng = np.random.default_rng(seed)
    net = build_mlp([5, 6, 4, 3], rng, hidden_activation=activation, output_activation=activation)
    x = away_from_kinks(net, rng, 4, 5)
    target = rng.normal(size=(4, 3))

    def loss(out):
        value = losses.mse(out, target)
        return value.value, value.grads[0]

    return finite_diff_check(net, loss, x, EPS, include_input=True)
