"""Representation losses with exact gradients.

Every loss returns a :class:`LossOutput` holding the scalar value and one
gradient array per *trainable* input, in argument order. Inputs documented as
constant (victim outputs, stop-gradient branches) get no gradient entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .exceptions import DimensionError, NumericError, PairingError, ParameterError

LOSS_TAGS = ("mse", "neg_cosine_sym", "info_nce", "soft_nn", "sup_con", "barlow", "wasserstein_1d")

DEFAULT_INFO_NCE_TEMPERATURE = 0.5
DEFAULT_SOFT_NN_TEMPERATURE = 1.0
DEFAULT_BARLOW_LAMBDA = 5e-3


class LossOutput(NamedTuple):
    value: float
    grads: tuple


@dataclass(frozen=True)
class LossKind:
    """A loss tag plus its hyperparameters."""

    tag: str = "mse"
    temperature: float | None = None
    redundancy_weight: float = DEFAULT_BARLOW_LAMBDA

    def __post_init__(self):
        if self.tag not in LOSS_TAGS:
            raise ParameterError(f"unknown loss {self.tag!r}; expected one of {LOSS_TAGS}")
        if self.temperature is not None and not self.temperature > 0:
            raise ParameterError("temperature must be > 0")
        if self.redundancy_weight < 0:
            raise ParameterError("redundancy weight must be >= 0")

    @property
    def tau(self):
        if self.temperature is not None:
            return self.temperature
        if self.tag == "soft_nn":
            return DEFAULT_SOFT_NN_TEMPERATURE
        return DEFAULT_INFO_NCE_TEMPERATURE

    @property
    def uses_labels(self):
        return self.tag == "sup_con"


def _as2d(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {x.shape}")
    return x


def _same_shape(a, b, names):
    if a.shape != b.shape:
        raise DimensionError(f"{names[0]} shape {a.shape} != {names[1]} shape {b.shape}")


def _check_finite(value, grads):
    if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericError("loss produced a non-finite value or gradient")
    return LossOutput(float(value), tuple(grads))


def _normalize_rows(x, name):
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise NumericError(f"{name} row {int(bad[0])} has zero norm")
    return x / norms[:, None], norms


def _normalize_backward(grad_u, u, norms):
    # d/dx of x/|x| applied to grad_u
    return (grad_u - u * np.sum(u * grad_u, axis=1, keepdims=True)) / norms[:, None]


def mse(y_a, y_v) -> LossOutput:
    """Mean squared error; ``y_v`` is constant."""
    y_a, y_v = _as2d(y_a, "y_a"), _as2d(y_v, "y_v")
    _same_shape(y_a, y_v, ("y_a", "y_v"))
    diff = y_a - y_v
    return _check_finite(np.mean(diff**2), (2.0 * diff / diff.size,))


def _cos_and_grad(p, z):
    pn = np.linalg.norm(p, axis=1)
    zn = np.linalg.norm(z, axis=1)
    for name, norms in (("p", pn), ("z", zn)):
        bad = np.flatnonzero(norms == 0.0)
        if bad.size:
            raise NumericError(f"{name} row {int(bad[0])} has zero norm")
    cos = np.sum(p * z, axis=1) / (pn * zn)
    grad = z / (pn * zn)[:, None] - cos[:, None] * p / (pn**2)[:, None]
    return cos, grad


def neg_cosine_sym(p1, z2, p2, z1) -> LossOutput:
    """Symmetrized negative cosine similarity with stop-gradient on ``z1, z2``.

    Gradients are returned for ``(p1, p2)``.
    """
    p1, z2, p2, z1 = (_as2d(x, n) for x, n in ((p1, "p1"), (z2, "z2"), (p2, "p2"), (z1, "z1")))
    for x, n in ((z2, "z2"), (p2, "p2"), (z1, "z1")):
        _same_shape(p1, x, ("p1", n))
    c1, g1 = _cos_and_grad(p1, z2)
    c2, g2 = _cos_and_grad(p2, z1)
    batch = p1.shape[0]
    value = np.mean(-0.5 * c1 - 0.5 * c2)
    return _check_finite(value, (-0.5 * g1 / batch, -0.5 * g2 / batch))


def _masked_log_softmax_grad(sim, positive_weights):
    """Loss and d/dsim for rows ``-sum_k w_ik sim_ik + logsumexp_{k != i} sim_ik``.

    ``positive_weights`` rows sum to one and vanish on the diagonal.
    """
    n = sim.shape[0]
    masked = sim.copy()
    np.fill_diagonal(masked, -np.inf)
    lse = logsumexp(masked, axis=1)
    per_anchor = lse - np.sum(positive_weights * np.where(np.isinf(masked), 0.0, masked), axis=1)
    soft = np.exp(masked - lse[:, None])
    grad = (soft - positive_weights) / n
    return np.mean(per_anchor), grad


def _cosine_similarity_loss(z, weights, tau):
    u, norms = _normalize_rows(z, "z")
    sim = u @ u.T / tau
    value, g_sim = _masked_log_softmax_grad(sim, weights)
    grad_u = (g_sim + g_sim.T) @ u / tau
    return value, _normalize_backward(grad_u, u, norms)


def info_nce(z, z_prime, temperature=DEFAULT_INFO_NCE_TEMPERATURE) -> LossOutput:
    """NT-Xent over the 2B pooled views; gradients for ``(z, z_prime)``."""
    z, z_prime = _as2d(z, "z"), _as2d(z_prime, "z_prime")
    _same_shape(z, z_prime, ("z", "z_prime"))
    if not temperature > 0:
        raise ParameterError("temperature must be > 0")
    batch = z.shape[0]
    if batch < 2:
        raise ParameterError("info_nce needs a batch of at least 2 to form negatives")
    pooled = np.concatenate([z, z_prime])
    n = 2 * batch
    weights = np.zeros((n, n))
    idx = np.arange(n)
    weights[idx, (idx + batch) % n] = 1.0
    value, grad = _cosine_similarity_loss(pooled, weights, temperature)
    return _check_finite(value, (grad[:batch], grad[batch:]))


def sup_con(z, labels, temperature=DEFAULT_INFO_NCE_TEMPERATURE) -> LossOutput:
    """Supervised contrastive loss (mean log-probability over same-label rows)."""
    z = _as2d(z, "z")
    labels = np.asarray(labels)
    if labels.shape != (z.shape[0],):
        raise DimensionError(f"labels shape {labels.shape} does not match {z.shape[0]} rows")
    if not temperature > 0:
        raise ParameterError("temperature must be > 0")
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    counts = same.sum(axis=1)
    if np.any(counts == 0):
        row = int(np.flatnonzero(counts == 0)[0])
        raise PairingError(f"row {row} (label {labels[row]!r}) has no other row with its label")
    weights = same / counts[:, None]
    value, grad = _cosine_similarity_loss(z, weights, temperature)
    return _check_finite(value, (grad,))


def soft_nn(reps, groups, temperature=DEFAULT_SOFT_NN_TEMPERATURE) -> LossOutput:
    """Soft nearest-neighbour loss; rows sharing a ``groups`` id are positives."""
    reps = _as2d(reps, "reps")
    groups = np.asarray(groups)
    n = reps.shape[0]
    if groups.shape != (n,):
        raise DimensionError(f"groups shape {groups.shape} does not match {n} rows")
    if not temperature > 0:
        raise ParameterError("temperature must be > 0")
    pos = groups[:, None] == groups[None, :]
    np.fill_diagonal(pos, False)
    if np.any(pos.sum(axis=1) == 0):
        raise PairingError(f"row {int(np.flatnonzero(pos.sum(axis=1) == 0)[0])} has no positive")
    if np.any(pos.sum(axis=1) == n - 1):
        raise PairingError(f"row {int(np.flatnonzero(pos.sum(axis=1) == n - 1)[0])} has no negative")
    sq = np.sum(reps**2, axis=1)
    dist = np.maximum(sq[:, None] + sq[None, :] - 2.0 * reps @ reps.T, 0.0)
    logits = -dist / temperature
    off = logits.copy()
    np.fill_diagonal(off, -np.inf)
    pos_logits = np.where(pos, logits, -np.inf)
    lse_all = logsumexp(off, axis=1)
    lse_pos = logsumexp(pos_logits, axis=1)
    value = np.mean(lse_all - lse_pos)
    g_logits = (np.exp(off - lse_all[:, None]) - np.exp(pos_logits - lse_pos[:, None])) / n
    # d logits_ij / d r_i = -2 (r_i - r_j) / tau, symmetric in i, j
    h = g_logits + g_logits.T
    grad = (-2.0 / temperature) * (h.sum(axis=1)[:, None] * reps - h @ reps)
    return _check_finite(value, (grad,))


def _standardize(x, floor=1e-8):
    mu = x.mean(axis=0)
    centred = x - mu
    std = np.sqrt(np.mean(centred**2, axis=0))
    floored = std < floor
    std = np.where(floored, floor, std)
    return centred / std, std, floored


def _standardize_backward(grad_a, a, std, floored):
    mean_g = grad_a.mean(axis=0)
    mean_ga = np.mean(grad_a * a, axis=0)
    full = (grad_a - mean_g - a * mean_ga) / std
    partial = (grad_a - mean_g) / std
    return np.where(floored, partial, full)


def barlow(z, z_prime, redundancy_weight=DEFAULT_BARLOW_LAMBDA) -> LossOutput:
    """Barlow Twins cross-correlation loss; gradients for ``(z, z_prime)``."""
    z, z_prime = _as2d(z, "z"), _as2d(z_prime, "z_prime")
    _same_shape(z, z_prime, ("z", "z_prime"))
    batch = z.shape[0]
    if batch < 2:
        raise ParameterError("barlow needs a batch of at least 2")
    if redundancy_weight < 0:
        raise ParameterError("redundancy weight must be >= 0")
    a, sa, fa = _standardize(z)
    b, sb, fb = _standardize(z_prime)
    c = a.T @ b / batch
    diag = np.diag(c)
    off = c - np.diag(diag)
    value = np.sum((1.0 - diag) ** 2) + redundancy_weight * np.sum(off**2)
    g_c = 2.0 * redundancy_weight * off + np.diag(-2.0 * (1.0 - diag))
    grad_a = b @ g_c.T / batch
    grad_b = a @ g_c / batch
    return _check_finite(
        value, (_standardize_backward(grad_a, a, sa, fa), _standardize_backward(grad_b, b, sb, fb))
    )


def wasserstein_1d(y_a, y_v) -> LossOutput:
    """Per-dimension 1-D Wasserstein-1 distance between batch distributions."""
    y_a, y_v = _as2d(y_a, "y_a"), _as2d(y_v, "y_v")
    _same_shape(y_a, y_v, ("y_a", "y_v"))
    order = np.argsort(y_a, axis=0, kind="stable")
    sorted_a = np.take_along_axis(y_a, order, axis=0)
    sorted_v = np.sort(y_v, axis=0)
    diff = sorted_a - sorted_v
    value = np.mean(np.abs(diff))
    grad = np.empty_like(y_a)
    np.put_along_axis(grad, order, np.sign(diff) / diff.size, axis=0)
    return _check_finite(value, (grad,))


def softmax_cross_entropy(logits, labels) -> LossOutput:
    """Mean softmax cross-entropy against integer class labels."""
    logits = _as2d(logits, "logits")
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"labels shape {labels.shape} does not match {n} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ParameterError(f"labels must lie in [0, {k})")
    lse = logsumexp(logits, axis=1)
    value = np.mean(lse - logits[np.arange(n), labels])
    probs = np.exp(logits - lse[:, None])
    probs[np.arange(n), labels] -= 1.0
    return _check_finite(value, (probs / n,))


def representation_loss(kind: LossKind, y_a, y_v, labels=None):
    """Loss between attacker outputs ``y_a`` and constant victim outputs ``y_v``.

    Returns ``(value, d value / d y_a)``. Row ``i`` of both arrays stems from
    the same source input.
    """
    y_a, y_v = _as2d(y_a, "y_a"), _as2d(y_v, "y_v")
    _same_shape(y_a, y_v, ("y_a", "y_v"))
    batch = y_a.shape[0]
    tag = kind.tag
    if tag == "mse":
        out = mse(y_a, y_v)
        return out.value, out.grads[0]
    if tag == "neg_cosine_sym":
        out = neg_cosine_sym(y_a, y_v, y_a, y_v)
        return out.value, out.grads[0] + out.grads[1]
    if tag == "info_nce":
        out = info_nce(y_a, y_v, kind.tau)
        return out.value, out.grads[0]
    if tag == "soft_nn":
        src = np.arange(batch)
        out = soft_nn(np.concatenate([y_a, y_v]), np.concatenate([src, src]), kind.tau)
        return out.value, out.grads[0][:batch]
    if tag == "sup_con":
        if labels is None:
            raise ParameterError("sup_con requires labels")
        labels = np.asarray(labels)
        out = sup_con(np.concatenate([y_a, y_v]), np.concatenate([labels, labels]), kind.tau)
        return out.value, out.grads[0][:batch]
    if tag == "barlow":
        out = barlow(y_a, y_v, kind.redundancy_weight)
        return out.value, out.grads[0]
    out = wasserstein_1d(y_a, y_v)
    return out.value, out.grads[0]
