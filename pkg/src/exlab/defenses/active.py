"""Output-perturbation defenses.

``perturb_noise`` adds Gaussian noise to every served vector.
``perturb_if_similar`` replaces outputs the detector flags with a large noise
draw. ``poison`` searches a small ball around the clean output for a vector
that misdirects an attacker's training gradient while keeping a legitimate
user's downstream gradient aligned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..exceptions import DimensionError, NumericError, ParameterError
from ..linear_eval import LinearProbe
from ..losses import softmax_cross_entropy
from ..nn import Network, _activation_grad


@dataclass(frozen=True)
class NoiseConfig:
    mean: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ParameterError("noise sigma must be >= 0")


def perturb_noise(y, cfg: NoiseConfig, rng):
    """``y + n`` with ``n ~ Normal(mean, sigma^2)`` iid per coordinate."""
    y = np.asarray(y, dtype=np.float64)
    if cfg.sigma == 0 and cfg.mean == 0:
        return y.copy()
    return y + rng.normal(cfg.mean, cfg.sigma, size=y.shape)


def perturb_if_similar(y, verdict, big_noise: NoiseConfig, rng):
    """Replace ``y`` by a pure noise draw when ``verdict.flagged``."""
    y = np.asarray(y, dtype=np.float64)
    if not verdict.flagged:
        return y.copy()
    return rng.normal(big_noise.mean, big_noise.sigma, size=y.shape)


# -- parameter-space gradients -------------------------------------------------------


def jacobian(F: Network, x):
    """Jacobian of ``F(x)`` w.r.t. the flattened parameters, for one input.

    Columns follow ``F.flat_params()`` order (W0, b0, W1, b1, ...); shape is
    ``(output_dim, n_params)``.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    trace = F.forward(x)
    L = len(F.layers)
    cols = [None] * (2 * L)
    # sensitivity of the output to each layer's pre-activation, last layer first
    sens = np.diag(_activation_grad(F.layers[-1].activation, trace.preacts[-1], trace.outputs[-1])[0])
    for k in range(L - 1, -1, -1):
        cols[2 * k] = (sens[:, :, None] * trace.inputs[k][0][None, None, :]).reshape(F.output_dim, -1)
        cols[2 * k + 1] = sens
        if k:
            act = _activation_grad(F.layers[k - 1].activation, trace.preacts[k - 1], trace.outputs[k - 1])[0]
            sens = (sens @ F.layers[k].weights) * act[None, :]
    return np.concatenate(cols, axis=1)


def attacker_grad(F: Network, x, target, method="closed_form"):
    """``-(2/n) J^T (F(x) - target)``: the negated MSE gradient over F's parameters.

    ``n`` is the output width. ``method="autodiff"`` computes the same vector
    through ``Network.backward``.
    """
    target = np.asarray(target, dtype=np.float64).ravel()
    if target.shape != (F.output_dim,):
        raise DimensionError(f"target has {target.size} entries, F emits {F.output_dim}")
    n = F.output_dim
    if method == "closed_form":
        out = F(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
        return -(2.0 / n) * jacobian(F, x).T @ (out - target)
    if method == "autodiff":
        trace = F.forward(np.asarray(x, dtype=np.float64).reshape(1, -1))
        grads, _ = F.backward(trace, (2.0 / n) * (trace.output - target[None, :]))
        return -np.concatenate([g.ravel() for g in grads.as_list()])
    raise ParameterError(f"unknown method {method!r}")


def _linear_classifier(G):
    """Return ``(W, b, mean, scale)`` for a single-layer softmax classifier."""
    if isinstance(G, LinearProbe):
        net = G.network_
        mean = G.mean_ if G.standardize else None
        scale = G.scale_ if G.standardize else None
    else:
        net, mean, scale = G, None, None
    if not isinstance(net, Network) or len(net.layers) != 1 or net.layers[0].activation != "identity":
        raise ParameterError("the downstream surrogate must be a single linear layer")
    layer = net.layers[0]
    if mean is None:
        mean, scale = np.zeros(layer.in_dim), np.ones(layer.in_dim)
    return layer.weights, layer.bias, mean, scale


def _target_vector(t, n_classes):
    t = np.asarray(t)
    if t.ndim == 0:
        if not 0 <= int(t) < n_classes:
            raise ParameterError(f"target label {int(t)} out of range for {n_classes} classes")
        return np.eye(n_classes)[int(t)]
    t = t.astype(np.float64).ravel()
    if t.shape != (n_classes,):
        raise DimensionError(f"target vector has {t.size} entries, expected {n_classes}")
    return t


def _softmax(logits):
    e = np.exp(logits - logits.max())
    return e / e.sum()


def legit_grad(G, y, t, method="closed_form"):
    """``grad_phi log G(y)^T t`` over the classifier parameters ``phi = (W, b)``.

    ``t`` is a class index or a (one-hot) weight vector. The closed form is
    ``[vec((t - p sum(t)) u^T), t - p sum(t)]`` with ``u`` the classifier input.
    """
    W, b, mean, scale = _linear_classifier(G)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape != (W.shape[1],):
        raise DimensionError(f"y has {y.size} entries, classifier expects {W.shape[1]}")
    tv = _target_vector(t, W.shape[0])
    u = (y - mean) / scale
    if method == "closed_form":
        r = tv - _softmax(W @ u + b) * tv.sum()
        return np.concatenate([np.outer(r, u).ravel(), r])
    if method == "autodiff":
        net = G.network_ if isinstance(G, LinearProbe) else G
        trace = net.forward(u[None, :])
        if np.ndim(t) == 0:
            ce = softmax_cross_entropy(trace.output, np.array([int(t)]))
            out_grad = ce.grads[0]
        else:
            # cross-entropy against a weight vector: d(-t^T log p)/dlogits
            p = _softmax(trace.output[0])
            out_grad = (p * tv.sum() - tv)[None, :]
        grads, _ = net.backward(trace, out_grad)
        return -np.concatenate([g.ravel() for g in grads.as_list()])
    raise ParameterError(f"unknown method {method!r}")


# -- prediction poisoning -------------------------------------------------------------


@dataclass
class PoisonConfig:
    """Surrogates and search settings for :func:`poison`.

    ``step_size`` defaults to ``epsilon / 20``. Each step moves ``step_size``
    along the normalized descent direction, then projects onto the ball.
    """

    surrogate_attacker: Network
    surrogate_downstream: object
    target: object
    epsilon: float = 1.0
    beta: float = 1.0
    steps: int = 100
    step_size: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be > 0")
        if self.steps < 1:
            raise ParameterError("steps must be >= 1")
        if self.step_size is not None and not self.step_size > 0:
            raise ParameterError("step_size must be > 0")


class PoisonStep(NamedTuple):
    step: int
    sim_ab: float
    sim_cd: float
    objective: float
    radius: float


class PoisonResult(NamedTuple):
    y_tilde: np.ndarray
    sim_ab: float
    sim_cd: float
    objective: float
    trace: list


def _cos_with_grad(u, v):
    """``cos(u, v)`` and its gradient with respect to ``v``."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise NumericError("cosine similarity of a zero vector is undefined")
    c = float(u @ v) / (nu * nv)
    return c, u / (nu * nv) - c * v / (nv * nv)


class _PoisonObjective:
    """``cos(a, b(y~)) - beta * cos(c, d(y~))`` and its gradient in ``y~``."""

    def __init__(self, y_v, x, cfg: PoisonConfig):
        F = cfg.surrogate_attacker
        self.beta = cfg.beta
        self.J = jacobian(F, x)
        self.n = F.output_dim
        self.a = attacker_grad(F, x, y_v)
        self.y_v = y_v
        self.W, self.b, self.mean, self.scale = _linear_classifier(cfg.surrogate_downstream)
        self.t = _target_vector(cfg.target, self.W.shape[0])
        self.c = self._d(y_v)[0]

    def _d(self, y):
        u = (y - self.mean) / self.scale
        p = _softmax(self.W @ u + self.b)
        r = self.t - p * self.t.sum()
        return np.concatenate([np.outer(r, u).ravel(), r]), u, p, r

    def __call__(self, y):
        # b is affine in y~: b = a + (2/n) J^T (y~ - y_v)
        b = self.a + (2.0 / self.n) * self.J.T @ (y - self.y_v)
        sim_ab, g_b = _cos_with_grad(self.a, b)
        grad_ab = (2.0 / self.n) * self.J @ g_b
        d, u, p, r = self._d(y)
        sim_cd, g_d = _cos_with_grad(self.c, d)
        k, m = self.W.shape
        g_w, g_r = g_d[: k * m].reshape(k, m), g_d[k * m :]
        g_r = g_w @ u + g_r
        S = (np.diag(p) - np.outer(p, p)) * self.t.sum()
        g_u = g_w.T @ r - self.W.T @ (S @ g_r)
        grad_cd = g_u / self.scale
        objective = sim_ab - self.beta * sim_cd
        if not np.isfinite(objective):
            raise NumericError("poisoning objective is not finite")
        return objective, sim_ab, sim_cd, grad_ab - self.beta * grad_cd


def _project(y, center, radius):
    delta = y - center
    norm = np.linalg.norm(delta)
    return center + delta * (radius / norm) if norm > radius else y


def poison(y_v, x, cfg: PoisonConfig) -> PoisonResult:
    """Projected descent on ``sim(a, b) - beta * sim(c, d)`` within ``||y~ - y_v|| <= epsilon``.

    ``y~ = y_v`` is a stationary point (both similarities equal 1), so the
    search starts with one seeded random step of length ``step_size``.
    """
    y_v = np.asarray(y_v, dtype=np.float64).ravel()
    if y_v.shape != (cfg.surrogate_attacker.output_dim,):
        raise DimensionError("y_v width must equal the surrogate attacker's output width")
    objective = _PoisonObjective(y_v, x, cfg)
    eta = cfg.step_size if cfg.step_size is not None else cfg.epsilon / 20.0
    rng = np.random.default_rng(cfg.seed)
    y = y_v.copy()
    value, sim_ab, sim_cd, grad = objective(y)
    trace = [PoisonStep(0, sim_ab, sim_cd, value, 0.0)]
    best = (value, y.copy(), sim_ab, sim_cd)
    for step in range(1, cfg.steps + 1):
        norm = np.linalg.norm(grad)
        if step == 1 or norm < 1e-300:
            direction = rng.normal(size=y.shape)
            y = y + eta * direction / np.linalg.norm(direction)
        else:
            y = y - eta * grad / norm
        y = _project(y, y_v, cfg.epsilon)
        radius = float(np.linalg.norm(y - y_v))
        if radius > cfg.epsilon * (1 + 1e-12):
            raise NumericError("projection left the epsilon ball", step=step, seed=cfg.seed)
        value, sim_ab, sim_cd, grad = objective(y)
        trace.append(PoisonStep(step, sim_ab, sim_cd, value, radius))
        if value < best[0]:
            best = (value, y.copy(), sim_ab, sim_cd)
    value, y_best, sim_ab, sim_cd = best
    return PoisonResult(y_best, sim_ab, sim_cd, value, trace)
