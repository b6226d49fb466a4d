"""Dense networks in float64 with hand-written backpropagation.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. A network is an
ordered list of :class:`DenseLayer`; ``forward`` returns a :class:`ForwardTrace`
that ``backward`` consumes to produce parameter and input gradients.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .exceptions import (
    CheckpointFormatError,
    ConsistencyError,
    DimensionError,
    NumericError,
    ParameterError,
)

ACTIVATIONS = ("identity", "relu", "tanh")

CHECKPOINT_MAGIC = b"EXLB"
CHECKPOINT_VERSION = 1


def _activate(kind, a):
    if kind == "relu":
        return np.maximum(a, 0.0)
    if kind == "tanh":
        return np.tanh(a)
    return a


def _activation_grad(kind, a, h):
    # derivative of the activation evaluated at pre-activation a (output h)
    if kind == "relu":
        return (a > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - h * h
    return np.ones_like(a)


@dataclass
class DenseLayer:
    """Affine map ``h = act(x @ W.T + b)`` with ``W`` of shape (out, in)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        self.bias = np.array(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise DimensionError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise DimensionError(
                f"bias shape {self.bias.shape} does not match {self.weights.shape[0]} outputs"
            )
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]


class ForwardTrace(NamedTuple):
    """Intermediates of one forward pass, consumed by :meth:`Network.backward`."""

    inputs: list  # input to each layer
    preacts: list
    outputs: list
    network_id: int
    version: int

    @property
    def output(self):
        return self.outputs[-1]


class ParamGrads(NamedTuple):
    weights: list
    biases: list

    def as_list(self):
        """Gradients interleaved in the same order as ``Network.params()``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


class Network:
    """Feed-forward stack of dense layers."""

    def __init__(self, layers: Sequence[DenseLayer]):
        layers = list(layers)
        if not layers:
            raise ParameterError("a network needs at least one layer")
        for k in range(len(layers) - 1):
            if layers[k].out_dim != layers[k + 1].in_dim:
                raise DimensionError(
                    f"layer {k} has {layers[k].out_dim} outputs but layer {k + 1} "
                    f"expects {layers[k + 1].in_dim} inputs"
                )
        self.layers = layers
        self._version = 0

    def __repr__(self):
        widths = [self.input_dim] + [layer.out_dim for layer in self.layers]
        acts = ",".join(layer.activation for layer in self.layers)
        return f"Network({'->'.join(map(str, widths))}; {acts})"

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    @property
    def version(self):
        return self._version

    def mark_modified(self):
        """Invalidate outstanding traces after an in-place parameter change."""
        self._version += 1

    def params(self):
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.bias))
        return out

    def set_params(self, params):
        params = list(params)
        if len(params) != 2 * len(self.layers):
            raise DimensionError(f"expected {2 * len(self.layers)} arrays, got {len(params)}")
        for k, layer in enumerate(self.layers):
            w, b = params[2 * k], params[2 * k + 1]
            if w.shape != layer.weights.shape or b.shape != layer.bias.shape:
                raise DimensionError(f"parameter shape mismatch in layer {k}")
            layer.weights = np.array(w, dtype=np.float64)
            layer.bias = np.array(b, dtype=np.float64)
        self.mark_modified()

    @property
    def n_params(self):
        return sum(p.size for p in self.params())

    def flat_params(self):
        return np.concatenate([p.ravel() for p in self.params()])

    def param_hash(self):
        h = hashlib.sha256()
        for p in self.params():
            h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
        return h.hexdigest()

    def copy(self):
        return Network(
            [DenseLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def shape_signature(self):
        return [(l.in_dim, l.out_dim, l.activation) for l in self.layers]

    def forward(self, batch) -> ForwardTrace:
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[0] < 1:
            raise DimensionError(f"batch must have shape (B, {self.input_dim}), got {x.shape}")
        inputs, preacts, outputs = [], [], []
        h = x
        for k, layer in enumerate(self.layers):
            if h.shape[1] != layer.in_dim:
                raise DimensionError(
                    f"layer {k} expects width {layer.in_dim}, got {h.shape[1]}"
                )
            inputs.append(h)
            a = h @ layer.weights.T + layer.bias
            h = _activate(layer.activation, a)
            preacts.append(a)
            outputs.append(h)
        return ForwardTrace(inputs, preacts, outputs, id(self), self._version)

    def __call__(self, batch):
        return self.forward(batch).output

    def backward(self, trace: ForwardTrace, output_grad):
        """Return ``(ParamGrads, input_grad)`` for ``d loss / d output = output_grad``."""
        if trace.network_id != id(self) or trace.version != self._version:
            raise ConsistencyError("trace is stale: network changed since forward()")
        g = np.asarray(output_grad, dtype=np.float64)
        if g.shape != trace.output.shape:
            raise DimensionError(
                f"output_grad shape {g.shape} does not match output {trace.output.shape}"
            )
        w_grads = [None] * len(self.layers)
        b_grads = [None] * len(self.layers)
        for k in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[k]
            delta = g * _activation_grad(layer.activation, trace.preacts[k], trace.outputs[k])
            w_grads[k] = delta.T @ trace.inputs[k]
            b_grads[k] = delta.sum(axis=0)
            g = delta @ layer.weights
        return ParamGrads(w_grads, b_grads), g


def init_layer(in_dim, out_dim, activation, rng):
    """He-uniform for relu layers, Xavier-uniform otherwise; zero bias."""
    if activation == "relu":
        limit = np.sqrt(6.0 / in_dim)
    else:
        limit = np.sqrt(6.0 / (in_dim + out_dim))
    w = rng.uniform(-limit, limit, size=(out_dim, in_dim))
    return DenseLayer(w, np.zeros(out_dim), activation)


def build_mlp(sizes, rng, hidden_activation="relu", output_activation="identity"):
    """MLP with widths ``sizes[0] -> ... -> sizes[-1]``."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ParameterError(f"invalid layer sizes {sizes}")
    layers = []
    for k in range(len(sizes) - 1):
        act = output_activation if k == len(sizes) - 2 else hidden_activation
        layers.append(init_layer(sizes[k], sizes[k + 1], act, rng))
    return Network(layers)


def identity_network(dim):
    return Network([DenseLayer(np.eye(dim), np.zeros(dim), "identity")])


# -- optimizers ---------------------------------------------------------------


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.kind not in ("sgd_momentum", "adam"):
            raise ParameterError(f"unknown optimizer kind {self.kind!r}")
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be > 0")
        for name in ("momentum", "beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ParameterError(f"{name} must lie in [0, 1), got {value}")
        if self.weight_decay < 0:
            raise ParameterError("weight_decay must be non-negative")


@dataclass
class OptimizerState:
    step: int = 0
    slots: dict = field(default_factory=dict)


def optimizer_step(params, grads, config: OptimizerConfig, state: OptimizerState | None = None):
    """Apply one update and return ``(new_params, state)``.

    ``params`` are not modified. Plain SGD (momentum 0) gives ``p - lr * g``.
    """
    if state is None:
        state = OptimizerState()
    params = list(params)
    grads = list(grads)
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} parameters but {len(grads)} gradients")
    for k, (p, g) in enumerate(zip(params, grads)):
        if np.shape(p) != np.shape(g):
            raise DimensionError(f"parameter {k} has shape {np.shape(p)}, gradient {np.shape(g)}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {k}", step=state.step)
    state.step += 1
    lr = config.learning_rate
    new = []
    for k, (p, g) in enumerate(zip(params, grads)):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if config.weight_decay:
            g = g + config.weight_decay * p
        if config.kind == "sgd_momentum":
            if config.momentum:
                v = state.slots.get(k)
                v = g.copy() if v is None else config.momentum * v + g
                state.slots[k] = v
                new.append(p - lr * v)
            else:
                new.append(p - lr * g)
        else:
            m, v = state.slots.get(k, (np.zeros_like(p), np.zeros_like(p)))
            m = config.beta1 * m + (1.0 - config.beta1) * g
            v = config.beta2 * v + (1.0 - config.beta2) * g * g
            state.slots[k] = (m, v)
            m_hat = m / (1.0 - config.beta1**state.step)
            v_hat = v / (1.0 - config.beta2**state.step)
            new.append(p - lr * m_hat / (np.sqrt(v_hat) + config.eps))
    return new, state


class Optimizer:
    """Stateful wrapper that updates one or more networks in place."""

    def __init__(self, networks, config: OptimizerConfig):
        if isinstance(networks, Network):
            networks = [networks]
        self.networks = list(networks)
        self.config = config
        self.state = OptimizerState()

    def step(self, grads):
        """``grads`` is one ParamGrads (or list of arrays) per network."""
        if len(grads) != len(self.networks):
            raise DimensionError("one gradient set per network is required")
        params, flat = [], []
        for net, g in zip(self.networks, grads):
            params.extend(net.params())
            flat.extend(g.as_list() if isinstance(g, ParamGrads) else g)
        new, self.state = optimizer_step(params, flat, self.config, self.state)
        i = 0
        for net in self.networks:
            n = 2 * len(net.layers)
            net.set_params(new[i : i + n])
            i += n


# -- gradient checking ----------------------------------------------------------


def relative_error(analytic, numeric, floor=1e-12):
    denom = max(abs(analytic), abs(numeric), floor)
    return abs(analytic - numeric) / denom


def finite_diff_check(
    net: Network,
    loss_fn: Callable[[np.ndarray], tuple],
    batch,
    eps: float = 1e-5,
    include_input: bool = False,
    floor: float = 1e-12,
):
    """Largest relative error between backprop and central differences.

    ``loss_fn(output)`` must return ``(value, d value / d output)``. The
    network is restored to its original parameters on return.

    Each entry scores ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.
    Central differences carry round-off of roughly ``1e-16 * |loss| / eps``, so a
    parameter whose exact gradient is zero (e.g. the output bias under a
    shift-invariant loss) needs ``floor`` well above that to score near zero.
    """
    if not 0 < eps <= 1e-3:
        raise ParameterError("eps must lie in (0, 1e-3]")
    batch = np.asarray(batch, dtype=np.float64)
    trace = net.forward(batch)
    _, out_grad = loss_fn(trace.output)
    grads, input_grad = net.backward(trace, out_grad)
    worst = 0.0
    for p, g in zip(net.params(), grads.as_list()):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn(net(batch))[0]
            flat[i] = orig - eps
            down = loss_fn(net(batch))[0]
            flat[i] = orig
            worst = max(worst, relative_error(gflat[i], (up - down) / (2 * eps), floor))
    if include_input:
        x = batch.copy()
        xf = x.reshape(-1)
        gf = input_grad.reshape(-1)
        for i in range(xf.size):
            orig = xf[i]
            xf[i] = orig + eps
            up = loss_fn(net(x))[0]
            xf[i] = orig - eps
            down = loss_fn(net(x))[0]
            xf[i] = orig
            worst = max(worst, relative_error(gf[i], (up - down) / (2 * eps), floor))
    net.mark_modified()
    return worst


# -- checkpoints ------------------------------------------------------------------

_ACT_CODES = {name: i for i, name in enumerate(ACTIVATIONS)}


def save_checkpoint(net: Network, path):
    """Write ``net`` in the versioned little-endian EXLB format."""
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(net.layers))]
    for layer in net.layers:
        parts.append(struct.pack("<III", layer.in_dim, layer.out_dim, _ACT_CODES[layer.activation]))
        parts.append(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path, like: Network | None = None) -> Network:
    """Read a checkpoint; if ``like`` is given the architecture must match it."""
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic header")
    if len(data) < 12:
        raise CheckpointFormatError(f"{path}: truncated header")
    version, n_layers = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported format version {version}")
    offset = 12
    layers = []
    for k in range(n_layers):
        if len(data) < offset + 12:
            raise CheckpointFormatError(f"{path}: truncated in layer {k} header")
        in_dim, out_dim, code = struct.unpack_from("<III", data, offset)
        offset += 12
        if code >= len(ACTIVATIONS):
            raise CheckpointFormatError(f"{path}: unknown activation code {code}")
        n_w = in_dim * out_dim
        end = offset + 8 * (n_w + out_dim)
        if len(data) < end:
            raise CheckpointFormatError(f"{path}: truncated in layer {k} parameters")
        block = np.frombuffer(data, dtype="<f8", count=n_w + out_dim, offset=offset)
        offset = end
        layers.append(
            DenseLayer(
                block[:n_w].reshape(out_dim, in_dim).astype(np.float64),
                block[n_w:].astype(np.float64),
                ACTIVATIONS[code],
            )
        )
    if offset != len(data):
        raise CheckpointFormatError(f"{path}: {len(data) - offset} trailing bytes")
    net = Network(layers)
    if like is not None and net.shape_signature() != like.shape_signature():
        raise DimensionError(
            f"{path}: checkpoint architecture {net.shape_signature()} does not match "
            f"expected {like.shape_signature()}"
        )
    return net
