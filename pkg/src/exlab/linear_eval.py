"""Linear evaluation: a softmax probe trained on frozen representations."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .exceptions import ConsistencyError, ParameterError
from .losses import softmax_cross_entropy
from .nn import DenseLayer, Network, Optimizer, OptimizerConfig, init_layer
from .synthdata import LabeledDataset
from .validation import check_labels, check_matrix, check_positive_int

_ENCODE_BATCH = 1024


def encode(encoder, X):
    """Representations of ``X`` under ``encoder``.

    ``encoder`` may be a :class:`Network`, any callable mapping a flat batch
    to vectors, or ``None`` for the identity.
    """
    X = check_matrix(X)
    if encoder is None:
        return X
    if len(X) == 0:
        out_dim = encoder.output_dim if isinstance(encoder, Network) else 0
        return np.zeros((0, out_dim))
    return np.concatenate([np.asarray(encoder(X[i : i + _ENCODE_BATCH])) for i in range(0, len(X), _ENCODE_BATCH)])


class LinearProbe(BaseEstimator, ClassifierMixin):
    """Softmax-regression probe on top of a frozen encoder.

    Parameters
    ----------
    encoder : Network, callable or None
        Frozen feature extractor. Its parameters are hashed before and after
        fitting and a change raises ``ConsistencyError``.
    epochs : int
        Passes over the training set.
    batch_size : int
    optimizer : OptimizerConfig, optional
        Defaults to Adam with learning rate 1e-2.
    standardize : bool
        Standardize features with training-set statistics before the linear
        layer. The affine map folds into the probe, so it stays linear.
    n_classes : int, optional
        Defaults to ``max(y) + 1``.
    random_state : int
    """

    def __init__(
        self,
        encoder=None,
        epochs=50,
        batch_size=128,
        optimizer=None,
        standardize=True,
        n_classes=None,
        random_state=0,
    ):
        self.encoder = encoder
        self.epochs = epochs
        self.batch_size = batch_size
        self.optimizer = optimizer
        self.standardize = standardize
        self.n_classes = n_classes
        self.random_state = random_state

    def _features(self, X):
        F = encode(self.encoder, X)
        if self.standardize:
            F = (F - self.mean_) / self.scale_
        return F

    def fit(self, X, y):
        X = check_matrix(X)
        if len(X) == 0:
            raise ParameterError("cannot fit a probe on an empty dataset")
        n_classes = self.n_classes if self.n_classes is not None else int(np.max(y)) + 1
        y = check_labels(y, len(X), n_classes)
        epochs = check_positive_int(self.epochs, "epochs", minimum=0)
        batch = check_positive_int(self.batch_size, "batch_size")
        frozen_hash = self.encoder.param_hash() if isinstance(self.encoder, Network) else None

        F = encode(self.encoder, X)
        if self.standardize:
            self.mean_ = F.mean(axis=0)
            std = F.std(axis=0)
            self.scale_ = np.where(std > 1e-12, std, 1.0)
            F = (F - self.mean_) / self.scale_
        rng = np.random.default_rng(self.random_state)
        layer = init_layer(F.shape[1], n_classes, "identity", rng)
        net = Network([layer])
        opt = Optimizer(net, self.optimizer or OptimizerConfig(learning_rate=1e-2))
        self.loss_curve_ = []
        for _ in range(epochs):
            order = rng.permutation(len(F))
            total = 0.0
            for start in range(0, len(F), batch):
                idx = order[start : start + batch]
                trace = net.forward(F[idx])
                loss = softmax_cross_entropy(trace.output, y[idx])
                grads, _ = net.backward(trace, loss.grads[0])
                opt.step([grads])
                total += loss.value * len(idx)
            self.loss_curve_.append(total / len(F))

        if frozen_hash is not None and self.encoder.param_hash() != frozen_hash:
            raise ConsistencyError("encoder parameters changed during probe training")
        self.network_ = net
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def weights(self):
        """Probe weights, shape (classes, d)."""
        return self.network_.layers[0].weights

    @property
    def bias(self):
        return self.network_.layers[0].bias

    def decision_function(self, X):
        return self.network_(self._features(check_matrix(X, self.n_features_in_)))

    def predict_proba(self, X):
        logits = self.decision_function(X)
        logits = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    @classmethod
    def from_weights(cls, weights, bias, encoder=None):
        """A probe with fixed parameters and no feature standardization."""
        weights = np.asarray(weights, dtype=np.float64)
        probe = cls(encoder=encoder, standardize=False, n_classes=weights.shape[0])
        probe.network_ = Network([DenseLayer(weights, np.asarray(bias, dtype=np.float64), "identity")])
        probe.classes_ = np.arange(weights.shape[0])
        if encoder is None:
            probe.n_features_in_ = weights.shape[1]
        else:
            probe.n_features_in_ = encoder.input_dim if isinstance(encoder, Network) else None
        return probe


def train_probe(encoder, data: LabeledDataset, opt: OptimizerConfig | None = None, epochs=50, seed=0):
    """Fit a :class:`LinearProbe` on ``data`` through the frozen ``encoder``."""
    probe = LinearProbe(encoder, epochs=epochs, optimizer=opt, n_classes=data.n_classes, random_state=seed)
    return probe.fit(data.X, data.labels)


def top1(probe: LinearProbe, encoder, test: LabeledDataset):
    """Fraction of ``test`` whose argmax prediction matches the label."""
    if len(test) == 0:
        raise ParameterError("top-1 accuracy of an empty test set is undefined")
    if encoder is not probe.encoder:
        probe = _rebind(probe, encoder)
    return float(np.mean(probe.predict(test.X) == test.labels))


def _rebind(probe, encoder):
    clone = LinearProbe.__new__(LinearProbe)
    clone.__dict__.update(probe.__dict__)
    clone.encoder = encoder
    return clone
