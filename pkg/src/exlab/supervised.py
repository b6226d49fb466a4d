"""A small supervised classifier used as the dataset-inference contrast case."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .augment import augment_batch
from .exceptions import NumericError, ParameterError
from .losses import softmax_cross_entropy
from .nn import Optimizer, OptimizerConfig, build_mlp
from .validation import check_images, check_labels, check_matrix, check_positive_int
from .victim import Architecture


class SupervisedClassifier(BaseEstimator, ClassifierMixin):
    """Encoder plus linear softmax layer trained end to end on labels.

    ``project`` returns the penultimate (encoder) features, which is where
    dataset inference scores this model.

    Parameters
    ----------
    architecture : Architecture, optional
        Only ``hidden`` and ``rep_dim`` are used.
    policy : ViewPolicy, optional
        Each batch is replaced by one augmented view per image. ``None``
        trains on the raw images.
    optimizer : OptimizerConfig, optional
    epochs : int
    batch_size : int
    random_state : int
    """

    def __init__(self, architecture=None, policy=None, optimizer=None, epochs=30, batch_size=128, random_state=0):
        self.architecture = architecture
        self.policy = policy
        self.optimizer = optimizer
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y):
        images = check_images(X) if np.ndim(X) == 3 else None
        X = check_matrix(X)
        if len(X) == 0:
            raise ParameterError("cannot train on an empty dataset")
        n_classes = int(np.max(y)) + 1
        y = check_labels(y, len(X), n_classes)
        epochs = check_positive_int(self.epochs, "epochs", minimum=0)
        batch = check_positive_int(self.batch_size, "batch_size")
        if self.policy is not None and images is None:
            raise ParameterError("augmented training needs (N, H, W) images")
        arch = self.architecture or Architecture()
        init_ss, train_ss = np.random.SeedSequence(self.random_state).spawn(2)
        rng_init = np.random.default_rng(init_ss)
        encoder = build_mlp(arch.encoder_sizes(X.shape[1]), rng_init)
        classifier = build_mlp([arch.rep_dim, n_classes], rng_init)
        opt = Optimizer([encoder, classifier], self.optimizer or OptimizerConfig())
        rng = np.random.default_rng(train_ss)
        self.loss_curve_ = []
        step = 0
        for _ in range(epochs):
            order = rng.permutation(len(X))
            total = 0.0
            for start in range(0, len(X), batch):
                idx = order[start : start + batch]
                if self.policy is None:
                    batch_x = X[idx]
                else:
                    batch_x = augment_batch(images[idx], self.policy, rng).reshape(len(idx), -1)
                enc_trace = encoder.forward(batch_x)
                cls_trace = classifier.forward(enc_trace.output)
                loss = softmax_cross_entropy(cls_trace.output, y[idx])
                if not np.isfinite(loss.value):
                    raise NumericError(f"training loss became {loss.value}", step=step, seed=self.random_state)
                cls_grads, rep_grad = classifier.backward(cls_trace, loss.grads[0])
                enc_grads, _ = encoder.backward(enc_trace, rep_grad)
                opt.step([enc_grads, cls_grads])
                total += loss.value * len(idx)
                step += 1
            self.loss_curve_.append(total / len(X))
        self.encoder_ = encoder
        self.classifier_ = classifier
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = X.shape[1]
        return self

    def project(self, X):
        return self.encoder_(check_matrix(X, self.n_features_in_))

    def decision_function(self, X):
        return self.classifier_(self.project(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
