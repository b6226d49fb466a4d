"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionError, ParameterError


def check_images(X, image_shape=None):
    """Return ``X`` as a float64 (N, H, W) stack.

    Flat (N, D) input is reshaped with ``image_shape`` or, failing that, to a
    square image.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        if image_shape is not None and X.shape[1:] != tuple(image_shape):
            raise DimensionError(f"expected images of shape {tuple(image_shape)}, got {X.shape[1:]}")
        return X
    if X.ndim != 2:
        raise DimensionError(f"expected (N, H, W) or (N, D) input, got shape {X.shape}")
    if image_shape is None:
        side = int(round(np.sqrt(X.shape[1])))
        if side * side != X.shape[1]:
            raise DimensionError("cannot infer a square image shape from flat input")
        image_shape = (side, side)
    if int(np.prod(image_shape)) != X.shape[1]:
        raise DimensionError(f"flat width {X.shape[1]} does not match image shape {tuple(image_shape)}")
    return X.reshape(len(X), *image_shape)


def check_matrix(X, n_features=None, name="X"):
    """Return ``X`` as a finite float64 matrix, flattening trailing axes."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        raise DimensionError(f"{name} must be 2-D; reshape single samples with X[None, :]")
    if X.ndim > 2:
        X = X.reshape(len(X), -1)
    if n_features is not None and X.shape[1] != n_features:
        raise DimensionError(f"{name} has {X.shape[1]} features, expected {n_features}")
    if not np.all(np.isfinite(X)):
        raise ParameterError(f"{name} contains non-finite values")
    return X


def check_labels(y, n_samples, n_classes=None):
    y = np.asarray(y)
    if y.shape != (n_samples,):
        raise DimensionError(f"expected {n_samples} labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise ParameterError("labels must be integers")
        y = y.astype(np.int64)
    if y.size and y.min() < 0:
        raise ParameterError("labels must be non-negative")
    if n_classes is not None and y.size and y.max() >= n_classes:
        raise ParameterError(f"label {int(y.max())} is out of range for {n_classes} classes")
    return y.astype(np.int64)


def check_random_state(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng(seed)


def check_positive_int(value, name, minimum=1):
    if int(value) != value or value < minimum:
        raise ParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
