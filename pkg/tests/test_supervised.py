import numpy as np
import pytest
from sklearn.base import clone

from exlab.augment import ViewPolicy
from exlab.exceptions import ParameterError
from exlab.supervised import SupervisedClassifier

from conftest import TINY_ARCH


def test_learns_tiny_task(tiny_data):
    clf = SupervisedClassifier(TINY_ARCH, epochs=30, batch_size=32, random_state=0)
    clf.fit(tiny_data["train"].X, tiny_data["train"].labels)
    assert clf.loss_curve_[-1] < clf.loss_curve_[0]
    assert clf.score(tiny_data["train"].X, tiny_data["train"].labels) > 0.5


def test_deterministic_and_cloneable(tiny_data):
    est = SupervisedClassifier(TINY_ARCH, epochs=2, batch_size=32, random_state=4)
    a = clone(est).fit(tiny_data["train"].X, tiny_data["train"].labels)
    b = clone(est).fit(tiny_data["train"].X, tiny_data["train"].labels)
    assert a.encoder_.param_hash() == b.encoder_.param_hash()


def test_project_returns_encoder_features(tiny_data):
    clf = SupervisedClassifier(TINY_ARCH, epochs=1, batch_size=32).fit(tiny_data["train"].X, tiny_data["train"].labels)
    X = tiny_data["test"].X
    np.testing.assert_array_equal(clf.project(X), clf.encoder_(X))
    assert clf.decision_function(X).shape == (len(X), 4)


def test_augmented_training_needs_images(tiny_data):
    clf = SupervisedClassifier(TINY_ARCH, policy=ViewPolicy.simclr(), epochs=1, batch_size=32)
    with pytest.raises(ParameterError):
        clf.fit(tiny_data["train"].X, tiny_data["train"].labels)
    clf.fit(tiny_data["train"].images, tiny_data["train"].labels)
    assert len(clf.loss_curve_) == 1


def test_empty_dataset():
    with pytest.raises(ParameterError):
        SupervisedClassifier(TINY_ARCH).fit(np.zeros((0, 4)), np.zeros(0, int))
