import numpy as np
import pytest
from sklearn.base import clone

from exlab.augment import ViewPolicy
from exlab.exceptions import DimensionError, ParameterError
from exlab.nn import build_mlp
from exlab.victim import (
    Architecture,
    ContrastiveVictim,
    VictimModel,
    rescale_representations,
    train_victim,
    train_victim_watermarked,
    watermark_accuracy,
)

from conftest import TINY_ARCH


def test_zero_epochs_serves_finite_vectors(tiny_data):
    victim = train_victim(tiny_data["train"], arch=TINY_ARCH, epochs=0, seed=0)
    reps = victim.represent(tiny_data["test"].X)
    assert reps.shape == (len(tiny_data["test"]), TINY_ARCH.rep_dim)
    assert np.all(np.isfinite(reps))
    assert victim.loss_history == []


def test_same_seed_gives_identical_parameters(tiny_data, tiny_victim):
    again = train_victim(tiny_data["train"], arch=TINY_ARCH, epochs=5, batch=32, seed=0)
    assert again.encoder.param_hash() == tiny_victim.encoder.param_hash()
    assert again.head.param_hash() == tiny_victim.head.param_hash()


def test_different_seed_differs(tiny_data, tiny_victim):
    other = train_victim(tiny_data["train"], arch=TINY_ARCH, epochs=1, batch=32, seed=1)
    assert other.encoder.param_hash() != tiny_victim.encoder.param_hash()


def test_training_lowers_info_nce(tiny_victim):
    history = [h["info_nce"] for h in tiny_victim.loss_history]
    assert len(history) == 5
    assert history[-1] < history[0]


def test_zero_watermark_weight_matches_plain_training(tiny_data):
    plain = train_victim(tiny_data["train"], arch=TINY_ARCH, epochs=2, batch=32, seed=3)
    weighted = train_victim_watermarked(tiny_data["train"], arch=TINY_ARCH, epochs=2, batch=32, lambda_wm=0.0, seed=3)
    assert weighted.aug_predictor is None
    assert weighted.encoder.param_hash() == plain.encoder.param_hash()


def test_watermarked_victim_has_predictor(tiny_data, tiny_wm_victim):
    assert tiny_wm_victim.aug_predictor is not None
    logits = tiny_wm_victim.watermark_logits(tiny_data["test"].X[:3])
    assert logits.shape == (3, 2)
    acc = watermark_accuracy(tiny_wm_victim.aug_predictor, tiny_wm_victim.encoder, tiny_data["test"].images)
    assert 0.0 <= acc <= 1.0


def test_plain_victim_has_no_watermark_logits(tiny_victim, tiny_data):
    with pytest.raises(ParameterError):
        tiny_victim.watermark_logits(tiny_data["test"].X[:1])


def test_watermark_accuracy_checks_width(tiny_wm_victim, tiny_data):
    wrong = build_mlp([tiny_data["test"].X.shape[1], 3], np.random.default_rng(0))
    with pytest.raises(DimensionError):
        watermark_accuracy(tiny_wm_victim.aug_predictor, wrong, tiny_data["test"].images)


def test_save_and_load_round_trip(tmp_path, tiny_wm_victim, tiny_data):
    tiny_wm_victim.save(tmp_path / "v")
    loaded = VictimModel.load(tmp_path / "v")
    X = tiny_data["test"].X
    np.testing.assert_array_equal(loaded.represent(X), tiny_wm_victim.represent(X))
    np.testing.assert_array_equal(loaded.project(X), tiny_wm_victim.project(X))
    np.testing.assert_array_equal(loaded.watermark_logits(X), tiny_wm_victim.watermark_logits(X))
    assert loaded.loss_history == tiny_wm_victim.loss_history


def test_rescaling_preserves_projections(tiny_victim, tiny_data):
    victim = VictimModel(tiny_victim.encoder.copy(), tiny_victim.head.copy())
    X = tiny_data["train"].images
    before = victim.project(X.reshape(len(X), -1))
    factor = rescale_representations(victim.encoder, [victim.head], X, 2.0)
    assert factor > 0
    assert victim.represent(X.reshape(len(X), -1)).std(axis=0).mean() == pytest.approx(2.0)
    np.testing.assert_allclose(victim.project(X.reshape(len(X), -1)), before, rtol=1e-10, atol=1e-12)


def test_output_std_option(tiny_data):
    arch = Architecture(hidden=(16,), rep_dim=8, head_hidden=8, proj_dim=4, output_std=1.0)
    victim = train_victim(tiny_data["train"], arch=arch, epochs=1, batch=32, seed=0)
    assert victim.represent(tiny_data["train"].X).std(axis=0).mean() == pytest.approx(1.0)
    assert victim.config["output_scale"] > 0


def test_estimator_api(tiny_data):
    est = ContrastiveVictim(TINY_ARCH, ViewPolicy.simclr(), epochs=1, batch_size=32, random_state=0)
    params = clone(est).get_params()
    assert params["epochs"] == 1 and params["random_state"] == 0
    reps = est.fit(tiny_data["train"].images).transform(tiny_data["test"].X)
    assert reps.shape[1] == TINY_ARCH.rep_dim
    assert est.project(tiny_data["test"].X).shape[1] == TINY_ARCH.proj_dim


@pytest.mark.parametrize(
    "kwargs", [{"batch_size": 1}, {"epochs": -1}, {"watermark_weight": -1.0}]
)
def test_estimator_validation(tiny_data, kwargs):
    with pytest.raises(ParameterError):
        ContrastiveVictim(TINY_ARCH, **kwargs).fit(tiny_data["train"].images)


def test_architecture_validation():
    with pytest.raises(ParameterError):
        Architecture(output_std=0.0)
    arch = Architecture(hidden=(8, 4), rep_dim=2)
    assert Architecture.from_dict(arch.to_dict()) == arch
    assert arch.encoder_sizes(16) == [16, 8, 4, 2]
