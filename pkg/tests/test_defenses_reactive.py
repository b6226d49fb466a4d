import json

import numpy as np
import pytest

from exlab.augment import ViewPolicy
from exlab.defenses.reactive import (
    DIScores,
    RepresentationAdapter,
    bootstrap_rates,
    di_scores,
    di_test,
    ownership_ttest,
    rep_distance,
    watermark_success_rate,
)
from exlab.exceptions import DimensionError, ParameterError
from exlab.nn import build_mlp


def test_chance_rates_are_inconclusive():
    verdict = ownership_ttest(np.full(20, 0.5))
    assert verdict.claim == "inconclusive"
    assert verdict.ttest.delta_mu == 0.0


def test_high_rates_claim_stolen():
    rates = 0.9 + 0.01 * np.random.default_rng(0).normal(size=30)
    verdict = ownership_ttest(rates)
    assert verdict.claim == "stolen"
    record = json.loads(verdict.to_json())
    assert set(record) >= {"test", "t", "df", "p", "delta_mu", "claim"}


def test_too_few_rates():
    with pytest.raises(ParameterError):
        ownership_ttest(np.full(5, 0.9))


def test_watermark_rate_on_owner(tiny_wm_victim, tiny_data, rng):
    rate = watermark_success_rate(tiny_wm_victim.encoder, tiny_wm_victim.aug_predictor, tiny_data["test"].images, 40, rng)
    assert 0.0 <= rate <= 1.0
    rates = bootstrap_rates(tiny_wm_victim.encoder, tiny_wm_victim.aug_predictor, tiny_data["test"].images, 20, rng)
    assert rates.shape == (20,)


def test_watermark_width_mismatch_needs_adapter(tiny_wm_victim, tiny_data, rng):
    other = build_mlp([64, 5], np.random.default_rng(1))
    images = tiny_data["test"].images
    with pytest.raises(DimensionError):
        watermark_success_rate(other, tiny_wm_victim.aug_predictor, images, 10, rng)
    adapter = RepresentationAdapter().fit(other, tiny_wm_victim.encoder, tiny_data["train"].images)
    assert 0.0 <= watermark_success_rate(adapter, tiny_wm_victim.aug_predictor, images, 10, rng) <= 1.0


def test_identity_policy_gives_zero_scores(tiny_victim, tiny_data):
    X = tiny_data["test"].images[:10]
    scores = di_scores(tiny_victim, X, X, n_aug=1, policy=ViewPolicy())
    np.testing.assert_array_equal(scores.l_t, 0.0)
    np.testing.assert_array_equal(scores.l_p, 0.0)


def test_identical_sets_score_identically(tiny_victim, tiny_data):
    X = tiny_data["test"].images[:10]
    a = di_scores(tiny_victim, X, X, n_aug=3, rng=np.random.default_rng(0))
    b = di_scores(tiny_victim, X, X, n_aug=3, rng=np.random.default_rng(0))
    np.testing.assert_array_equal(a.l_t, b.l_t)
    np.testing.assert_array_equal(a.l_p, b.l_p)


def test_scores_match_brute_force(tiny_victim, tiny_data):
    from exlab.augment import augment_batch

    X = tiny_data["test"].images[:6]
    policy = ViewPolicy.simclr()
    scores = di_scores(tiny_victim, X, X, n_aug=4, policy=policy, rng=np.random.default_rng(3))
    rng = np.random.default_rng(3)
    flat = X.reshape(len(X), -1)
    clean = tiny_victim.project(flat)
    expected = np.zeros(len(X))
    for _ in range(4):
        views = augment_batch(X, policy, rng).reshape(len(X), -1)
        expected += np.linalg.norm(tiny_victim.project(views) - clean, axis=1)
    np.testing.assert_allclose(scores.l_t, expected / 4, rtol=1e-12)


def test_equal_scores_give_zero_t():
    s = np.array([1.0, 2.0, 3.0])
    result, claim = di_test(DIScores(s, s.copy()))
    assert result.t == 0.0 and claim == "inconclusive"


def test_larger_public_scores_claim_stolen():
    rng = np.random.default_rng(0)
    result, claim = di_test(DIScores(rng.normal(1.0, 0.1, 50), rng.normal(2.0, 0.1, 50)))
    assert result.t > 0 and claim == "stolen"


def test_di_validation(tiny_victim, tiny_data):
    X = tiny_data["test"].images
    with pytest.raises(ParameterError):
        di_scores(tiny_victim, X[:3], X[:4])
    with pytest.raises(ParameterError):
        di_scores(tiny_victim, X[:3], X[:3], n_aug=0)


def test_rep_distance(tiny_victim, tiny_data):
    X = tiny_data["test"].images
    assert rep_distance(tiny_victim.encoder, tiny_victim.encoder.copy(), X) == 0.0
    with pytest.raises(DimensionError):
        rep_distance(tiny_victim.encoder, build_mlp([64, 3], np.random.default_rng(0)), X)
