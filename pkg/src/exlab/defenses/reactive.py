"""Ownership verification after the fact: watermarks and dataset inference."""

from __future__ import annotations

import json
from typing import NamedTuple

import numpy as np
from sklearn.linear_model import Ridge

from ..augment import ViewPolicy, augment_batch, watermark_batch
from ..exceptions import DimensionError, ParameterError
from ..linear_eval import encode
from ..stats import TTestResult, one_sample_t, welch_t
from ..validation import check_images

ALPHA = 0.05


def _claim(result: TTestResult, alpha=ALPHA):
    return "stolen" if result.p < alpha else "inconclusive"


def verdict_json(test, result: TTestResult, claim, **extra):
    """One JSON object per test: ``{test, t, df, p, delta_mu, claim}``."""
    return json.dumps({"test": test, **result.to_dict(), "claim": claim, **extra}, sort_keys=True)


# -- watermark ------------------------------------------------------------------------


class RepresentationAdapter:
    """Ridge map from a suspect's representation space to the victim's.

    Used only when the widths differ; verdicts record that it was applied.
    """

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, suspect_encoder, reference_encoder, images):
        X = check_images(images).reshape(len(images), -1)
        self.suspect_encoder = suspect_encoder
        self.ridge_ = Ridge(alpha=self.alpha).fit(encode(suspect_encoder, X), encode(reference_encoder, X))
        return self

    def __call__(self, X):
        return self.ridge_.predict(encode(self.suspect_encoder, X))


def watermark_success_rate(suspect_encoder, aug_predictor, probe_images, n_pairs, rng):
    """Accuracy of ``aug_predictor`` on the suspect's representations of rotated views.

    ``n_pairs`` images are drawn from ``probe_images``; each contributes two
    views, so the rate is over ``2 * n_pairs`` predictions.
    """
    images = check_images(probe_images)
    if n_pairs < 1:
        raise ParameterError("n_pairs must be >= 1")
    idx = rng.choice(len(images), size=n_pairs, replace=n_pairs > len(images))
    views, labels = watermark_batch(images[idx], rng)
    reps = encode(suspect_encoder, views.reshape(len(views), -1))
    if reps.shape[1] != aug_predictor.input_dim:
        raise DimensionError(
            f"suspect representations have width {reps.shape[1]} but the predictor expects "
            f"{aug_predictor.input_dim}; fit a RepresentationAdapter first"
        )
    return float(np.mean(np.argmax(aug_predictor(reps), axis=1) == labels))


def bootstrap_rates(suspect_encoder, aug_predictor, probe_images, n_sets=20, rng=None):
    """Success rates over ``n_sets`` disjoint probe subsets (one pair per image)."""
    images = check_images(probe_images)
    rng = rng if rng is not None else np.random.default_rng(0)
    if n_sets < 1 or len(images) < n_sets:
        raise ParameterError(f"cannot split {len(images)} images into {n_sets} disjoint probe sets")
    subsets = np.array_split(rng.permutation(len(images)), n_sets)
    return np.array(
        [watermark_success_rate(suspect_encoder, aug_predictor, images[np.sort(s)], len(s), rng) for s in subsets]
    )


class WatermarkVerdict(NamedTuple):
    success_rate: float
    ttest: TTestResult
    claim: str
    adapter_used: bool = False

    def to_json(self):
        return verdict_json(
            "watermark_ownership",
            self.ttest,
            self.claim,
            success_rate=self.success_rate,
            adapter_used=self.adapter_used,
        )


def ownership_ttest(suspect_rates, baseline_rate=0.5, min_samples=20, adapter_used=False) -> WatermarkVerdict:
    """One-sided one-sample t-test of mean success rate > ``baseline_rate``.

    When all rates are equal the decision is exact: stolen iff the rate
    exceeds the baseline.
    """
    rates = np.asarray(suspect_rates, dtype=np.float64).ravel()
    if rates.size < min_samples:
        raise ParameterError(f"need at least {min_samples} resampled rates, got {rates.size}")
    result = one_sample_t(rates, baseline_rate)
    return WatermarkVerdict(float(rates.mean()), result, _claim(result), adapter_used)


# -- dataset inference ----------------------------------------------------------------


class DIScores(NamedTuple):
    l_t: np.ndarray  # private (training) set
    l_p: np.ndarray  # public set


def _projector(model):
    return model.project if hasattr(model, "project") else model


def di_scores(model, private_set, public_set, n_aug=10, policy: ViewPolicy | None = None, rng=None) -> DIScores:
    """Per-point mean l2 gap between ``g(f(x))`` and ``g(f(t(x)))`` over ``n_aug`` views.

    ``model`` is anything with a ``project`` method, or a callable on flat
    images.
    """
    private, public = check_images(private_set), check_images(public_set)
    if len(private) != len(public):
        raise ParameterError("private and public samples must have equal size")
    if n_aug < 1:
        raise ParameterError("n_aug must be >= 1")
    policy = policy if policy is not None else ViewPolicy.simclr()
    rng = rng if rng is not None else np.random.default_rng(0)
    project = _projector(model)

    def scores(images):
        flat = images.reshape(len(images), -1)
        clean = project(flat)
        total = np.zeros(len(images))
        for _ in range(n_aug):
            views = augment_batch(images, policy, rng)
            total += np.linalg.norm(project(views.reshape(len(views), -1)) - clean, axis=1)
        return total / n_aug

    return DIScores(scores(private), scores(public))


def di_test(scores: DIScores):
    """Welch test of ``mean(l_p) > mean(l_t)``; returns ``(TTestResult, claim)``."""
    if len(scores.l_t) != len(scores.l_p):
        raise ParameterError("score vectors must have equal length")
    result = welch_t(scores.l_p, scores.l_t, alternative="greater")
    return result, _claim(result)


def rep_distance(reference, candidate, data):
    """Mean l2 distance between the two encoders' representations of ``data``."""
    X = check_images(data).reshape(len(data), -1)
    a, b = encode(reference, X), encode(candidate, X)
    if a.shape != b.shape:
        raise DimensionError(f"representation widths differ: {a.shape[1]} vs {b.shape[1]}")
    return float(np.mean(np.linalg.norm(a - b, axis=1)))
