"""Query-similarity detection over per-account output histories."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..augment import ViewPolicy, augment_batch
from ..exceptions import DimensionError, ParameterError
from ..validation import check_images

METRICS = ("l2", "cosine")
SPACES = ("projection_z", "representation_y")


@dataclass(frozen=True)
class DetectorConfig:
    """``l2`` flags when distance < threshold; ``cosine`` flags when similarity > threshold."""

    metric: str = "l2"
    threshold: float = 1.0
    space: str = "projection_z"

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ParameterError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.space not in SPACES:
            raise ParameterError(f"space must be one of {SPACES}, got {self.space!r}")
        if not np.isfinite(self.threshold) and self.threshold != np.inf:
            raise ParameterError("threshold must be a real number")

    def flags(self, scores):
        scores = np.asarray(scores, dtype=np.float64)
        return scores < self.threshold if self.metric == "l2" else scores > self.threshold


class Verdict(NamedTuple):
    flagged: bool
    best_match_id: int | None
    best_distance: float | None  # a similarity for the cosine metric


def _scores(history, vec, metric):
    if metric == "l2":
        return np.linalg.norm(history - vec[None, :], axis=1)
    norms = np.linalg.norm(history, axis=1) * np.linalg.norm(vec)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = history @ vec / norms
    return np.where(norms > 0, sims, 0.0)


class HistoryStore:
    """Append-only per-account history of served vectors.

    Appends are serialized with a lock; readers work on snapshots.
    """

    def __init__(self):
        self._vectors = {}
        self._meta = {}
        self._lock = threading.Lock()

    def __len__(self):
        return sum(len(v) for v in self._vectors.values())

    @property
    def accounts(self):
        return sorted(self._vectors, key=str)

    def record(self, account, vec, input_hash="", flags=()):
        vec = np.array(vec, dtype=np.float64).ravel()
        if not np.all(np.isfinite(vec)):
            raise ParameterError("cannot record a non-finite vector")
        with self._lock:
            rows = self._vectors.setdefault(account, [])
            if rows and rows[0].shape != vec.shape:
                raise DimensionError(f"vector width {vec.size} differs from stored width {rows[0].size}")
            rows.append(vec)
            self._meta.setdefault(account, []).append((input_hash, tuple(flags)))
            return len(rows) - 1

    def snapshot(self, account):
        """Stored vectors of ``account`` as an (n, d) array (copy)."""
        with self._lock:
            rows = list(self._vectors.get(account, ()))
        return np.stack(rows) if rows else np.zeros((0, 0))

    def lines(self):
        """Tab-separated records: account, index, input hash, vector, flags."""
        with self._lock:
            items = [(a, list(v), list(self._meta[a])) for a, v in self._vectors.items()]
        out = []
        for account, vecs, meta in items:
            for i, (vec, (h, flags)) in enumerate(zip(vecs, meta)):
                out.append(f"{account}\t{i}\t{h}\t{','.join(repr(float(v)) for v in vec)}\t{'|'.join(flags)}")
        return out

    def save(self, path):
        with open(path, "w") as fh:
            fh.writelines(line + "\n" for line in self.lines())

    @classmethod
    def load(cls, path):
        store = cls()
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                account, _, h, vec, flags = line.rstrip("\n").split("\t")
                vec = [float(v) for v in vec.split(",")] if vec else []
                store.record(account, vec, h, tuple(f for f in flags.split("|") if f))
        return store


def record(store: HistoryStore, account, vec):
    return store.record(account, vec)


def check_similar(store: HistoryStore, account, vec, cfg: DetectorConfig) -> Verdict:
    """Exact nearest neighbour of ``vec`` in the account's history."""
    vec = np.asarray(vec, dtype=np.float64).ravel()
    history = store.snapshot(account)
    if len(history) == 0:
        return Verdict(False, None, None)
    if history.shape[1] != vec.size:
        raise DimensionError(f"query width {vec.size} differs from stored width {history.shape[1]}")
    scores = _scores(history, vec, cfg.metric)
    best = int(np.argmin(scores) if cfg.metric == "l2" else np.argmax(scores))
    return Verdict(bool(cfg.flags(scores[best])), best, float(scores[best]))


# -- calibration --------------------------------------------------------------------


class Rates(NamedTuple):
    fpr: float
    fnr: float

    @property
    def total(self):
        return self.fpr + self.fnr


def embed(victim, images, space):
    """Vectors of ``images`` in detector ``space``."""
    if space == "projection_z":
        return victim.project(images)
    if space == "representation_y":
        return victim.represent(images)
    raise ParameterError(f"unknown space {space!r}")


def make_eval_pairs(images, policy: ViewPolicy | None, rng, n_pairs=None):
    """Return ``(paired, distinct)`` arrays of shape (P, 2, H, W).

    ``paired`` holds two independent views of the same image; ``distinct``
    holds views of two different images.
    """
    images = check_images(images)
    policy = policy if policy is not None else ViewPolicy.simclr()
    n = len(images)
    if n < 2:
        raise ParameterError("need at least two images to build distinct pairs")
    n_pairs = n if n_pairs is None else n_pairs
    src = images[rng.choice(n, size=n_pairs, replace=n_pairs > n)]
    paired = np.stack([augment_batch(src, policy, rng), augment_batch(src, policy, rng)], axis=1)
    i = rng.integers(0, n, size=n_pairs)
    j = (i + rng.integers(1, n, size=n_pairs)) % n
    distinct = np.stack([augment_batch(images[i], policy, rng), augment_batch(images[j], policy, rng)], axis=1)
    return paired, distinct


def pair_scores(victim, pairs, space="projection_z", metric="l2"):
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.ndim < 3 or pairs.shape[1] != 2 or len(pairs) == 0:
        raise ParameterError("pairs must be a non-empty array of shape (P, 2, ...)")
    a = embed(victim, pairs[:, 0].reshape(len(pairs), -1), space)
    b = embed(victim, pairs[:, 1].reshape(len(pairs), -1), space)
    if metric == "l2":
        return np.linalg.norm(a - b, axis=1)
    denom = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    return np.where(denom > 0, np.sum(a * b, axis=1) / np.where(denom > 0, denom, 1.0), 0.0)


def rates_from_scores(same_scores, diff_scores, cfg: DetectorConfig) -> Rates:
    same_scores, diff_scores = np.asarray(same_scores), np.asarray(diff_scores)
    if same_scores.size == 0 or diff_scores.size == 0:
        raise ParameterError("rate evaluation needs non-empty same and distinct sets")
    fnr = 1.0 - float(np.mean(cfg.flags(same_scores)))
    fpr = float(np.mean(cfg.flags(diff_scores)))
    return Rates(fpr, fnr)


def evaluate_rates(victim, cfg: DetectorConfig, paired_set, distinct_set) -> Rates:
    """FNR over same-input pairs and FPR over distinct-input pairs, in ``cfg.space``."""
    same = pair_scores(victim, paired_set, cfg.space, cfg.metric)
    diff = pair_scores(victim, distinct_set, cfg.space, cfg.metric)
    return rates_from_scores(same, diff, cfg)


def candidate_thresholds(same_scores, diff_scores):
    """Midpoints between consecutive distinct observed scores, plus both extremes."""
    values = np.unique(np.concatenate([np.ravel(same_scores), np.ravel(diff_scores)]))
    mids = (values[:-1] + values[1:]) / 2.0
    return np.concatenate([[values[0] - 1.0], mids, [values[-1] + 1.0]])


def threshold_sweep(same_scores, diff_scores, metric="l2", space="projection_z", thresholds=None):
    """One ``(threshold, fpr, fnr)`` row per threshold, thresholds ascending."""
    if thresholds is None:
        thresholds = candidate_thresholds(same_scores, diff_scores)
    rows = []
    for tau in np.sort(np.asarray(thresholds, dtype=np.float64)):
        r = rates_from_scores(same_scores, diff_scores, DetectorConfig(metric, float(tau), space))
        rows.append((float(tau), r.fpr, r.fnr))
    return rows


def best_threshold(same_scores, diff_scores, metric="l2", space="projection_z"):
    """Threshold minimizing FPR + FNR; returns ``(threshold, Rates)``."""
    rows = threshold_sweep(same_scores, diff_scores, metric, space)
    tau, fpr, fnr = min(rows, key=lambda r: (r[1] + r[2], r[1]))
    return tau, Rates(fpr, fnr)


def calibrate_threshold(same_scores, diff_scores, metric="l2", space="projection_z", max_fpr=0.05):
    """The most permissive threshold whose FPR stays within ``max_fpr``."""
    rows = [r for r in threshold_sweep(same_scores, diff_scores, metric, space) if r[1] <= max_fpr]
    if not rows:
        raise ParameterError(f"no threshold reaches FPR <= {max_fpr}")
    tau, fpr, fnr = min(rows, key=lambda r: (r[2], r[1]))
    return DetectorConfig(metric, tau, space), Rates(fpr, fnr)


# -- multi-account correlation --------------------------------------------------------


def cross_account_scan(store: HistoryStore, cfg: DetectorConfig):
    """Groups of accounts linked by at least one flagged cross-account pair.

    Returns a list of sorted account lists, ordered by their first member.
    """
    accounts = store.accounts
    if len(accounts) < 2:
        raise ParameterError("a cross-account scan needs at least two accounts")
    parent = {a: a for a in accounts}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    snaps = {a: store.snapshot(a) for a in accounts}
    for i, a in enumerate(accounts):
        for b in accounts[i + 1 :]:
            A, B = snaps[a], snaps[b]
            if A.shape[1] != B.shape[1]:
                raise DimensionError(f"accounts {a!r} and {b!r} store vectors of different widths")
            if cfg.metric == "l2":
                d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
                scores = np.sqrt(np.maximum(d2, 0.0))
            else:
                na, nb = np.linalg.norm(A, axis=1), np.linalg.norm(B, axis=1)
                denom = np.outer(na, nb)
                scores = np.where(denom > 0, A @ B.T / np.where(denom > 0, denom, 1.0), 0.0)
            if np.any(cfg.flags(scores)):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb, key=str)] = min(ra, rb, key=str)
    groups = {}
    for a in accounts:
        groups.setdefault(find(a), []).append(a)
    return sorted((sorted(g, key=str) for g in groups.values()), key=lambda g: str(g[0]))
