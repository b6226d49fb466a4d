"""Encoder extraction through a representation API.

The attacker only sees served vectors. Victim responses are cached by input
hash, so reusing an input across epochs costs no extra queries.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .augment import ViewPolicy, augment_batch
from .exceptions import DimensionError, NumericError, ParameterError
from .linear_eval import top1, train_probe
from .losses import LossKind, info_nce, representation_loss
from .nn import Network, Optimizer, OptimizerConfig, build_mlp
from .serving import input_hash
from .validation import check_images, check_positive_int
from .victim import Architecture

MODES = ("direct", "recreated_head", "access_head")


@dataclass
class AttackConfig:
    """Attack settings.

    ``architecture=None`` copies the victim's layout (hidden widths default
    to 256, output width to the served dimension).
    """

    loss: LossKind = field(default_factory=LossKind)
    query_budget: int = 1000
    policy: ViewPolicy = field(default_factory=ViewPolicy)
    architecture: Architecture | None = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    epochs: int = 20
    batch_size: int = 64
    seed: int = 0
    labels: np.ndarray | None = None
    account: str = "attacker"

    def __post_init__(self):
        if self.query_budget < 0:
            raise ParameterError("query_budget must be >= 0")
        if self.loss.uses_labels and self.labels is None:
            raise ParameterError("sup_con requires labels for the query pool")
        check_positive_int(self.batch_size, "batch_size", minimum=2)
        check_positive_int(self.epochs, "epochs", minimum=0)

    def describe(self):
        return {
            "loss": self.loss.tag,
            "query_budget": self.query_budget,
            "policy": self.policy.to_dict(),
            "architecture": (self.architecture or Architecture()).to_dict(),
            "optimizer": asdict(self.optimizer),
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


@dataclass
class StolenModel:
    encoder: Network
    head: Network | None = None
    queries_spent: int = 0
    loss_history: list = field(default_factory=list)

    @property
    def input_dim(self):
        return self.encoder.input_dim

    def represent(self, X):
        X = np.asarray(X, dtype=np.float64)
        return self.encoder(X.reshape(len(X), -1))

    def __call__(self, X):
        return self.represent(X)


class _QueryBudget:
    """Victim access with caching and exact accounting."""

    def __init__(self, api, account, budget):
        self.api = api
        self.account = account
        self.budget = budget
        self.spent = 0
        self.cache = {}

    @property
    def remaining(self):
        return self.budget - self.spent

    def fetch(self, flat):
        """Victim vectors for rows that are cached or still affordable.

        Returns ``(kept_row_indices, vectors)``.
        """
        hashes = [input_hash(row) for row in flat]
        todo, seen = [], set()
        for i, h in enumerate(hashes):
            if h not in self.cache and h not in seen and len(todo) < self.remaining:
                todo.append(i)
                seen.add(h)
        if todo:
            served = self.api.query(self.account, flat[todo])
            for i, vec in zip(todo, served):
                self.cache[hashes[i]] = vec
            self.spent += len(todo)
        keep = [i for i, h in enumerate(hashes) if h in self.cache]
        if not keep:
            return keep, np.zeros((0, self.api.output_dim))
        return keep, np.stack([self.cache[hashes[i]] for i in keep])


def _check_pool(pool, api):
    pool = check_images(pool)
    if int(np.prod(pool.shape[1:])) != api.input_dim:
        raise DimensionError(f"pool images have {np.prod(pool.shape[1:])} pixels, API expects {api.input_dim}")
    return pool


class EncoderStealer(BaseEstimator, TransformerMixin):
    """Train a stolen encoder from API responses (sklearn-style wrapper).

    Parameters
    ----------
    api : RepresentationAPI
    config : AttackConfig
    head : Network, optional
        Fixed head applied to the attacker's outputs before the loss.
    mode : {"direct", "recreated_head", "access_head"}
        ``recreated_head`` also passes served vectors through ``head``;
        ``access_head`` compares against served projections as they are.
    """

    def __init__(self, api=None, config=None, head=None, mode="direct"):
        self.api = api
        self.config = config
        self.head = head
        self.mode = mode

    def fit(self, X, y=None):
        cfg = self.config or AttackConfig()
        if y is not None:
            cfg = AttackConfig(**{**cfg.__dict__, "labels": np.asarray(y)})
        self.model_ = _train_stealer(self.api, X, cfg, self.head, self.mode)
        return self

    def transform(self, X):
        return self.model_.represent(X)


def _build_attacker(api, cfg, rep_dim):
    arch = cfg.architecture or Architecture(rep_dim=rep_dim)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    return build_mlp(arch.encoder_sizes(api.input_dim), rng)


def _train_stealer(api, pool, cfg: AttackConfig, head=None, mode="direct") -> StolenModel:
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}")
    pool = _check_pool(pool, api)
    if cfg.labels is not None and len(cfg.labels) != len(pool):
        raise ParameterError("labels must align with the query pool")
    default_width = head.input_dim if head is not None else api.output_dim
    encoder = _build_attacker(api, cfg, default_width)
    if head is not None:
        if head.input_dim != encoder.output_dim:
            raise DimensionError(f"head expects {head.input_dim} inputs, attacker emits {encoder.output_dim}")
        if mode == "recreated_head" and head.input_dim != api.output_dim:
            raise DimensionError(f"head expects {head.input_dim} inputs, victim serves {api.output_dim}")
        if mode == "access_head" and head.output_dim != api.output_dim:
            raise DimensionError(f"head emits {head.output_dim} values, victim serves {api.output_dim}")
    elif mode != "direct":
        raise ParameterError(f"mode {mode!r} needs a head")
    elif encoder.output_dim != api.output_dim:
        raise DimensionError(f"attacker emits {encoder.output_dim} values, victim serves {api.output_dim}")

    access = _QueryBudget(api, cfg.account, cfg.query_budget)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[1])
    opt = Optimizer(encoder, cfg.optimizer)
    history = []
    step = 0
    if cfg.query_budget == 0:
        return StolenModel(encoder, head, 0, history)
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(pool))
        total, count = 0.0, 0
        for start in range(0, len(pool), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            src = pool[idx]
            if cfg.policy.is_empty:
                w = w_prime = src
            else:
                w = augment_batch(src, cfg.policy, rng)
                w_prime = augment_batch(src, cfg.policy, rng)
            keep, y_v = access.fetch(w_prime.reshape(len(idx), -1))
            if len(keep) < 2:
                continue
            w = w[keep].reshape(len(keep), -1)
            if mode == "recreated_head":
                y_v = head(y_v)
            enc_trace = encoder.forward(w)
            head_trace = head.forward(enc_trace.output) if head is not None else None
            y_a = head_trace.output if head is not None else enc_trace.output
            labels = cfg.labels[idx][keep] if cfg.labels is not None else None
            value, grad = representation_loss(cfg.loss, y_a, y_v, labels)
            if not np.isfinite(value):
                raise NumericError(f"attack loss became {value}", step=step, seed=cfg.seed)
            if head is not None:
                _, grad = head.backward(head_trace, grad)
            grads, _ = encoder.backward(enc_trace, grad)
            opt.step([grads])
            step += 1
            total += value * len(keep)
            count += len(keep)
        history.append({"epoch": epoch + 1, "loss": total / count if count else float("nan")})
    return StolenModel(encoder, head, access.spent, history)


def steal_direct(victim_api, pool, cfg: AttackConfig) -> StolenModel:
    """Match the attacker's outputs on ``w`` to victim outputs on ``w'``."""
    return _train_stealer(victim_api, pool, cfg)


def steal_with_head(victim_api, g: Network, pool, cfg: AttackConfig, mode="recreated_head") -> StolenModel:
    """Compute the loss after passing the attacker's outputs through ``g``.

    In ``recreated_head`` mode the served representations also pass through
    ``g``; in ``access_head`` mode the served vectors are already
    projections.
    """
    if mode not in ("recreated_head", "access_head"):
        raise ParameterError("mode must be 'recreated_head' or 'access_head'")
    return _train_stealer(victim_api, pool, cfg, g, mode)


def recreate_head(victim_api, pool, cfg: AttackConfig, head_hidden=None, proj_dim=None):
    """Train a projection head on served representations of two views per input.

    Returns ``(head, queries_spent)``. Each input costs two queries.
    """
    if cfg.policy.is_empty:
        raise ParameterError("head recreation needs a non-empty augmentation policy")
    pool = _check_pool(pool, victim_api)
    arch = cfg.architecture or Architecture(rep_dim=victim_api.output_dim)
    head_hidden = head_hidden or arch.head_hidden
    proj_dim = proj_dim or arch.proj_dim
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    head = build_mlp([victim_api.output_dim, head_hidden, proj_dim], np.random.default_rng(seeds[0]))
    rng = np.random.default_rng(seeds[1])
    access = _QueryBudget(victim_api, cfg.account, cfg.query_budget)
    opt = Optimizer(head, cfg.optimizer)
    tau = cfg.loss.tau
    for _ in range(cfg.epochs):
        order = rng.permutation(len(pool))
        for start in range(0, len(pool), cfg.batch_size):
            m = min(len(order) - start, access.remaining // 2)
            if m < 2:
                break
            src = pool[order[start : start + m]]
            w = augment_batch(src, cfg.policy, rng).reshape(m, -1)
            w_prime = augment_batch(src, cfg.policy, rng).reshape(m, -1)
            keep, y = access.fetch(np.concatenate([w, w_prime]))
            if len(keep) != 2 * m:
                raise ParameterError("duplicate views within a batch; head recreation needs distinct views")
            trace = head.forward(y)
            loss = info_nce(trace.output[:m], trace.output[m:], tau)
            grads, _ = head.backward(trace, np.concatenate(loss.grads))
            opt.step([grads])
        if access.remaining < 4:
            break
    return head, access.spent


# -- evaluation ------------------------------------------------------------------------


@dataclass
class StealReport:
    rows: list

    FIELDS = ("task", "stolen_probe_acc", "victim_probe_acc", "rep_distance", "queries_spent")

    def write_csv(self, path, extra=None):
        extra = extra or {}
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(extra) + list(self.FIELDS))
            writer.writeheader()
            for row in self.rows:
                writer.writerow({**extra, **row})


def evaluate_stolen(stolen: StolenModel, victim, downstream: dict, probe_epochs=50, seed=0) -> StealReport:
    """Probe accuracy of stolen and victim encoders on each downstream task.

    ``downstream`` maps a task name to ``(train, test)`` LabeledDatasets.
    ``rep_distance`` is measured on the task's test images and is ``nan``
    when the widths differ.
    """
    from .defenses.reactive import rep_distance

    rows = []
    for task in sorted(downstream):
        train, test = downstream[task]
        stolen_acc = top1(train_probe(stolen.encoder, train, epochs=probe_epochs, seed=seed), stolen.encoder, test)
        victim_acc = top1(train_probe(victim.encoder, train, epochs=probe_epochs, seed=seed), victim.encoder, test)
        if stolen.encoder.output_dim == victim.encoder.output_dim:
            dist = rep_distance(victim.encoder, stolen.encoder, test.images)
        else:
            dist = float("nan")
        rows.append(
            {
                "task": task,
                "stolen_probe_acc": stolen_acc,
                "victim_probe_acc": victim_acc,
                "rep_distance": dist,
                "queries_spent": stolen.queries_spent,
            }
        )
    return StealReport(rows)
