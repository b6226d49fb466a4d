"""Contrastive (SimCLR-style) victim encoders, optionally watermarked."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .augment import ViewPolicy, augment_batch, watermark_batch
from .exceptions import DimensionError, NumericError, ParameterError
from .losses import DEFAULT_INFO_NCE_TEMPERATURE, info_nce, softmax_cross_entropy
from .nn import Network, Optimizer, OptimizerConfig, build_mlp, load_checkpoint, save_checkpoint
from .synthdata import LabeledDataset
from .validation import check_images, check_matrix, check_positive_int


@dataclass(frozen=True)
class Architecture:
    """Layer widths for encoder, projection head and augmentation predictor.

    ``output_std``, when set, rescales the trained encoder so its
    representations have this mean per-coordinate standard deviation on the
    training images. The head and predictor absorb the inverse factor, so
    projections and watermark logits are unchanged.
    """

    hidden: tuple = (256,)
    rep_dim: int = 64
    head_hidden: int = 64
    proj_dim: int = 32
    predictor_hidden: int = 64
    output_std: float | None = None

    def __post_init__(self):
        if self.output_std is not None and not self.output_std > 0:
            raise ParameterError("output_std must be positive")

    def encoder_sizes(self, input_dim):
        return [input_dim, *self.hidden, self.rep_dim]

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "hidden" in d:
            d["hidden"] = tuple(int(h) for h in d["hidden"])
        return cls(**d)


@dataclass
class VictimModel:
    encoder: Network
    head: Network
    aug_predictor: Network | None = None
    config: dict = field(default_factory=dict)
    loss_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.head.input_dim != self.encoder.output_dim:
            raise DimensionError(
                f"head expects {self.head.input_dim} inputs, encoder emits {self.encoder.output_dim}"
            )
        if self.aug_predictor is not None and self.aug_predictor.input_dim != self.encoder.output_dim:
            raise DimensionError("augmentation predictor width must equal the representation dim")

    @property
    def rep_dim(self):
        return self.encoder.output_dim

    @property
    def input_dim(self):
        return self.encoder.input_dim

    def __call__(self, X):
        return self.represent(X)

    def represent(self, X):
        """Representations ``y = f(x)`` for flat or (N, H, W) input."""
        return self.encoder(check_matrix(X, self.encoder.input_dim))

    def project(self, X):
        """Projections ``z = g(f(x))``."""
        return self.head(self.represent(X))

    def watermark_logits(self, X):
        if self.aug_predictor is None:
            raise ParameterError("this victim has no augmentation predictor")
        return self.aug_predictor(self.represent(X))

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_checkpoint(self.encoder, directory / "encoder.ckpt")
        save_checkpoint(self.head, directory / "head.ckpt")
        if self.aug_predictor is not None:
            save_checkpoint(self.aug_predictor, directory / "aug_predictor.ckpt")
        meta = {"config": self.config, "loss_history": self.loss_history}
        (directory / "victim.json").write_text(json.dumps(meta, indent=2, default=str))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        pred_path = directory / "aug_predictor.ckpt"
        meta = json.loads((directory / "victim.json").read_text())
        return cls(
            load_checkpoint(directory / "encoder.ckpt"),
            load_checkpoint(directory / "head.ckpt"),
            load_checkpoint(pred_path) if pred_path.exists() else None,
            meta.get("config", {}),
            meta.get("loss_history", []),
        )


def rescale_representations(encoder: Network, consumers, images, target_std):
    """Scale ``encoder``'s last layer so representations of ``images`` reach ``target_std``.

    Each network in ``consumers`` reads the representations; its first-layer
    weights are divided by the same factor so its outputs are unchanged.
    Returns the factor applied.
    """
    reps = encoder(check_images(images).reshape(len(images), -1))
    current = float(reps.std(axis=0).mean())
    if not current > 0:
        raise NumericError("cannot rescale constant representations")
    factor = target_std / current
    last = encoder.layers[-1]
    last.weights *= factor
    last.bias *= factor
    encoder.mark_modified()
    for net in consumers:
        net.layers[0].weights /= factor
        net.mark_modified()
    return factor


def _check_finite_loss(value, step, seed):
    if not np.isfinite(value):
        raise NumericError(f"training loss became {value}", step=step, seed=seed)


class ContrastiveVictim(BaseEstimator, TransformerMixin):
    """SimCLR-style encoder trained with InfoNCE on pairs of augmented views.

    ``transform`` returns representations ``y = f(x)``; the fitted
    :class:`VictimModel` is available as ``model_``.

    Parameters
    ----------
    architecture : Architecture, optional
    policy : ViewPolicy, optional
        Defaults to :meth:`ViewPolicy.simclr`.
    optimizer : OptimizerConfig, optional
        Defaults to Adam with learning rate 1e-3.
    epochs : int
    batch_size : int
    temperature : float
    watermark_weight : float
        Weight of the augmentation-prediction cross-entropy. With 0 no
        predictor is trained.
    random_state : int
    """

    def __init__(
        self,
        architecture=None,
        policy=None,
        optimizer=None,
        epochs=30,
        batch_size=128,
        temperature=DEFAULT_INFO_NCE_TEMPERATURE,
        watermark_weight=0.0,
        random_state=0,
    ):
        self.architecture = architecture
        self.policy = policy
        self.optimizer = optimizer
        self.epochs = epochs
        self.batch_size = batch_size
        self.temperature = temperature
        self.watermark_weight = watermark_weight
        self.random_state = random_state

    def fit(self, X, y=None):
        images = check_images(X)
        if len(images) == 0:
            raise ParameterError("cannot train on an empty dataset")
        batch = check_positive_int(self.batch_size, "batch_size", minimum=2)
        epochs = check_positive_int(self.epochs, "epochs", minimum=0)
        if self.watermark_weight < 0:
            raise ParameterError("watermark_weight must be >= 0")
        arch = self.architecture or Architecture()
        policy = self.policy if self.policy is not None else ViewPolicy.simclr()
        opt_cfg = self.optimizer or OptimizerConfig()
        seed = self.random_state
        watermark = self.watermark_weight > 0

        # separate streams keep the contrastive trajectory independent of the watermark
        init_ss, train_ss, wm_init_ss, wm_train_ss = np.random.SeedSequence(seed).spawn(4)
        rng_init = np.random.default_rng(init_ss)
        rng = np.random.default_rng(train_ss)
        input_dim = int(np.prod(images.shape[1:]))
        encoder = build_mlp(arch.encoder_sizes(input_dim), rng_init)
        head = build_mlp([arch.rep_dim, arch.head_hidden, arch.proj_dim], rng_init)
        predictor = None
        if watermark:
            rng_wm = np.random.default_rng(wm_train_ss)
            predictor = build_mlp(
                [arch.rep_dim, arch.predictor_hidden, 2], np.random.default_rng(wm_init_ss)
            )
            pred_opt = Optimizer(predictor, opt_cfg)
        opt = Optimizer([encoder, head], opt_cfg)

        history = []
        step = 0
        n = len(images)
        for epoch in range(epochs):
            order = rng.permutation(n)
            sums = {"info_nce": 0.0, "watermark_ce": 0.0}
            n_batches = 0
            for start in range(0, n, batch):
                idx = order[start : start + batch]
                if len(idx) < 2:
                    continue
                src = images[idx]
                views = np.concatenate([augment_batch(src, policy, rng), augment_batch(src, policy, rng)])
                enc_trace = encoder.forward(views.reshape(len(views), -1))
                head_trace = head.forward(enc_trace.output)
                m = len(idx)
                loss = info_nce(head_trace.output[:m], head_trace.output[m:], self.temperature)
                _check_finite_loss(loss.value, step, seed)
                head_grads, rep_grad = head.backward(head_trace, np.concatenate(loss.grads))
                enc_grads, _ = encoder.backward(enc_trace, rep_grad)
                sums["info_nce"] += loss.value
                if watermark:
                    wm_views, wm_labels = watermark_batch(src, rng_wm)
                    wm_trace = encoder.forward(wm_views.reshape(len(wm_views), -1))
                    pred_trace = predictor.forward(wm_trace.output)
                    ce = softmax_cross_entropy(pred_trace.output, wm_labels)
                    _check_finite_loss(ce.value, step, seed)
                    lam = self.watermark_weight
                    pred_grads, wm_rep_grad = predictor.backward(pred_trace, lam * ce.grads[0])
                    wm_enc_grads, _ = encoder.backward(wm_trace, wm_rep_grad)
                    enc_grads = type(enc_grads)(
                        [a + b for a, b in zip(enc_grads.weights, wm_enc_grads.weights)],
                        [a + b for a, b in zip(enc_grads.biases, wm_enc_grads.biases)],
                    )
                    pred_opt.step([pred_grads])
                    sums["watermark_ce"] += ce.value
                try:
                    opt.step([enc_grads, head_grads])
                except NumericError as exc:
                    raise NumericError(str(exc), step=step, seed=seed) from exc
                step += 1
                n_batches += 1
            record = {"epoch": epoch + 1, "info_nce": sums["info_nce"] / max(n_batches, 1)}
            if watermark:
                record["watermark_ce"] = sums["watermark_ce"] / max(n_batches, 1)
            history.append(record)

        scale = 1.0
        if arch.output_std is not None:
            consumers = [head] + ([predictor] if predictor is not None else [])
            scale = rescale_representations(encoder, consumers, images, arch.output_std)

        config = {
            "architecture": arch.to_dict(),
            "output_scale": scale,
            "policy": policy.to_dict(),
            "optimizer": asdict(opt_cfg),
            "epochs": epochs,
            "batch_size": batch,
            "temperature": self.temperature,
            "watermark_weight": self.watermark_weight,
            "seed": seed,
        }
        self.model_ = VictimModel(encoder, head, predictor, config, history)
        self.n_features_in_ = input_dim
        return self

    def transform(self, X):
        return self.model_.represent(X)

    def project(self, X):
        return self.model_.project(X)


def train_victim(
    dataset: LabeledDataset,
    policy: ViewPolicy | None = None,
    arch: Architecture | None = None,
    opt: OptimizerConfig | None = None,
    epochs=30,
    batch=128,
    tau=DEFAULT_INFO_NCE_TEMPERATURE,
    seed=0,
) -> VictimModel:
    """Train encoder and projection head with InfoNCE on augmented view pairs."""
    est = ContrastiveVictim(arch, policy, opt, epochs, batch, tau, 0.0, seed)
    return est.fit(dataset.images).model_


def train_victim_watermarked(
    dataset: LabeledDataset,
    policy: ViewPolicy | None = None,
    arch: Architecture | None = None,
    opt: OptimizerConfig | None = None,
    epochs=30,
    batch=128,
    tau=DEFAULT_INFO_NCE_TEMPERATURE,
    lambda_wm=1.0,
    seed=0,
) -> VictimModel:
    """Train jointly with a rotation-half predictor on the representations.

    Each step adds ``lambda_wm`` times the predictor's cross-entropy on
    watermark pairs drawn from the same images as the contrastive batch.
    """
    if lambda_wm < 0:
        raise ParameterError("lambda_wm must be >= 0")
    est = ContrastiveVictim(arch, policy, opt, epochs, batch, tau, lambda_wm, seed)
    return est.fit(dataset.images).model_


def watermark_accuracy(aug_predictor: Network, encoder, images, seed=0):
    """Accuracy of ``aug_predictor`` on fresh watermark pairs of ``images``.

    ``encoder`` maps flat images to representations; it may be a Network or
    any callable such as a stolen model.
    """
    views, labels = watermark_batch(check_images(images), np.random.default_rng(seed))
    reps = np.asarray(encoder(views.reshape(len(views), -1)))
    if reps.shape[1] != aug_predictor.input_dim:
        raise DimensionError(
            f"representations have width {reps.shape[1]}, predictor expects {aug_predictor.input_dim}"
        )
    return float(np.mean(np.argmax(aug_predictor(reps), axis=1) == labels))
