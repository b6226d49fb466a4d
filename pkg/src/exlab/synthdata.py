"""Deterministic synthetic image datasets.

Two generator families are available:

``oriented_bars``
    A tapered bar (bright head, dim tail) at a class-specific angle on top of
    a vertical illumination gradient. Neither component is symmetric under a
    180 degree rotation, which keeps rotation prediction learnable.
``blob_mixtures``
    Mixtures of Gaussian blobs at class-specific template positions. Used as
    the out-of-distribution query pool.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .exceptions import DimensionError, ParameterError

FAMILIES = ("oriented_bars", "blob_mixtures")
BAR_BASE_ANGLE = 10.0
BAR_ANGLE_STEP = 25.0
# translation jitter large enough that raw pixels are far from linearly separable
BAR_MAX_OFFSET = 3.0


@dataclass(frozen=True)
class DatasetSpec:
    n_classes: int = 8
    samples_per_class: int = 200
    test_samples_per_class: int = 100
    image_size: int = 16
    family: str = "oriented_bars"
    noise: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}")
        if self.n_classes < 2:
            raise ParameterError("n_classes must be >= 2")
        if self.family == "oriented_bars" and self.n_classes * BAR_ANGLE_STEP > 360:
            raise ParameterError("oriented_bars supports at most 14 classes")
        if self.samples_per_class < 1 or self.test_samples_per_class < 1:
            raise ParameterError("each split needs at least one sample per class")
        if self.image_size < 4:
            raise ParameterError("image_size must be >= 4")
        if self.noise < 0:
            raise ParameterError("noise must be >= 0")

    def class_angles(self):
        return [BAR_BASE_ANGLE + BAR_ANGLE_STEP * k for k in range(self.n_classes)]


class LabeledDataset:
    """Images of shape (N, H, W) in [0, 1] with integer labels."""

    def __init__(self, images, labels, split="train", spec: DatasetSpec | None = None):
        images = np.asarray(images, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if images.ndim != 3:
            raise DimensionError(f"images must have shape (N, H, W), got {images.shape}")
        if labels.shape != (images.shape[0],):
            raise DimensionError("one label per image is required")
        if split not in ("train", "test"):
            raise ParameterError(f"split must be 'train' or 'test', got {split!r}")
        n_classes = spec.n_classes if spec is not None else int(labels.max(initial=-1)) + 1
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise ParameterError(f"labels must lie in [0, {n_classes})")
        self.images = images
        self.labels = labels
        self.split = split
        self.spec = spec
        self.n_classes = n_classes

    def __len__(self):
        return len(self.labels)

    def __repr__(self):
        return f"LabeledDataset({self.split}, n={len(self)}, classes={self.n_classes})"

    @property
    def X(self):
        """Flattened images, shape (N, H * W)."""
        return self.images.reshape(len(self), -1)

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def subset(self, index):
        index = np.asarray(index)
        return LabeledDataset(self.images[index], self.labels[index], self.split, self.spec)


def _render_bar(size, angle_deg, offset, length, width, rng_noise, noise):
    c = (size - 1) / 2.0
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    x = cols - c - offset[0]
    y = (c - rows) - offset[1]
    theta = math.radians(angle_deg)
    ux, uy = math.cos(theta), math.sin(theta)
    along = x * ux + y * uy
    across = -x * uy + y * ux
    half = length / 2.0
    # soft caps at both ends, intensity ramps from tail to head
    cap = np.clip(half + 0.5 - np.abs(along), 0.0, 1.0)
    ramp = 0.3 + 0.7 * np.clip((along + half) / length, 0.0, 1.0)
    bar = ramp * cap * np.exp(-0.5 * (across / width) ** 2)
    background = 0.35 * (1.0 - np.arange(size, dtype=np.float64) / (size - 1))[:, None]
    img = background + bar
    if noise:
        img = img + rng_noise.normal(0.0, noise, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def _bars(spec, n_per_class, rng):
    size = spec.image_size
    scale = size / 16.0
    images, labels = [], []
    for cls, base in enumerate(spec.class_angles()):
        for _ in range(n_per_class):
            angle = base + rng.normal(0.0, 3.0)
            offset = rng.uniform(-BAR_MAX_OFFSET, BAR_MAX_OFFSET, size=2) * scale
            length = rng.uniform(7.0, 12.0) * scale
            width = rng.uniform(0.7, 1.0) * scale
            images.append(_render_bar(size, angle, offset, length, width, rng, spec.noise))
            labels.append(cls)
    return np.stack(images), np.asarray(labels)


def _blob_templates(spec):
    rng = np.random.default_rng([spec.seed, 7919])
    size = spec.image_size
    return [
        (rng.uniform(2.5, size - 3.5, size=(3, 2)), rng.uniform(0.5, 1.0, size=3))
        for _ in range(spec.n_classes)
    ]


def _blobs(spec, n_per_class, rng):
    size = spec.image_size
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    images, labels = [], []
    for cls, (centres, amps) in enumerate(_blob_templates(spec)):
        for _ in range(n_per_class):
            img = np.zeros((size, size))
            jittered = centres + rng.normal(0.0, 0.8, size=centres.shape)
            sigmas = rng.uniform(1.2, 2.2, size=len(amps)) * size / 16.0
            for (r, c), a, s in zip(jittered, amps * rng.uniform(0.8, 1.2, size=len(amps)), sigmas):
                img += a * np.exp(-((rows - r) ** 2 + (cols - c) ** 2) / (2 * s * s))
            if spec.noise:
                img = img + rng.normal(0.0, spec.noise, size=img.shape)
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(cls)
    return np.stack(images), np.asarray(labels)


def generate(spec: DatasetSpec):
    """Return ``{"train": LabeledDataset, "test": LabeledDataset}`` for ``spec``.

    Train and test draw from independent child streams of the dataset seed.
    """
    train_rng, test_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(2))
    make = _bars if spec.family == "oriented_bars" else _blobs
    train = LabeledDataset(*make(spec, spec.samples_per_class, train_rng), "train", spec)
    test = LabeledDataset(*make(spec, spec.test_samples_per_class, test_rng), "test", spec)
    return {"train": train, "test": test}


def other_family(spec: DatasetSpec):
    family = "blob_mixtures" if spec.family == "oriented_bars" else "oriented_bars"
    n_classes = min(spec.n_classes, 14)
    return replace(spec, family=family, n_classes=n_classes, seed=spec.seed + 104729)


def make_query_pool(dataset: LabeledDataset, mode="in_distribution", size=None, seed=0):
    """Unlabeled attacker query images.

    ``in_distribution`` samples without replacement from ``dataset`` (normally
    the victim's test split). ``out_distribution`` renders images from the
    other generator family.
    """
    rng = np.random.default_rng(seed)
    if size is None:
        size = len(dataset)
    if size < 0:
        raise ParameterError("pool size must be >= 0")
    if mode == "in_distribution":
        if size > len(dataset):
            raise ParameterError(f"requested {size} images but only {len(dataset)} are available")
        return dataset.images[np.sort(rng.choice(len(dataset), size=size, replace=False))].copy()
    if mode == "out_distribution":
        if dataset.spec is None:
            raise ParameterError("out_distribution pools need a dataset with a spec")
        other = other_family(dataset.spec)
        per_class = -(-size // other.n_classes)
        images, _ = (_bars if other.family == "oriented_bars" else _blobs)(other, per_class, rng)
        return images[rng.permutation(len(images))[:size]]
    raise ParameterError(f"unknown pool mode {mode!r}")


def rotation_asymmetry(dataset: LabeledDataset):
    """Per-class mean absolute pixel difference between x and x rotated by 180 degrees."""
    flipped = dataset.images[:, ::-1, ::-1]
    diff = np.abs(dataset.images - flipped).mean(axis=(1, 2))
    return {int(c): float(diff[dataset.labels == c].mean()) for c in np.unique(dataset.labels)}


def save_csv(dataset: LabeledDataset, path):
    """One row per image: label followed by the H*W pixel values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"p{i}" for i in range(dataset.X.shape[1])])
        for label, row in zip(dataset.labels, dataset.X):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


def load_csv(path, split="train", image_shape=None):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [r for r in reader if r]
    labels = np.array([int(r[0]) for r in rows], dtype=np.int64)
    pixels = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
    if image_shape is None:
        side = int(round(math.sqrt(pixels.shape[1])))
        if side * side != pixels.shape[1]:
            raise DimensionError("cannot infer a square image shape; pass image_shape")
        image_shape = (side, side)
    return LabeledDataset(pixels.reshape(len(rows), *image_shape), labels, split)


def spec_dict(spec: DatasetSpec):
    return asdict(spec)
