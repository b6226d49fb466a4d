"""Augmentations for single-channel grid images with values in [0, 1].

Images are 2-D float64 arrays of shape (H, W). Every operator returns a new
array clamped to [0, 1]. Randomness always comes from an explicitly passed
``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import DimensionError, ParameterError


def _check_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"expected an (H, W) image, got shape {img.shape}")
    return img


def rotate(img, angle_deg):
    """Rotate counter-clockwise about the image centre, nearest-neighbour.

    Pixels whose source falls outside the frame are filled with 0.
    """
    img = _check_image(img)
    angle = float(angle_deg) % 360.0
    if angle == 0.0:
        return img.copy()
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = math.radians(angle)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    rows, cols = np.mgrid[0:h, 0:w]
    x = cols - cx
    y = cy - rows
    # inverse map: source = R(-theta) @ target
    src_x = x * cos_t + y * sin_t
    src_y = -x * sin_t + y * cos_t
    src_c = np.rint(src_x + cx).astype(int)
    src_r = np.rint(cy - src_y).astype(int)
    inside = (src_r >= 0) & (src_r < h) & (src_c >= 0) & (src_c < w)
    out = np.zeros_like(img)
    out[inside] = img[src_r[inside], src_c[inside]]
    return out


def hflip(img):
    return _check_image(img)[:, ::-1].copy()


@dataclass(frozen=True)
class CropBox:
    top: int
    left: int
    height: int
    width: int


def crop_resize(img, box: CropBox):
    """Crop ``box`` and resize back to the full frame with bilinear sampling.

    Sample positions include both box corners, so a full-frame box is the
    identity.
    """
    img = _check_image(img)
    h, w = img.shape
    if box.height < 2 or box.width < 2:
        raise ParameterError("crop box must be at least 2x2")
    if box.top < 0 or box.left < 0 or box.top + box.height > h or box.left + box.width > w:
        raise ParameterError(f"crop box {box} lies outside a {h}x{w} image")
    return _crop_resize_batch(img[None], [box])[0]


def _crop_resize_batch(imgs, boxes):
    n, h, w = imgs.shape
    top = np.array([b.top for b in boxes], dtype=np.float64)[:, None]
    left = np.array([b.left for b in boxes], dtype=np.float64)[:, None]
    bh = np.array([b.height for b in boxes], dtype=np.float64)[:, None]
    bw = np.array([b.width for b in boxes], dtype=np.float64)[:, None]
    ys = top + np.arange(h) * (bh - 1) / (h - 1)
    xs = left + np.arange(w) * (bw - 1) / (w - 1)
    y0 = np.minimum(np.floor(ys).astype(int), h - 2)
    x0 = np.minimum(np.floor(xs).astype(int), w - 2)
    fy = (ys - y0)[:, :, None]
    fx = (xs - x0)[:, None, :]
    k = np.arange(n)[:, None, None]
    y0, x0 = y0[:, :, None], x0[:, None, :]
    tl = imgs[k, y0, x0]
    tr = imgs[k, y0, x0 + 1]
    bl = imgs[k, y0 + 1, x0]
    br = imgs[k, y0 + 1, x0 + 1]
    out = (1 - fy) * ((1 - fx) * tl + fx * tr) + fy * ((1 - fx) * bl + fx * br)
    return np.clip(out, 0.0, 1.0)


def jitter(img, scale, shift):
    """Brightness/contrast jitter ``clip(scale * p + shift)``."""
    if not scale > 0:
        raise ParameterError("jitter scale must be > 0")
    return np.clip(scale * _check_image(img) + shift, 0.0, 1.0)


def gaussian_kernel(sigma):
    """Normalized 1-D Gaussian truncated at three standard deviations."""
    radius = max(1, int(math.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img, sigma):
    """Separable Gaussian blur with edge replication; ``sigma == 0`` is the identity."""
    img = _check_image(img)
    if sigma < 0:
        raise ParameterError("blur sigma must be >= 0")
    if sigma == 0:
        return img.copy()
    return _blur_batch(img[None], [sigma])[0]


def _blur_matrices(n, sigmas):
    # per-image 1-D convolution with edge replication as (n, n) matrices
    radius = max(max(1, int(math.ceil(3.0 * s))) for s in sigmas)
    taps = np.arange(-radius, radius + 1)
    kernels = np.zeros((len(sigmas), len(taps)))
    for i, s in enumerate(sigmas):
        k = gaussian_kernel(s)
        r = len(k) // 2
        kernels[i, radius - r : radius + r + 1] = k
    src = np.clip(np.arange(n)[:, None] + taps[None, :], 0, n - 1)
    m = np.zeros((len(sigmas), n, n))
    rows = np.broadcast_to(np.arange(n)[:, None], src.shape)
    for t in range(len(taps)):
        np.add.at(m, (slice(None), rows[:, t], src[:, t]), kernels[:, t, None])
    return m


def _blur_batch(imgs, sigmas):
    _, h, w = imgs.shape
    out = _blur_matrices(h, sigmas) @ imgs @ _blur_matrices(w, sigmas).transpose(0, 2, 1)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class ViewPolicy:
    """Which operators a view chain may apply, with parameter ranges.

    ``None`` disables an operator. The default instance is the empty policy,
    under which every view equals its source image.
    """

    crop_scale: tuple | None = None  # fraction of the image area kept
    flip_prob: float = 0.0
    jitter_scale: tuple | None = None
    jitter_shift: tuple | None = None
    blur_sigma: tuple | None = None
    rotation: tuple | None = None  # degrees

    def __post_init__(self):
        def check_range(name, lo_ok, hi_ok):
            rng = getattr(self, name)
            if rng is None:
                return
            if len(rng) != 2 or not rng[0] <= rng[1]:
                raise ParameterError(f"{name} must be an ordered pair, got {rng}")
            if not (lo_ok(rng[0]) and hi_ok(rng[1])):
                raise ParameterError(f"{name} range {rng} is outside the operator domain")

        check_range("crop_scale", lambda v: v > 0, lambda v: v <= 1)
        check_range("jitter_scale", lambda v: v > 0, lambda v: True)
        check_range("jitter_shift", lambda v: True, lambda v: True)
        check_range("blur_sigma", lambda v: v >= 0, lambda v: True)
        check_range("rotation", lambda v: True, lambda v: True)
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ParameterError("flip_prob must lie in [0, 1]")

    @property
    def is_empty(self):
        return (
            self.crop_scale is None
            and self.flip_prob == 0.0
            and self.jitter_scale is None
            and self.jitter_shift is None
            and self.blur_sigma is None
            and self.rotation is None
        )

    @classmethod
    def simclr(cls):
        """Crop, flip, brightness/contrast jitter and blur; no rotation."""
        return cls(
            crop_scale=(0.5, 1.0),
            flip_prob=0.5,
            jitter_scale=(0.7, 1.3),
            jitter_shift=(-0.15, 0.15),
            blur_sigma=(0.0, 1.0),
        )

    def to_dict(self):
        return {
            "crop_scale": self.crop_scale,
            "flip_prob": self.flip_prob,
            "jitter_scale": self.jitter_scale,
            "jitter_shift": self.jitter_shift,
            "blur_sigma": self.blur_sigma,
            "rotation": self.rotation,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        for key in ("crop_scale", "jitter_scale", "jitter_shift", "blur_sigma", "rotation"):
            if d.get(key) is not None:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)


def sample_transform(shape, policy: ViewPolicy, rng):
    """Draw one operator chain; the returned dict fully determines the view."""
    h, w = shape
    t = {}
    if policy.crop_scale is not None:
        scale = rng.uniform(*policy.crop_scale)
        ch = min(h, max(2, int(round(math.sqrt(scale) * h))))
        cw = min(w, max(2, int(round(math.sqrt(scale) * w))))
        top = int(rng.integers(0, h - ch + 1))
        left = int(rng.integers(0, w - cw + 1))
        t["crop"] = CropBox(top, left, ch, cw)
    if policy.flip_prob > 0:
        t["flip"] = bool(rng.random() < policy.flip_prob)
    if policy.jitter_scale is not None or policy.jitter_shift is not None:
        scale = rng.uniform(*policy.jitter_scale) if policy.jitter_scale else 1.0
        shift = rng.uniform(*policy.jitter_shift) if policy.jitter_shift else 0.0
        t["jitter"] = (scale, shift)
    if policy.blur_sigma is not None:
        t["blur"] = rng.uniform(*policy.blur_sigma)
    if policy.rotation is not None:
        t["rotation"] = rng.uniform(*policy.rotation)
    return t


def apply_transform(img, t):
    return apply_transforms(_check_image(img)[None], [t])[0]


def apply_transforms(images, ts):
    """Apply one transform dict per image of an (N, H, W) stack.

    Operators run in the order crop, flip, jitter, blur, rotation.
    """
    out = np.array(images, dtype=np.float64)
    if out.ndim != 3 or len(out) != len(ts):
        raise DimensionError("need one transform per image of an (N, H, W) stack")
    idx = [i for i, t in enumerate(ts) if "crop" in t]
    if idx:
        h, w = out.shape[1:]
        for i in idx:
            b = ts[i]["crop"]
            if b.height < 2 or b.width < 2 or b.top < 0 or b.left < 0 or b.top + b.height > h or b.left + b.width > w:
                raise ParameterError(f"crop box {b} is invalid for a {h}x{w} image")
        out[idx] = _crop_resize_batch(out[idx], [ts[i]["crop"] for i in idx])
    idx = [i for i, t in enumerate(ts) if t.get("flip")]
    if idx:
        out[idx] = out[idx][:, :, ::-1]
    idx = [i for i, t in enumerate(ts) if "jitter" in t]
    if idx:
        params = np.array([ts[i]["jitter"] for i in idx], dtype=np.float64)
        if not np.all(params[:, 0] > 0):
            raise ParameterError("jitter scale must be > 0")
        out[idx] = np.clip(params[:, 0, None, None] * out[idx] + params[:, 1, None, None], 0.0, 1.0)
    idx = [i for i, t in enumerate(ts) if t.get("blur", 0) > 0]
    if idx:
        out[idx] = _blur_batch(out[idx], [ts[i]["blur"] for i in idx])
    for i, t in enumerate(ts):
        if "rotation" in t:
            out[i] = rotate(out[i], t["rotation"])
    return out


class ViewPair(NamedTuple):
    w: np.ndarray
    w_prime: np.ndarray
    t: dict
    t_prime: dict


def sample_view_pair(img, policy: ViewPolicy, rng) -> ViewPair:
    img = _check_image(img)
    t = sample_transform(img.shape, policy, rng)
    t_prime = sample_transform(img.shape, policy, rng)
    return ViewPair(apply_transform(img, t), apply_transform(img, t_prime), t, t_prime)


def augment_batch(images, policy: ViewPolicy, rng):
    """One independently sampled view per image of an (N, H, W) stack."""
    images = np.asarray(images, dtype=np.float64)
    if policy.is_empty:
        return images.copy()
    return apply_transforms(images, [sample_transform(img.shape[-2:], policy, rng) for img in images])


class WatermarkPair(NamedTuple):
    view0: np.ndarray
    view1: np.ndarray
    labels: tuple
    angles: tuple


def sample_watermark_pair(img, rng) -> WatermarkPair:
    """Two rotated views: label 0 for an angle in [0, 180), label 1 for [180, 360)."""
    img = _check_image(img)
    a0 = rng.uniform(0.0, 180.0)
    a1 = rng.uniform(180.0, 360.0)
    return WatermarkPair(rotate(img, a0), rotate(img, a1), (0, 1), (a0, a1))


def watermark_batch(images, rng):
    """Stack watermark pairs for every image: returns ``(views, labels)`` of length 2N."""
    views, labels = [], []
    for img in np.asarray(images, dtype=np.float64):
        pair = sample_watermark_pair(img, rng)
        views.extend((pair.view0, pair.view1))
        labels.extend(pair.labels)
    return np.stack(views), np.asarray(labels, dtype=np.int64)
