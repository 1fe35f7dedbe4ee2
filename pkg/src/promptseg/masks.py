"""Binary fire masks, confusion counts, and segmentation quality metrics.

Masks are 2-D boolean numpy arrays of shape (height, width), True = fire.
All metrics are derived from a per-pixel confusion matrix; the conventions
for classes that are absent from the ground truth are:

* a class with no true and no predicted pixels is excluded from the
  mean-accuracy and mean-IoU averages,
* a class with no true pixels but some predicted pixels contributes IoU 0
  to mean IoU and is excluded from mean accuracy,
* frequency-weighted IoU gives absent true classes zero weight,
* the fire-class Dice of two masks that both contain no fire is 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import _kernels
from .errors import MaskShapeError

DEFAULT_MASK_THRESHOLD = 127
DEFAULT_MAE_SCALE = 255.0


def as_mask(a: np.ndarray) -> np.ndarray:
    """Validate and normalize an array into a C-contiguous boolean mask."""
    m = np.ascontiguousarray(a, dtype=bool)
    if m.ndim != 2:
        raise MaskShapeError(f"mask must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise MaskShapeError(f"mask must be at least 1x1, got shape {m.shape}")
    return m


def _check_same_shape(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise MaskShapeError(
            f"mask dimensions differ: prediction is {pred.shape[1]}x{pred.shape[0]}, "
            f"ground truth is {gt.shape[1]}x{gt.shape[0]}"
        )


def _flat_u8(mask: np.ndarray) -> np.ndarray:
    return mask.view(np.uint8).ravel()


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel counts n[predicted][true] for a C-class segmentation.

    ``true_totals[i]`` is the number of pixels whose true class is i;
    ``pred_totals[i]`` the number predicted as i. Row/column sums are
    recomputed from ``n`` on access, so the matrix is the single source
    of truth.
    """

    n: np.ndarray  # (C, C) int64

    def __post_init__(self) -> None:
        m = np.asarray(self.n, dtype=np.int64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise MaskShapeError(f"confusion matrix must be square, got {m.shape}")
        if (m < 0).any():
            raise MaskShapeError("confusion counts must be non-negative")
        object.__setattr__(self, "n", m)

    @property
    def num_classes(self) -> int:
        return self.n.shape[0]

    @property
    def total(self) -> int:
        return int(self.n.sum())

    @property
    def true_totals(self) -> np.ndarray:
        return self.n.sum(axis=0)

    @property
    def pred_totals(self) -> np.ndarray:
        return self.n.sum(axis=1)

    # Binary accessors (background = class 0, fire = class 1).
    @property
    def tp(self) -> int:
        return int(self.n[1, 1])

    @property
    def fp(self) -> int:
        return int(self.n[1, 0])

    @property
    def fn(self) -> int:
        return int(self.n[0, 1])

    @property
    def tn(self) -> int:
        return int(self.n[0, 0])


def confusion_counts(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    """Accumulate binary confusion counts between prediction and ground truth."""
    pred = as_mask(pred)
    gt = as_mask(gt)
    _check_same_shape(pred, gt)
    return ConfusionCounts(_kernels.confusion2(_flat_u8(pred), _flat_u8(gt)))


def pixel_accuracy(c: ConfusionCounts) -> float:
    """Proportion of correctly classified pixels."""
    total = c.total
    if total == 0:
        raise MaskShapeError("pixel accuracy is undefined for zero pixels")
    return float(np.trace(c.n)) / total


def mean_accuracy(c: ConfusionCounts) -> float:
    """Per-class accuracy averaged over classes present in the ground truth."""
    t = c.true_totals
    included = t > 0
    if not included.any():
        raise MaskShapeError("mean accuracy is undefined when every class is empty")
    correct = np.diag(c.n)
    return float(np.mean(correct[included] / t[included]))


def _per_class_iou(c: ConfusionCounts) -> tuple[np.ndarray, np.ndarray]:
    """IoU per class plus an inclusion mask (true or predicted pixels exist)."""
    t = c.true_totals
    t_hat = c.pred_totals
    correct = np.diag(c.n)
    denom = t + t_hat - correct
    included = denom > 0
    iou = np.zeros(c.num_classes, dtype=np.float64)
    iou[included] = correct[included] / denom[included]
    return iou, included


def mean_iou(c: ConfusionCounts) -> float:
    """IoU averaged over classes with any true or predicted pixels."""
    iou, included = _per_class_iou(c)
    if not included.any():
        raise MaskShapeError("mean IoU is undefined when every class is empty")
    return float(np.mean(iou[included]))


def fw_iou(c: ConfusionCounts) -> float:
    """IoU weighted by true-class pixel frequency."""
    total = c.total
    if total == 0:
        raise MaskShapeError("frequency-weighted IoU is undefined for zero pixels")
    iou, _ = _per_class_iou(c)
    weights = c.true_totals / total
    return float(np.sum(weights * iou))


def dice(c: ConfusionCounts) -> float:
    """Fire-class Dice coefficient, 2*TP / (true fire + predicted fire).

    Returns 1.0 when both masks agree fire is absent.
    """
    if c.num_classes != 2:
        raise MaskShapeError("dice is defined for binary confusion counts only")
    denom = c.tp + c.fn + c.tp + c.fp
    if denom == 0:
        return 1.0
    return 2.0 * c.tp / denom


def mae(
    pred: np.ndarray, gt: np.ndarray, scale: float = DEFAULT_MAE_SCALE
) -> tuple[float, float]:
    """Mean absolute per-pixel error, raw in [0, 1] and multiplied by scale."""
    pred = as_mask(pred)
    gt = as_mask(gt)
    _check_same_shape(pred, gt)
    raw = float(np.count_nonzero(pred != gt)) / pred.size
    return raw, raw * scale


@dataclass(frozen=True)
class MetricBundle:
    """The full quality metric set for one prediction/ground-truth pair."""

    pa: float
    ma: float
    miou: float
    fwiou: float
    dice: float
    mae_raw: float
    mae_scaled: float

    FIELDS = ("pa", "ma", "miou", "fwiou", "dice", "mae_raw", "mae_scaled")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.FIELDS}

    @classmethod
    def mean(cls, bundles: list["MetricBundle"]) -> "MetricBundle":
        """Unweighted arithmetic mean over a nonempty list of bundles."""
        if not bundles:
            raise MaskShapeError("cannot average an empty list of metric bundles")
        k = len(bundles)
        return cls(
            **{
                name: sum(getattr(b, name) for b in bundles) / k
                for name in cls.FIELDS
            }
        )


def metric_bundle(
    pred: np.ndarray, gt: np.ndarray, mae_scale: float = DEFAULT_MAE_SCALE
) -> MetricBundle:
    """Compute every quality metric for one mask pair."""
    c = confusion_counts(pred, gt)
    mae_raw, mae_scaled = mae(pred, gt, mae_scale)
    return MetricBundle(
        pa=pixel_accuracy(c),
        ma=mean_accuracy(c),
        miou=mean_iou(c),
        fwiou=fw_iou(c),
        dice=dice(c),
        mae_raw=mae_raw,
        mae_scaled=mae_scaled,
    )


def union_masks(masks: list[np.ndarray]) -> np.ndarray:
    """Pixel-wise OR of a nonempty list of same-sized masks."""
    if not masks:
        raise MaskShapeError("union of an empty mask list")
    out = as_mask(masks[0]).copy()
    for m in masks[1:]:
        m = as_mask(m)
        _check_same_shape(m, out)
        np.logical_or(out, m, out=out)
    return out


def binarize(gray: np.ndarray, threshold: int = DEFAULT_MASK_THRESHOLD) -> np.ndarray:
    """Threshold an 8-bit grayscale image: pixel > threshold becomes fire."""
    g = np.asarray(gray)
    if g.ndim != 2:
        raise MaskShapeError(f"grayscale image must be 2-D, got shape {g.shape}")
    return as_mask(g > threshold)


def read_mask(path, threshold: int = DEFAULT_MASK_THRESHOLD) -> np.ndarray:
    """Load a grayscale PNG mask; values above threshold count as fire."""
    with Image.open(path) as im:
        gray = np.asarray(im.convert("L"))
    return binarize(gray, threshold)


def write_mask(path, mask: np.ndarray) -> None:
    """Write a mask as 8-bit grayscale PNG, fire = 255, background = 0."""
    mask = as_mask(mask)
    Image.fromarray(mask.astype(np.uint8) * 255, mode="L").save(path, format="PNG")


def read_image(path) -> np.ndarray:
    """Load an image as (H, W, 3) uint8 RGB."""
    with Image.open(path) as im:
        return np.ascontiguousarray(np.asarray(im.convert("RGB")))
