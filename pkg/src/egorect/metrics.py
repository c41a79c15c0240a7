"""Depth and surface-normal evaluation metrics, plus least-squares scale alignment.

All reductions run over pixels valid in BOTH ground truth and prediction.
Threshold metrics use strict inequality, and the squared relative error
divides by d* (a flag switches to d*^2 for comparability with codebases
that use the other convention).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import DegenerateInput, NonPositiveValue, NoValidPixels
from .frames import DepthMap, NormalMap

__all__ = ["DepthMetrics", "NormalMetrics", "depth_metrics", "normal_metrics", "scale_align"]


@dataclass(frozen=True)
class DepthMetrics:
    """Error statistics for a depth prediction.

    ``delta1``..``delta3`` are the percentages of pixels whose ratio
    max(pred/gt, gt/pred) stays strictly below 1.25, 1.25^2, 1.25^3.
    """

    abs_rel: float
    sq_rel: float
    log_rmse: float
    rmse: float
    delta1: float
    delta2: float
    delta3: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NormalMetrics:
    """Angular error statistics for a surface-normal prediction, in degrees.

    ``pct5``, ``pct75``, ``pct1125`` are the percentages of pixels with
    angular error strictly below 5, 7.5, and 11.25 degrees.
    """

    mean_deg: float
    median_deg: float
    rmse_deg: float
    pct5: float
    pct75: float
    pct1125: float

    def to_dict(self) -> dict:
        return asdict(self)


def _mutual_depth(gt: DepthMap, pred: DepthMap) -> tuple[np.ndarray, np.ndarray]:
    if gt.shape != pred.shape:
        raise ValueError(f"depth maps differ in size: {gt.shape} vs {pred.shape}")
    mask = gt.valid & pred.valid
    return gt.values[mask], pred.values[mask]


def depth_metrics(gt: DepthMap, pred: DepthMap, sq_rel_squared_denom: bool = False) -> DepthMetrics:
    """Depth error statistics over mutually valid pixels.

    Parameters
    ----------
    gt, pred : DepthMap
        Same-size maps; a pixel contributes only if valid in both.
    sq_rel_squared_denom : bool
        If True, sq_rel divides by d*^2 instead of d*.

    Raises
    ------
    NoValidPixels
        If no pixel is valid in both maps.
    NonPositiveValue
        If a contributing depth is <= 0 (the log terms are undefined).
    """
    d_gt, d_pred = _mutual_depth(gt, pred)
    if d_gt.size == 0:
        raise NoValidPixels("no mutually valid pixels for depth metrics")
    if np.any(d_gt <= 0) or np.any(d_pred <= 0):
        raise NonPositiveValue("depth metrics need strictly positive valid depths")

    diff = d_pred - d_gt
    abs_rel = float(np.mean(np.abs(diff) / d_gt))
    denom = d_gt**2 if sq_rel_squared_denom else d_gt
    sq_rel = float(np.mean(diff**2 / denom))
    log_rmse = float(np.sqrt(np.mean((np.log(d_pred) - np.log(d_gt)) ** 2)))
    rmse = float(np.sqrt(np.mean(diff**2)))
    ratio = np.maximum(d_pred / d_gt, d_gt / d_pred)
    deltas = [100.0 * float(np.mean(ratio < 1.25**k)) for k in (1, 2, 3)]
    return DepthMetrics(abs_rel, sq_rel, log_rmse, rmse, *deltas)


def normal_metrics(gt: NormalMap, pred: NormalMap) -> NormalMetrics:
    """Angular error statistics over mutually valid pixels, in degrees.

    The per-pixel angle is acos of the clamped dot product.  The median is
    the midpoint convention (numpy default), which the constant-error and
    half/half fixtures pin down.

    Raises
    ------
    NoValidPixels
        If no pixel is valid in both maps.
    """
    if gt.shape != pred.shape:
        raise ValueError(f"normal maps differ in size: {gt.shape} vs {pred.shape}")
    mask = gt.valid & pred.valid
    if not mask.any():
        raise NoValidPixels("no mutually valid pixels for normal metrics")
    dots = np.einsum("ij,ij->i", gt.vectors[mask], pred.vectors[mask])
    ang = np.degrees(np.arccos(np.clip(dots, -1.0, 1.0)))
    pcts = [100.0 * float(np.mean(ang < th)) for th in (5.0, 7.5, 11.25)]
    return NormalMetrics(
        float(np.mean(ang)),
        float(np.median(ang)),
        float(np.sqrt(np.mean(ang**2))),
        *pcts,
    )


def scale_align(gt: DepthMap, pred: DepthMap) -> float:
    """Least-squares scale s minimizing sum((s * pred - gt)^2).

    Closed form s = sum(pred * gt) / sum(pred^2) over mutually valid
    pixels; the caller applies it to the prediction before computing
    metrics on scale-ambiguous depth.

    Raises
    ------
    DegenerateInput
        If there is no usable pixel (empty mutual mask or all-zero pred).
    """
    d_gt, d_pred = _mutual_depth(gt, pred)
    denom = float(np.sum(d_pred**2))
    if d_gt.size == 0 or denom == 0.0:
        raise DegenerateInput("scale alignment needs a non-zero prediction somewhere")
    return float(np.sum(d_pred * d_gt) / denom)
