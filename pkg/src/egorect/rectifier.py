"""Mode assignment, the rectify-predict-unwarp pipeline, and training losses.

A frame is assigned to the reference direction nearest its gravity, warped
so its gravity lands on the target direction, run through a pluggable
geometry predictor, and the prediction is transported back into the
original frame.  With one-hot weights the mixture reduces to the chosen
mode; soft weights average depth and renormalize summed normals across
modes.

Predictors are interchangeable: the neural estimators this pipeline was
built to serve are out of scope, so an analytic oracle and a constant
baseline stand in for them.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .clustering import ReferenceSet
from .exceptions import AllModesInvalid, KindMismatch
from .frames import DepthMap, FrameBundle, NormalMap
from .geometry import rotation_between, rotation_from_gravity_principal
from .synthetic import CameraPose, Scene, render_view
from .validation import check_unit
from .warp import unwarp_depth_prediction, unwarp_normal_prediction, warp_bundle

__all__ = [
    "ModeAssignment",
    "GeometryPredictor",
    "OraclePredictor",
    "ConstantPredictor",
    "assign_mode",
    "rectify_predict",
    "loss_sr",
    "loss_geo",
    "loss_total",
]


@dataclass
class ModeAssignment:
    """Mixture weights over reference directions plus the argmax index."""

    weights: np.ndarray
    chosen: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be non-negative with positive sum")
        if int(np.argmax(w)) != self.chosen:
            raise ValueError("chosen must be the argmax of the weights")
        self.weights = w


class GeometryPredictor(ABC):
    """A geometry estimator applied to rectified frames.

    Attributes
    ----------
    output_kind : {"depth", "normal"}
        Which raster ``predict`` returns.
    """

    output_kind: str = "depth"

    @abstractmethod
    def predict(self, bundle: FrameBundle):
        """Return a DepthMap or NormalMap matching the bundle's size."""


class OraclePredictor(GeometryPredictor):
    """Exact predictor backed by the analytic renderer.

    Given the scene and the pose of the ORIGINAL (tilted) camera, it
    recovers the rectifying rotation from the incoming bundle's gravity
    and renders the scene at the composed pose.  This is well-defined
    because the rectification pipeline only ever applies twist-free
    rotations, so gravity alone identifies the warp that was used.

    Its output is exact ground truth for the rectified view, which makes
    the full rectify-predict-unwarp loop a pure measurement of
    resampling error.
    """

    def __init__(self, scene: Scene, pose: CameraPose, output_kind: str = "depth"):
        if output_kind not in ("depth", "normal"):
            raise ValueError(f"output_kind must be 'depth' or 'normal', got {output_kind!r}")
        self.scene = scene
        self.pose = pose
        self.output_kind = output_kind
        self._gravity0 = pose.rotation @ scene.gravity_world

    def predict(self, bundle: FrameBundle):
        r = rotation_between(self._gravity0, bundle.gravity)
        composed = CameraPose(r @ self.pose.rotation, self.pose.position)
        view = render_view(self.scene, bundle.intrinsics, composed)
        return view.depth if self.output_kind == "depth" else view.normals


class ConstantPredictor(GeometryPredictor):
    """Plumbing-test predictor: uniform depth or a single normal everywhere."""

    def __init__(self, output_kind: str = "depth", value=2.0):
        if output_kind not in ("depth", "normal"):
            raise ValueError(f"output_kind must be 'depth' or 'normal', got {output_kind!r}")
        self.output_kind = output_kind
        self.value = value

    def predict(self, bundle: FrameBundle):
        h, w = bundle.shape
        if self.output_kind == "depth":
            return DepthMap(
                np.full((h, w), float(self.value)), np.ones((h, w), dtype=bool),
                bundle.depth.d_max,
            )
        vec = check_unit(np.asarray(self.value, dtype=np.float64), "value")
        return NormalMap(np.tile(vec, (h, w, 1)), np.ones((h, w), dtype=bool))


def assign_mode(g, refs: ReferenceSet) -> ModeAssignment:
    """One-hot assignment of a gravity direction to its nearest reference.

    Nearest means smallest squared chordal distance ||g - r_i||^2; ties
    go to the lowest index.
    """
    g = check_unit(g, "g")
    d2 = 2.0 - 2.0 * (refs.directions @ g)
    chosen = int(np.argmin(d2))
    weights = np.zeros(len(refs))
    weights[chosen] = 1.0
    return ModeAssignment(weights, chosen)


def _unwarp(pred, k, r):
    if isinstance(pred, DepthMap):
        return unwarp_depth_prediction(pred, k, r)
    return unwarp_normal_prediction(pred, k, r)


def _run_mode(b: FrameBundle, r, predictor: GeometryPredictor):
    warped = warp_bundle(b, r)
    pred_up = predictor.predict(warped)
    if pred_up.shape != b.shape:
        raise ValueError(
            f"predictor returned shape {pred_up.shape}, expected {b.shape}"
        )
    return _unwarp(pred_up, b.intrinsics, r)


def rectify_predict(
    b: FrameBundle,
    refs: ReferenceSet,
    predictor: GeometryPredictor,
    g_hat,
    e_hat=None,
    weights=None,
):
    """Predict geometry for a frame through mode-assigned rectification.

    The frame's estimated gravity ``g_hat`` picks a mode; the rectifying
    rotation maps g_hat onto ``e_hat`` when given (the refined target),
    otherwise onto the chosen reference direction.  The predictor then
    runs on the warped frame, and its output is transported back.

    With ``weights`` (one value per mode, non-negative), every positively
    weighted mode runs with its own rotation and the results are fused:
    weighted per-pixel mean for depth, renormalized weighted vector sum
    for normals.  ``e_hat`` refines only the chosen mode's rotation.

    Raises
    ------
    AllModesInvalid
        If every executed mode yields a fully invalid prediction.
    AntipodalInput
        Propagated when g_hat is antipodal to a rectification target.
    """
    g_hat = check_unit(g_hat, "g_hat")
    assignment = assign_mode(g_hat, refs)
    if weights is None:
        w = assignment.weights
    else:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape[0] != len(refs) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be one non-negative value per mode, positive sum")

    results = []
    used_weights = []
    for i in range(len(refs)):
        if w[i] <= 0:
            continue
        if e_hat is not None and i == assignment.chosen:
            r = rotation_from_gravity_principal(g_hat, e_hat)
        else:
            r = rotation_between(g_hat, refs.directions[i])
        results.append(_run_mode(b, r, predictor))
        used_weights.append(w[i])

    if all(not res.valid.any() for res in results):
        raise AllModesInvalid("every rectification mode produced a fully invalid prediction")
    if len(results) == 1:
        return results[0]
    return _fuse(results, used_weights, b)


def _fuse(results, used_weights, b: FrameBundle):
    h, w_px = b.shape
    if isinstance(results[0], DepthMap):
        acc = np.zeros((h, w_px))
        wsum = np.zeros((h, w_px))
        for res, wt in zip(results, used_weights):
            acc += np.where(res.valid, res.values * wt, 0.0)
            wsum += np.where(res.valid, wt, 0.0)
        valid = wsum > 0
        vals = np.where(valid, acc / np.where(valid, wsum, 1.0), 0.0)
        return DepthMap(vals, valid, results[0].d_max)
    acc = np.zeros((h, w_px, 3))
    any_valid = np.zeros((h, w_px), dtype=bool)
    for res, wt in zip(results, used_weights):
        acc += np.where(res.valid[:, :, None], res.vectors * wt, 0.0)
        any_valid |= res.valid
    norms = np.linalg.norm(acc, axis=2)
    valid = any_valid & (norms > 1e-9)  # antialigned modes can cancel out
    return NormalMap(np.where(valid[:, :, None], acc, 0.0), valid)


def loss_sr(g_pred, g_gt, e_pred, e_gt) -> float:
    """Rectifier loss: angular error of gravity plus principal direction.

    acos(g_gt . g_pred) + acos(e_gt . e_pred), dot products clamped to
    [-1, 1]; value in [0, 2*pi].
    """
    g_pred, g_gt = check_unit(g_pred, "g_pred"), check_unit(g_gt, "g_gt")
    e_pred, e_gt = check_unit(e_pred, "e_pred"), check_unit(e_gt, "e_gt")
    a = float(np.arccos(np.clip(g_pred @ g_gt, -1.0, 1.0)))
    b = float(np.arccos(np.clip(e_pred @ e_gt, -1.0, 1.0)))
    return a + b


def loss_geo(y_gt, y_pred, reduction: str = "sum") -> float:
    """Geometric loss over mutually valid pixels.

    Absolute difference for depth, angle in radians for normals, reduced
    by sum (default) or mean.  Pixels invalid in either raster are
    skipped; with no overlap at all the loss is 0.

    Raises
    ------
    KindMismatch
        If one input is a depth map and the other a normal map.
    """
    if reduction not in ("sum", "mean"):
        raise ValueError(f"reduction must be 'sum' or 'mean', got {reduction!r}")
    if isinstance(y_gt, DepthMap) != isinstance(y_pred, DepthMap):
        raise KindMismatch("loss_geo needs two rasters of the same kind")
    if y_gt.shape != y_pred.shape:
        raise ValueError(f"raster sizes differ: {y_gt.shape} vs {y_pred.shape}")
    mask = y_gt.valid & y_pred.valid
    if not mask.any():
        return 0.0
    if isinstance(y_gt, DepthMap):
        errs = np.abs(y_gt.values[mask] - y_pred.values[mask])
    else:
        dots = np.einsum("ij,ij->i", y_gt.vectors[mask], y_pred.vectors[mask])
        errs = np.arccos(np.clip(dots, -1.0, 1.0))
    return float(errs.mean() if reduction == "mean" else errs.sum())


def loss_total(geo: float, sr: float, lam: float = 1.0) -> float:
    """Total loss geo + lam * sr (lam defaults to 1)."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    return float(geo) + float(lam) * float(sr)
