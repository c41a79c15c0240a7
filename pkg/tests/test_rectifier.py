"""Mode assignment, the rectify-predict-unwarp loop, and the loss stack."""

import numpy as np
import pytest

import egorect as eg
from egorect.clustering import ReferenceSet
from egorect.exceptions import AllModesInvalid, AntipodalInput, KindMismatch
from egorect.frames import DepthMap, NormalMap

UP = np.array([0.0, 1.0, 0.0])


def two_mode_refs(angle_deg=55.0):
    a = np.deg2rad(angle_deg)
    return ReferenceSet(np.array([UP, [0.0, np.cos(a), np.sin(a)]]))


def test_assign_mode_picks_nearest():
    refs = two_mode_refs()
    near_up = np.array([0.05, 1.0, 0.0]) / np.linalg.norm([0.05, 1.0, 0.0])
    a = eg.assign_mode(near_up, refs)
    assert a.chosen == 0
    assert np.array_equal(a.weights, [1.0, 0.0])
    tilted = np.array([0.0, np.cos(0.9), np.sin(0.9)])
    assert eg.assign_mode(tilted, refs).chosen == 1


def test_assign_mode_tie_goes_to_lowest_index():
    refs = ReferenceSet(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    g = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    assert eg.assign_mode(g, refs).chosen == 0


def test_mode_assignment_validation():
    with pytest.raises(ValueError):
        eg.ModeAssignment([-0.1, 1.0], 1)
    with pytest.raises(ValueError):
        eg.ModeAssignment([0.2, 0.8], 0)
    with pytest.raises(ValueError):
        eg.ModeAssignment([0.0, 0.0], 0)


def test_constant_predictor_identity_mode_is_exact(k_std, upright_bundle):
    # gravity already on the reference: the warp is the identity and the
    # constant depth field must come back untouched
    refs = ReferenceSet(UP[None, :])
    pred = eg.rectify_predict(
        upright_bundle, refs, eg.ConstantPredictor("depth", 2.0), upright_bundle.gravity
    )
    assert pred.valid.all()
    assert np.array_equal(pred.values, np.full(upright_bundle.shape, 2.0))


def test_oracle_predictor_round_trip_depth(k_std):
    scene = eg.standard_scene()
    pose = eg.CameraPose(eg.pitch_rotation(30.0))
    b = eg.render_view(scene, k_std, pose)
    refs = ReferenceSet(UP[None, :])
    oracle = eg.OraclePredictor(scene, pose, output_kind="depth")
    pred = eg.rectify_predict(b, refs, oracle, b.gravity)
    m = pred.valid & b.depth.valid
    assert m.mean() > 0.3
    rel = np.abs(pred.values[m] - b.depth.values[m]) / b.depth.values[m]
    assert rel.mean() < 0.01


def test_oracle_predictor_round_trip_normals(k_std):
    scene = eg.standard_scene()
    pose = eg.CameraPose(eg.roll_rotation(25.0))
    b = eg.render_view(scene, k_std, pose)
    refs = ReferenceSet(UP[None, :])
    oracle = eg.OraclePredictor(scene, pose, output_kind="normal")
    pred = eg.rectify_predict(b, refs, oracle, b.gravity)
    m = pred.valid & b.normals.valid
    assert m.mean() > 0.3
    assert eg.loss_geo(b.normals, pred, reduction="mean") < np.deg2rad(1.0)


def test_rectify_with_e_hat_equal_to_reference_matches_plain(k_std):
    scene = eg.standard_scene()
    pose = eg.CameraPose(eg.pitch_rotation(20.0))
    b = eg.render_view(scene, k_std, pose)
    refs = ReferenceSet(UP[None, :])
    oracle = eg.OraclePredictor(scene, pose)
    plain = eg.rectify_predict(b, refs, oracle, b.gravity)
    refined = eg.rectify_predict(b, refs, oracle, b.gravity, e_hat=UP)
    assert np.array_equal(plain.values, refined.values)
    assert np.array_equal(plain.valid, refined.valid)


def test_rectify_soft_weights_fuse_depth(k_std, upright_bundle):
    refs = two_mode_refs(30.0)
    const = eg.ConstantPredictor("depth", 2.0)
    g = upright_bundle.gravity
    m0 = eg.rectify_predict(upright_bundle, refs, const, g, weights=[1.0, 0.0])
    m1 = eg.rectify_predict(upright_bundle, refs, const, g, weights=[0.0, 1.0])
    fused = eg.rectify_predict(upright_bundle, refs, const, g, weights=[0.5, 0.5])
    assert np.array_equal(fused.valid, m0.valid | m1.valid)
    both = m0.valid & m1.valid
    lo = np.minimum(m0.values[both], m1.values[both])
    hi = np.maximum(m0.values[both], m1.values[both])
    assert np.all(fused.values[both] >= lo - 1e-12)
    assert np.all(fused.values[both] <= hi + 1e-12)
    only0 = m0.valid & ~m1.valid
    assert np.allclose(fused.values[only0], m0.values[only0], atol=1e-12)


def test_rectify_soft_weights_fuse_normals(k_std, upright_bundle):
    refs = two_mode_refs(30.0)
    const = eg.ConstantPredictor("normal", (0.0, 0.0, -1.0))
    fused = eg.rectify_predict(
        upright_bundle, refs, const, upright_bundle.gravity, weights=[0.7, 0.3]
    )
    assert fused.valid.any()
    n = np.linalg.norm(fused.vectors[fused.valid], axis=1)
    assert np.allclose(n, 1.0, atol=1e-9)


def test_rectify_weights_validation(k_std, upright_bundle):
    refs = two_mode_refs()
    const = eg.ConstantPredictor("depth", 2.0)
    g = upright_bundle.gravity
    with pytest.raises(ValueError):
        eg.rectify_predict(upright_bundle, refs, const, g, weights=[1.0])
    with pytest.raises(ValueError):
        eg.rectify_predict(upright_bundle, refs, const, g, weights=[-1.0, 2.0])
    with pytest.raises(ValueError):
        eg.rectify_predict(upright_bundle, refs, const, g, weights=[0.0, 0.0])


def test_rectify_all_modes_invalid(k_std, upright_bundle):
    # a 135 degree rectification pushes every source ray out of the canvas
    a = np.deg2rad(135.0)
    refs = ReferenceSet(np.array([[0.0, np.cos(a), np.sin(a)]]))
    with pytest.raises(AllModesInvalid):
        eg.rectify_predict(
            upright_bundle, refs, eg.ConstantPredictor("depth", 2.0), upright_bundle.gravity
        )


def test_rectify_antipodal_target_propagates(k_std, upright_bundle):
    refs = ReferenceSet(np.array([[0.0, -1.0, 0.0]]))
    with pytest.raises(AntipodalInput):
        eg.rectify_predict(
            upright_bundle, refs, eg.ConstantPredictor("depth", 2.0), upright_bundle.gravity
        )


def test_predictor_kind_validation():
    with pytest.raises(ValueError):
        eg.ConstantPredictor("color")
    with pytest.raises(ValueError):
        eg.OraclePredictor(eg.standard_scene(), eg.CameraPose(np.eye(3)), "color")


def test_loss_sr_hand_values():
    e1 = np.array([1.0, 0.0, 0.0])
    e2 = np.array([0.0, 1.0, 0.0])
    assert eg.loss_sr(e1, e1, e2, e2) == 0.0
    assert eg.loss_sr(e1, e2, e2, e2) == pytest.approx(np.pi / 2.0, abs=1e-12)
    assert eg.loss_sr(e1, e1, e2, -e2) == pytest.approx(np.pi, abs=1e-12)
    with pytest.raises(ValueError):
        eg.loss_sr(2.0 * e1, e1, e2, e2)


def test_loss_geo_depth_hand_fixture():
    gt = DepthMap(np.array([[1.0, 2.0], [3.0, 4.0]]), np.ones((2, 2), dtype=bool))
    pred = DepthMap(
        np.array([[1.5, 2.0], [3.0, 8.0]]),
        np.array([[True, True], [True, False]]),
    )
    assert eg.loss_geo(gt, pred) == pytest.approx(0.5, abs=1e-12)
    assert eg.loss_geo(gt, pred, reduction="mean") == pytest.approx(0.5 / 3.0, abs=1e-12)


def test_loss_geo_normals_hand_fixture():
    v = np.zeros((1, 2, 3))
    v[0, 0] = [0.0, 0.0, -1.0]
    v[0, 1] = [0.0, 0.0, -1.0]
    w = np.zeros((1, 2, 3))
    w[0, 0] = [0.0, -1.0, 0.0]  # 90 degrees off
    w[0, 1] = [0.0, 0.0, -1.0]
    ones = np.ones((1, 2), dtype=bool)
    assert eg.loss_geo(NormalMap(v, ones), NormalMap(w, ones)) == pytest.approx(
        np.pi / 2.0, abs=1e-12
    )


def test_loss_geo_edge_cases():
    gt = DepthMap(np.ones((2, 2)), np.zeros((2, 2), dtype=bool))
    pred = DepthMap(np.ones((2, 2)), np.ones((2, 2), dtype=bool))
    assert eg.loss_geo(gt, pred) == 0.0
    nm = NormalMap(np.zeros((2, 2, 3)), np.zeros((2, 2), dtype=bool))
    with pytest.raises(KindMismatch):
        eg.loss_geo(gt, nm)
    with pytest.raises(ValueError):
        eg.loss_geo(gt, DepthMap(np.ones((3, 3)), np.ones((3, 3), dtype=bool)))
    with pytest.raises(ValueError):
        eg.loss_geo(gt, pred, reduction="median")


def test_loss_total():
    assert eg.loss_total(1.5, 0.25) == pytest.approx(1.75)
    assert eg.loss_total(1.5, 0.25, lam=2.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        eg.loss_total(1.0, 1.0, lam=-0.5)
