"""End-to-end tests for the command-line interface.

Drives ``egorect.cli.dispatch`` directly so exit codes and printed JSON
can be asserted without spawning subprocesses.  Exit code contract:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import json

import numpy as np
import pytest

import egorect as eg
from egorect.cli import dispatch
from egorect.clustering import ReferenceSet, save_reference_set


def run(capsys, argv):
    rc = dispatch(argv)
    out = capsys.readouterr().out
    assert out.endswith("\n") and "\n" not in out[:-1]  # single-line JSON
    return rc, json.loads(out)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """Rendered two-frame manifest shared by the pipeline tests."""
    d = tmp_path_factory.mktemp("frames")
    rc = dispatch(["render", "--angles", "0,20", "--axis", "pitch",
                   "--out-dir", str(d)])
    assert rc == 0
    return d / "manifest.jsonl"


def test_render_writes_manifest(dataset, capsys):
    capsys.readouterr()
    manifest = eg.read_manifest(dataset)
    assert [r.frame_id for r in manifest.records] == ["pitch_0", "pitch_20"]
    b = eg.load_sample(manifest.records[0])
    assert np.allclose(b.gravity, [0.0, 1.0, 0.0])


def test_cluster_refs_then_rectify(dataset, tmp_path, capsys):
    refs_path = tmp_path / "refs.json"
    rc, info = run(capsys, ["cluster-refs", "--manifest", str(dataset),
                            "--delta", "0.5", "--out", str(refs_path)])
    assert rc == 0
    # 0 and 20 degree gravities: mean squared chordal spread under 0.5
    assert info == {"k": 1, "out": str(refs_path)}
    refs = eg.load_reference_set(refs_path)
    assert len(refs) == 1

    out_dir = tmp_path / "rect"
    rc, info = run(capsys, ["rectify", "--manifest", str(dataset),
                            "--refs", str(refs_path), "--out-dir", str(out_dir)])
    assert rc == 0
    assert info == {"frames": 2, "out_dir": str(out_dir)}
    modes = json.loads((out_dir / "modes.json").read_text())
    assert [row["frame_id"] for row in modes] == ["pitch_0", "pitch_20"]
    for rec in eg.read_manifest(out_dir / "manifest.jsonl").records:
        warped = eg.load_sample(rec)
        # every frame now shares the single reference gravity
        assert np.allclose(warped.gravity, refs.directions[0], atol=1e-6)


def test_eval_depth_self_is_zero(dataset, capsys):
    rc, m = run(capsys, ["eval-depth", "--gt-manifest", str(dataset),
                         "--pred-manifest", str(dataset)])
    assert rc == 0
    assert m["abs_rel"] == 0.0
    assert m["rmse"] == 0.0
    assert m["delta1"] == 100.0
    assert "scale" not in m

    rc, m = run(capsys, ["eval-depth", "--gt-manifest", str(dataset),
                         "--pred-manifest", str(dataset), "--scale-align"])
    assert rc == 0
    assert m["scale"] == pytest.approx(1.0, abs=1e-12)


def test_eval_normal_self_is_zero(dataset, capsys):
    rc, m = run(capsys, ["eval-normal", "--gt-manifest", str(dataset),
                         "--pred-manifest", str(dataset)])
    assert rc == 0
    assert m["mean_deg"] == 0.0
    assert m["pct1125"] == 100.0


def test_normals_from_depth_command(dataset, tmp_path, capsys):
    out_dir = tmp_path / "nfd"
    rc, info = run(capsys, ["normals-from-depth", "--manifest", str(dataset),
                            "--out-dir", str(out_dir)])
    assert rc == 0
    assert info["frames"] == 2
    rec = eg.read_manifest(out_dir / "manifest.jsonl").records[0]
    redone = eg.load_sample(rec)
    orig = eg.load_sample(eg.read_manifest(dataset).records[0])
    m = redone.normals.valid & orig.normals.valid
    assert m.mean() > 0.3
    dots = np.einsum("ij,ij->i", redone.normals.vectors[m], orig.normals.vectors[m])
    ang = np.rad2deg(np.arccos(np.clip(dots, -1.0, 1.0)))
    assert ang.mean() < 2.0  # plane fit on millimeter-quantized depth


def test_demo_equivariance_zero_angle_is_exact(capsys):
    rc, out = run(capsys, ["demo-equivariance", "--angles", "0", "--axis", "pitch"])
    assert rc == 0
    assert out["axis"] == "pitch"
    (row,) = out["results"]
    assert row["angle_deg"] == 0.0
    assert row["abs_rel"] <= 1e-9
    assert row["normal_mean_deg"] <= 1e-6


def test_demo_equivariance_tilted(capsys):
    rc, out = run(capsys, ["demo-equivariance", "--angles", "20,40", "--axis", "roll"])
    assert rc == 0
    assert [r["angle_deg"] for r in out["results"]] == [20.0, 40.0]
    for row in out["results"]:
        assert row["abs_rel"] < 0.01
        assert row["normal_mean_deg"] < 1.0
        assert row["valid_fraction"] > 0.3


def test_json_output_sorts_keys(dataset, capsys):
    rc = dispatch(["eval-depth", "--gt-manifest", str(dataset),
                   "--pred-manifest", str(dataset)])
    assert rc == 0
    keys = list(json.loads(capsys.readouterr().out))
    assert keys == sorted(keys)


def test_pipeline_accepts_relative_paths(tmp_path, monkeypatch, capsys):
    # manifests must stay loadable when every argument is a relative path
    monkeypatch.chdir(tmp_path)
    assert dispatch(["render", "--angles", "0,25", "--axis", "roll",
                     "--out-dir", "frames"]) == 0
    doc = json.loads((tmp_path / "frames" / "manifest.jsonl").read_text().splitlines()[0])
    assert doc["depth_path"] == "roll_0_depth.png"
    assert dispatch(["cluster-refs", "--manifest", "frames/manifest.jsonl",
                     "--delta", "0.5", "--out", "refs.json"]) == 0
    assert dispatch(["rectify", "--manifest", "frames/manifest.jsonl",
                     "--refs", "refs.json", "--out-dir", "rect"]) == 0
    assert dispatch(["eval-depth", "--gt-manifest", "frames/manifest.jsonl",
                     "--pred-manifest", "frames/manifest.jsonl"]) == 0
    capsys.readouterr()


def test_usage_errors_exit_one(tmp_path, capsys):
    for argv in (
        [],
        ["render", "--angles", "0"],
        ["render", "--angles", "0", "--axis", "yaw", "--out-dir", str(tmp_path)],
        ["render", "--angles", "1,zebra", "--axis", "pitch", "--out-dir", str(tmp_path)],
        ["no-such-command"],
    ):
        with pytest.raises(SystemExit) as e:
            dispatch(argv)
        assert e.value.code == 1, argv
    capsys.readouterr()


def test_data_errors_exit_two(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    rc = dispatch(["cluster-refs", "--manifest", str(missing),
                   "--delta", "0.1", "--out", str(tmp_path / "r.json")])
    assert rc == 2

    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    rc = dispatch(["cluster-refs", "--manifest", str(empty),
                   "--delta", "0.1", "--out", str(tmp_path / "r.json")])
    assert rc == 2

    rc = dispatch(["render", "--scene", str(tmp_path / "ghost.json"),
                   "--angles", "0", "--axis", "pitch",
                   "--out-dir", str(tmp_path / "o")])
    assert rc == 2

    bad_scene = tmp_path / "bad.json"
    bad_scene.write_text("{not json")
    rc = dispatch(["render", "--scene", str(bad_scene),
                   "--angles", "0", "--axis", "pitch",
                   "--out-dir", str(tmp_path / "o")])
    assert rc == 2
    capsys.readouterr()


def test_numeric_errors_exit_three(tmp_path, capsys):
    d = tmp_path / "one"
    rc = dispatch(["render", "--angles", "0", "--axis", "pitch",
                   "--out-dir", str(d)])
    assert rc == 0
    refs_path = tmp_path / "down.json"
    save_reference_set(ReferenceSet(np.array([[0.0, -1.0, 0.0]])), refs_path)
    rc = dispatch(["rectify", "--manifest", str(d / "manifest.jsonl"),
                   "--refs", str(refs_path), "--out-dir", str(tmp_path / "r")])
    assert rc == 3  # upright gravity is antipodal to the only reference
    capsys.readouterr()
