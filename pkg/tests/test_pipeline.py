import csv

import numpy as np
import pytest

from cograsp.candidates import SamplerConfig
from cograsp.geometry import OBJECT, RigidTransform
from cograsp.io import load_json, read_records
from cograsp.pipeline import (
    ObjectSpec,
    PipelineConfig,
    SceneSpec,
    ablation_report,
    build_scene,
    config_hash,
    generate_dataset,
    run_pipeline,
    sample_object,
    voxel_downsample,
)
from cograsp.validation import ValidationError

SMALL = {
    "scenes": [
        {"rng_seed": 1, "objects": [{"kind": "box", "dimensions": [0.04, 0.05, 0.1], "spacing": 0.008}]},
        {"rng_seed": 2, "objects": [{"kind": "cylinder", "dimensions": [0.025, 0.08], "spacing": 0.008}]},
    ],
    "sampler": {"max_candidates": 6},
    "hands": {"n": 3},
}


@pytest.mark.parametrize(
    "kind,dims",
    [("box", (0.05, 0.05, 0.1)), ("cylinder", (0.03, 0.1)), ("sphere", (0.04,)),
     ("mug-composite", (0.03, 0.09, 0.025, 0.006)), ("l-handle", (0.12, 0.02, 0.05))],
)
def test_sample_object(kind, dims):
    cloud = sample_object(ObjectSpec(kind, dims))
    assert len(cloud) > 50
    assert np.all(cloud.mask == OBJECT)


def test_object_spec_validation():
    with pytest.raises(ValidationError):
        ObjectSpec("torus", (1.0,))
    with pytest.raises(ValidationError):
        ObjectSpec("box", (1.0, 2.0))


def test_scene_pose_applied(random_transform):
    xf = random_transform()
    base = sample_object(ObjectSpec("box", (0.05, 0.05, 0.1)))
    moved = build_scene(SceneSpec((ObjectSpec("box", (0.05, 0.05, 0.1), pose=xf),)))[0]
    assert np.allclose(moved.points, xf.apply(base.points), atol=1e-12)


def test_voxel_downsample_keeps_first_point():
    pts = np.array([[0.0, 0, 0], [0.001, 0, 0], [0.02, 0, 0]])
    from cograsp.geometry import PointCloud

    out = voxel_downsample(PointCloud(pts), 0.01)
    assert out.points.tolist() == [[0.0, 0, 0], [0.02, 0, 0]]


def test_config_round_trip_and_hash():
    cfg = PipelineConfig.from_dict(SMALL)
    again = PipelineConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert config_hash(cfg.to_dict()) == config_hash(again.to_dict())
    assert config_hash(cfg.with_seed(5).to_dict()) != config_hash(cfg.to_dict())


def test_config_rejects_unknown_keys():
    with pytest.raises(ValidationError):
        PipelineConfig.from_dict({"sampler": {"max_candidate": 3}})
    with pytest.raises(ValidationError):
        PipelineConfig.from_dict({"bogus": 1})


def test_empty_config_is_demo():
    cfg = PipelineConfig.from_dict({})
    assert cfg.scenes[0].objects[0].kind == "mug-composite"


class TestDemoRun:
    def test_shapes(self, demo_run):
        obj = demo_run.objects[0]
        assert len(obj.grasps) == 64 and len(obj.hands) == 4
        assert len(obj.records) == 256
        assert obj.prune.thresholds == obj.thresholds

    def test_report(self, demo_run):
        rep = demo_run.report.to_dict()
        assert rep["objects"][0]["pairs"] == 256
        assert rep["aggregate"]["s_a"]["count"] == 4 * rep["objects"][0]["accepted"]

    def test_ablation_endpoints(self, demo_run):
        recs = demo_run.objects[0].records
        tables = ablation_report(recs, steps=10)
        for axis in ("distance", "angle"):
            counts = [c for _, c in tables[axis]]
            assert counts[-1] == 0
            assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_run_pipeline_artifacts(tmp_path):
    scene = SceneSpec((ObjectSpec("box", (0.04, 0.05, 0.1), spacing=0.008),), rng_seed=3)
    res = run_pipeline(scene, sampler_cfg=SamplerConfig(max_candidates=5), out_dir=tmp_path)
    obj_dir = tmp_path / "object_0"
    for name in ("records.csv", "prune.json", "candidates.json"):
        assert (obj_dir / name).exists()
    assert read_records(obj_dir / "records.csv") == res.objects[0].records
    prune_doc = load_json(obj_dir / "prune.json")
    assert prune_doc["provenance"]["config_hash"] == res.report.config_hash
    assert load_json(tmp_path / "report.json")["config_hash"] == res.report.config_hash


def test_object_without_candidates(tmp_path):
    scene = SceneSpec((ObjectSpec("sphere", (0.06,), spacing=0.008),))
    res = run_pipeline(scene, sampler_cfg=SamplerConfig(max_candidates=5), out_dir=tmp_path)
    assert res.objects[0].records == [] and res.objects[0].prune is None
    assert load_json(tmp_path / "object_0" / "prune.json")["accepted"] == []


def test_generate_dataset_split(tmp_path):
    manifest = generate_dataset(PipelineConfig.from_dict(SMALL), tmp_path, split=0.8, split_seed=4)
    assert len(manifest["scenes"]) == 2
    total = manifest["total_pairs"]
    assert total == manifest["positives"] + manifest["negatives"] > 0
    with open(tmp_path / "split.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == total
    assert sum(r["split"] == "train" for r in rows) == manifest["split"]["train"] == int(np.floor(0.8 * total + 0.5))
    for s in manifest["scenes"]:
        for o in s["objects"]:
            recs = read_records(tmp_path / f"scene_{s['index']}" / f"object_{o['index']}" / "records.csv")
            assert o["positives"] == sum(r.label for r in recs) <= o["pairs"] // 2


def test_bad_split(tmp_path):
    with pytest.raises(ValidationError):
        generate_dataset(PipelineConfig.from_dict(SMALL), tmp_path, split=1.5)


def test_pose_identity_default():
    assert np.array_equal(ObjectSpec("box", (1.0, 1.0, 1.0)).pose.rotation, RigidTransform.identity().rotation)


def test_mug_has_handle_outside_body():
    pts = sample_object(ObjectSpec("mug-composite", (0.03, 0.09, 0.025, 0.006))).points
    radial = np.hypot(pts[:, 0], pts[:, 1])
    assert np.count_nonzero(radial > 0.03 + 1e-6) > 20


def test_mesh_object_from_obj(tmp_path):
    from cograsp.geometry import box_mesh
    from cograsp.io import write_obj

    write_obj(tmp_path / "box.obj", box_mesh((0, 0, 0), (1.0, 1.0, 2.0)))
    spec = ObjectSpec("mesh", (0.05,), spacing=0.005, path=str(tmp_path / "box.obj"))
    pts = sample_object(spec).points
    assert np.allclose(np.abs(pts).max(axis=0), [0.025, 0.025, 0.05], atol=2e-3)
    assert np.all(np.abs(pts) <= [0.025, 0.025, 0.05] + np.array(1e-12))
    assert len(pts) == int(np.ceil(10 * 0.05**2 / 0.005**2))
    assert np.array_equal(sample_object(spec).points, pts)
    assert ObjectSpec.from_dict(spec.to_dict()).to_dict() == spec.to_dict()
    with pytest.raises(ValidationError):
        ObjectSpec("mesh", (1.0,))
