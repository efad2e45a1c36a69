"""End-to-end runs: synthetic scenes, candidate generation, scoring, pruning.

Configuration is plain JSON::

    {
      "scene":    {"rng_seed": 0, "objects": [{"kind": "mug-composite",
                   "dimensions": [0.03, 0.09, 0.025, 0.006], "spacing": 0.005,
                   "pose": {"rotation": [9 floats, row-major], "translation": [3 floats]}}]},
      "gripper":  {"max_width": 0.085, ...},          # GripperParams fields
      "sampler":  {"max_candidates": 200, ...},       # SamplerConfig fields
      "hands":    {"n": 4, ...},                      # HandSynthConfig fields
      "pipeline": {"normals_k": 16, "voxel": null, "median_mode": "mean",
                   "min_fraction": null, "threads": 1}
    }

``datagen`` configs carry ``"scenes": [...]`` instead of ``"scene"``.
Every artifact is stamped with the hash of the effective configuration.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .candidates import HandSynthConfig, SamplerConfig, sample_robot_grasps, synthesize_hand_grasps
from .embodiment import GraspPose, GripperParams, HandGrasp, HandModel, default_hand_model, render_gripper
from .geometry import OBJECT, PointCloud, RigidTransform, estimate_normals, sample_box_surface, sample_mesh_surface
from .io import dump_json, read_obj, write_records_csv, write_table_csv
from .scoring import (
    ObjectThresholds,
    PruneResult,
    ScoreRecord,
    compute_thresholds,
    label_records,
    prune,
    score_all_pairs,
    sweep_thresholds,
    threshold_grid,
)
from .validation import ValidationError

SHAPE_KINDS = ("box", "cylinder", "sphere", "mug-composite", "l-handle", "mesh")
_DIM_COUNT = {"box": 3, "cylinder": 2, "sphere": 1, "mug-composite": 4, "l-handle": 3, "mesh": 1}


@dataclass(frozen=True)
class ObjectSpec:
    """One parametric object.

    ``dimensions`` by kind (meters):

    * box: ``[lx, ly, lz]``
    * cylinder: ``[radius, height]`` (axis along local z)
    * sphere: ``[radius]``
    * mug-composite: ``[radius, height, handle_radius, handle_tube_radius]``
    * l-handle: ``[grip_length, bar_thickness, head_length]``
    * mesh: ``[scale]``, surface-sampled from the OBJ file at ``path``
    """

    kind: str
    dimensions: tuple[float, ...]
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    spacing: float = 0.005
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValidationError(f"unknown shape kind {self.kind!r}")
        dims = tuple(float(d) for d in self.dimensions)
        if len(dims) != _DIM_COUNT[self.kind]:
            raise ValidationError(f"{self.kind} needs {_DIM_COUNT[self.kind]} dimensions, got {len(dims)}")
        if any(not d > 0 for d in dims) or not self.spacing > 0:
            raise ValidationError("dimensions and spacing must be positive")
        if (self.kind == "mesh") != (self.path is not None):
            raise ValidationError("'path' is required for mesh objects and only allowed for them")
        object.__setattr__(self, "dimensions", dims)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "dimensions": list(self.dimensions), "pose": self.pose.to_dict(), "spacing": self.spacing}
        if self.path is not None:
            d["path"] = self.path
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectSpec":
        pose = RigidTransform.from_dict(d["pose"]) if "pose" in d else RigidTransform.identity()
        return cls(d["kind"], tuple(d["dimensions"]), pose, float(d.get("spacing", 0.005)), d.get("path"))


@dataclass(frozen=True)
class SceneSpec:
    objects: tuple[ObjectSpec, ...]
    rng_seed: int = 0

    def __post_init__(self):
        if len(self.objects) == 0:
            raise ValidationError("a scene needs at least one object")
        object.__setattr__(self, "objects", tuple(self.objects))

    def to_dict(self) -> dict:
        return {"rng_seed": self.rng_seed, "objects": [o.to_dict() for o in self.objects]}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(tuple(ObjectSpec.from_dict(o) for o in d["objects"]), int(d.get("rng_seed", 0)))


def demo_scene(rng_seed: int = 0) -> SceneSpec:
    return SceneSpec((ObjectSpec("mug-composite", (0.03, 0.09, 0.025, 0.006)),), rng_seed)


# -- shape sampling ---------------------------------------------------------


def _sphere(r: float, s: float) -> np.ndarray:
    n = max(20, int(round(4 * math.pi * r * r / (s * s))))
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = math.pi * (1 + 5**0.5) * i
    u = np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return r * u


def _ring(radius: float, z: float, s: float) -> np.ndarray:
    k = max(3, int(math.ceil(2 * math.pi * radius / s)))
    t = 2 * math.pi * np.arange(k) / k
    return np.stack([radius * np.cos(t), radius * np.sin(t), np.full(k, z)], axis=1)


def _disk(radius: float, z: float, s: float) -> np.ndarray:
    parts = [np.array([[0.0, 0.0, z]])]
    n_rings = int(math.ceil(radius / s))
    for j in range(1, n_rings):
        parts.append(_ring(radius * j / n_rings, z, s))
    return np.concatenate(parts)


def _cylinder(r: float, h: float, s: float) -> np.ndarray:
    n_z = int(math.ceil(h / s)) + 1
    side = [_ring(r, z, s) for z in np.linspace(-h / 2, h / 2, n_z)]
    return np.concatenate(side + [_disk(r, -h / 2, s), _disk(r, h / 2, s)])


def _mug(r: float, h: float, rho: float, tube: float, s: float) -> np.ndarray:
    body = _cylinder(r, h, s)
    # half torus in the xz-plane, attached to the +x side of the body
    n_phi = int(math.ceil(math.pi * rho / s)) + 1
    n_psi = max(6, int(math.ceil(2 * math.pi * tube / s)))
    phi = np.linspace(-math.pi / 2, math.pi / 2, n_phi)
    psi = 2 * math.pi * np.arange(n_psi) / n_psi
    P, S = np.meshgrid(phi, psi, indexing="ij")
    ring_r = rho + tube * np.cos(S)
    handle = np.stack(
        [r + ring_r * np.cos(P), tube * np.sin(S), ring_r * np.sin(P)], axis=-1
    ).reshape(-1, 3)
    handle = handle[np.hypot(handle[:, 0], handle[:, 1]) > r]
    return np.concatenate([body, handle])


def _l_handle(length: float, t: float, head: float, s: float) -> np.ndarray:
    grip = sample_box_surface((0.0, 0.0, 0.0), (t, t, length), s)
    bar = sample_box_surface((head / 2 - t / 2, 0.0, length / 2 + t / 2), (head, t, t), s)
    return np.concatenate([grip, bar])


def sample_object(spec: ObjectSpec) -> PointCloud:
    d, s = spec.dimensions, spec.spacing
    if spec.kind == "sphere":
        pts = _sphere(d[0], s)
    elif spec.kind == "box":
        pts = sample_box_surface((0.0, 0.0, 0.0), d, s)
    elif spec.kind == "cylinder":
        pts = _cylinder(d[0], d[1], s)
    elif spec.kind == "mug-composite":
        pts = _mug(*d, s)
    elif spec.kind == "l-handle":
        pts = _l_handle(*d, s)
    else:
        pts = d[0] * sample_mesh_surface(read_obj(spec.path), s / d[0])
    return PointCloud.with_role(spec.pose.apply(pts), OBJECT)


def build_scene(spec: SceneSpec) -> list[PointCloud]:
    """Surface-sampled cloud per object, masked ``OBJECT``."""
    return [sample_object(o) for o in spec.objects]


def voxel_downsample(cloud: PointCloud, voxel: float = 0.005) -> PointCloud:
    """Keep the first point (in input order) that falls in each voxel."""
    if not voxel > 0:
        raise ValidationError("voxel size must be positive")
    keys = np.floor(cloud.points / voxel).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    keep = np.sort(first)
    return PointCloud(cloud.points[keep], None if cloud.mask is None else cloud.mask[keep])


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class PipelineOptions:
    normals_k: int = 16
    voxel: Optional[float] = None
    median_mode: str = "mean"
    min_fraction: Optional[float] = None
    threads: int = 1


def _from_fields(cls, d: Optional[dict]):
    d = dict(d or {})
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ValidationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**d)


@dataclass(frozen=True)
class PipelineConfig:
    scenes: tuple[SceneSpec, ...]
    gripper: GripperParams = GripperParams()
    sampler: SamplerConfig = SamplerConfig()
    hands: HandSynthConfig = HandSynthConfig()
    options: PipelineOptions = PipelineOptions()

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        unknown = set(d) - {"scenes", "scene", "gripper", "sampler", "hands", "pipeline"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "scenes" in d:
            scenes = tuple(SceneSpec.from_dict(s) for s in d["scenes"])
        elif "scene" in d:
            scenes = (SceneSpec.from_dict(d["scene"]),)
        else:
            scenes = (demo_scene(),)
        return cls(
            scenes,
            _from_fields(GripperParams, d.get("gripper")),
            _from_fields(SamplerConfig, d.get("sampler")),
            _from_fields(HandSynthConfig, d.get("hands")),
            _from_fields(PipelineOptions, d.get("pipeline")),
        )

    def to_dict(self) -> dict:
        return {
            "scenes": [s.to_dict() for s in self.scenes],
            "gripper": asdict(self.gripper),
            "sampler": asdict(self.sampler),
            "hands": asdict(self.hands),
            "pipeline": asdict(self.options),
        }

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(
            self,
            scenes=tuple(replace(s, rng_seed=seed) for s in self.scenes),
            sampler=replace(self.sampler, rng_seed=seed),
            hands=replace(self.hands, rng_seed=seed),
        )


def config_hash(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts]).generate_state(1, np.uint64)[0])


# -- running ----------------------------------------------------------------


@dataclass
class ObjectResult:
    object_index: int
    cloud: PointCloud
    grasps: list[GraspPose]
    gripper_clouds: list[PointCloud]
    hands: list[HandGrasp]
    records: list[ScoreRecord]
    thresholds: Optional[ObjectThresholds]
    prune: Optional[PruneResult]

    @property
    def pair_count(self) -> int:
        return len(self.records)

    @property
    def positive_count(self) -> int:
        return sum(1 for r in self.records if r.label == 1)


@dataclass
class RunReport:
    """Per-object summary plus mean/std (population) over accepted grasps' pairs."""

    objects: list[dict]
    aggregate: dict
    config_hash: str = ""

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "objects": self.objects, "aggregate": self.aggregate}


@dataclass
class PipelineResult:
    report: RunReport
    objects: list[ObjectResult]


def process_object(
    index: int,
    cloud: PointCloud,
    gripper: GripperParams,
    hand: HandModel,
    sampler_cfg: SamplerConfig,
    hand_cfg: HandSynthConfig,
    options: PipelineOptions = PipelineOptions(),
) -> ObjectResult:
    if options.voxel:
        cloud = voxel_downsample(cloud, options.voxel)
    normals = estimate_normals(cloud, min(options.normals_k, len(cloud)))
    grasps = sample_robot_grasps(cloud, normals, gripper, sampler_cfg)
    hands = synthesize_hand_grasps(cloud, hand, hand_cfg)
    gclouds = [render_gripper(gripper, g) for g in grasps]
    if not grasps:
        return ObjectResult(index, cloud, [], [], hands, [], None, None)
    records = score_all_pairs(list(zip(grasps, gclouds)), hands, threads=options.threads)
    th = compute_thresholds(records, options.median_mode)
    records = label_records(records, th)
    result = prune(records, len(grasps), len(hands), options.min_fraction)
    result.thresholds = th
    return ObjectResult(index, cloud, grasps, gclouds, hands, records, th, result)


def _stats(values: Sequence[float]) -> Optional[dict]:
    if len(values) == 0:
        return None
    v = np.asarray(values, dtype=np.float64)
    return {"mean": float(v.mean()), "std": float(v.std(ddof=0)), "count": int(v.size)}


def summarize(objects: Sequence[ObjectResult], digest: str = "") -> RunReport:
    per_object, pooled = [], {"s_a": [], "s_d": [], "s_n": []}
    for res in objects:
        accepted = set(res.prune.accepted_indices) if res.prune else set()
        for r in res.records:
            if r.robot_index in accepted:
                pooled["s_a"].append(r.s_a)
                pooled["s_d"].append(r.s_d)
                pooled["s_n"].append(r.s_n)
        per_object.append(
            {
                "object_index": res.object_index,
                "robot_candidates": len(res.grasps),
                "hand_grasps": len(res.hands),
                "pairs": res.pair_count,
                "positives": res.positive_count,
                "accepted": len(accepted),
                "thresholds": None if res.thresholds is None else res.thresholds.to_dict(),
            }
        )
    return RunReport(per_object, {k: _stats(v) for k, v in pooled.items()}, digest)


def _object_seeds(sampler_cfg, hand_cfg, scene_seed, index):
    return (
        replace(sampler_cfg, rng_seed=_derive_seed(sampler_cfg.rng_seed, scene_seed, index)),
        replace(hand_cfg, rng_seed=_derive_seed(hand_cfg.rng_seed, scene_seed, index, 1)),
    )


def write_object_artifacts(obj_dir: Path, res: ObjectResult, provenance: dict) -> None:
    obj_dir.mkdir(parents=True, exist_ok=True)
    write_records_csv(obj_dir / "records.csv", res.records)
    prune_payload = res.prune.to_dict() if res.prune else {
        "accepted": [], "rejected": [], "fractions": [], "thresholds": None,
    }
    prune_payload["provenance"] = provenance
    dump_json(obj_dir / "prune.json", prune_payload)
    dump_json(
        obj_dir / "candidates.json",
        {"robot": [g.to_dict() for g in res.grasps], "hands": [h.to_dict() for h in res.hands]},
    )


def run_pipeline(
    scene: SceneSpec,
    gripper: GripperParams = GripperParams(),
    hand: Optional[HandModel] = None,
    sampler_cfg: SamplerConfig = SamplerConfig(),
    hand_cfg: HandSynthConfig = HandSynthConfig(),
    options: PipelineOptions = PipelineOptions(),
    out_dir=None,
) -> PipelineResult:
    """Sample, score, label and prune every object of a scene.

    Objects without antipodal candidates get empty results. With ``out_dir``
    the artifacts land in ``out_dir/object_<i>/`` plus ``out_dir/report.json``.
    """
    hand = hand or default_hand_model()
    cfg = PipelineConfig((scene,), gripper, sampler_cfg, hand_cfg, options)
    digest = config_hash(cfg.to_dict())
    clouds = build_scene(scene)
    results = []
    for i, cloud in enumerate(clouds):
        s_cfg, h_cfg = _object_seeds(sampler_cfg, hand_cfg, scene.rng_seed, i)
        results.append(process_object(i, cloud, gripper, hand, s_cfg, h_cfg, options))
    report = summarize(results, digest)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for res in results:
            prov = {"config_hash": digest, "scene_seed": scene.rng_seed, "object_index": res.object_index}
            write_object_artifacts(out / f"object_{res.object_index}", res, prov)
        dump_json(out / "report.json", report.to_dict())
    return PipelineResult(report, results)


def generate_dataset(config: PipelineConfig, out_dir, split: Optional[float] = None, split_seed: int = 0) -> dict:
    """Write labeled pair records for every scene and a ``manifest.json``.

    With ``split`` (e.g. 0.8) all pairs are shuffled deterministically and
    ``round(split * total)`` of them are assigned to training; the assignment
    is written to ``split.csv``.
    """
    if split is not None and not 0 <= split <= 1:
        raise ValidationError("split must lie in [0, 1]")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config.to_dict())
    hand = default_hand_model()
    manifest = {"config_hash": digest, "scenes": [], "total_pairs": 0, "positives": 0, "negatives": 0}
    keys = []
    for k, scene in enumerate(config.scenes):
        run = run_pipeline(scene, config.gripper, hand, config.sampler, config.hands, config.options)
        scene_entry = {"index": k, "rng_seed": scene.rng_seed, "config_hash": run.report.config_hash, "objects": []}
        for res in run.objects:
            prov = {"config_hash": run.report.config_hash, "scene_seed": scene.rng_seed, "object_index": res.object_index}
            write_object_artifacts(out / f"scene_{k}" / f"object_{res.object_index}", res, prov)
            pos = res.positive_count
            scene_entry["objects"].append(
                {"index": res.object_index, "m": len(res.grasps), "n": len(res.hands),
                 "pairs": res.pair_count, "positives": pos, "negatives": res.pair_count - pos}
            )
            manifest["total_pairs"] += res.pair_count
            manifest["positives"] += pos
            manifest["negatives"] += res.pair_count - pos
            keys += [(k, res.object_index, r.robot_index, r.hand_index) for r in res.records]
        manifest["scenes"].append(scene_entry)
    if split is not None:
        total = len(keys)
        n_train = int(math.floor(split * total + 0.5))
        order = np.random.default_rng(split_seed).permutation(total)
        is_train = np.zeros(total, dtype=bool)
        is_train[order[:n_train]] = True
        rows = [(*key, "train" if t else "val") for key, t in zip(keys, is_train)]
        write_table_csv(out / "split.csv", ("scene", "object", "robot_index", "hand_index", "split"), rows)
        manifest["split"] = {"fraction": split, "seed": split_seed, "train": n_train, "validation": total - n_train}
    dump_json(out / "manifest.json", manifest)
    return manifest


def ablation_report(
    records: Sequence[ScoreRecord],
    grids: Optional[dict] = None,
    steps: int = 20,
    median_mode: str = "mean",
) -> dict:
    """Positive counts while sweeping each threshold with the other at its median.

    ``grids`` maps ``"distance"``/``"angle"`` to explicit threshold lists;
    missing axes get ``steps`` points spanning the observed score range.
    """
    if len(records) == 0:
        raise ValidationError("ablation needs scored records")
    grids = dict(grids or {})
    grids.setdefault("distance", threshold_grid([r.s_d for r in records], steps))
    grids.setdefault("angle", threshold_grid([r.s_a for r in records], steps))
    return {axis: sweep_thresholds(records, axis, grids[axis], median_mode) for axis in ("distance", "angle")}


def write_ablation(out_dir, tables: dict) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for axis, rows in tables.items():
        p = out / f"sweep_{axis}.csv"
        write_table_csv(p, ("threshold", "positive_count"), rows)
        paths.append(p)
    return paths
