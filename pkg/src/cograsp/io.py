"""Readers and writers for clouds, meshes, grasp sets and score records.

Point clouds: ASCII PLY (``vertex`` element with ``x y z`` and an optional
``mask`` property) or CSV rows ``x,y,z[,mask]``. Meshes: ASCII OBJ with ``v``
and ``f`` records. Grasp sets and prune results are JSON; score records are
CSV or JSON.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .embodiment import GraspPose, HandGrasp, HandModel, hand_grasp_from_dict
from .geometry import PointCloud, TriangleMesh
from .scoring import ScoreRecord
from .validation import ValidationError

RECORD_FIELDS = ("robot_index", "hand_index", "s_d", "s_a", "s_n", "overlap", "label")


def _fmt(x: float, digits: int) -> str:
    return f"{x:.{digits}g}"


# -- point clouds -----------------------------------------------------------


def write_ply(path, cloud: PointCloud) -> None:
    lines = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}"]
    lines += ["property float x", "property float y", "property float z"]
    if cloud.mask is not None:
        lines.append("property int mask")
    lines.append("end_header")
    for k, p in enumerate(cloud.points):
        row = " ".join(repr(float(c)) for c in p)
        if cloud.mask is not None:
            row += f" {int(cloud.mask[k])}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def read_ply(path) -> PointCloud:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "ply":
        raise ValidationError(f"{path}: not a PLY file")
    n_vertex, props, in_vertex, body_start = None, [], False, None
    for k, line in enumerate(text[1:], start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format" and parts[1] != "ascii":
            raise ValidationError(f"{path}: only ASCII PLY is supported")
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                n_vertex = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            props.append(parts[-1])
        elif parts[0] == "end_header":
            body_start = k + 1
            break
    if n_vertex is None or body_start is None:
        raise ValidationError(f"{path}: malformed PLY header")
    for axis in "xyz":
        if axis not in props:
            raise ValidationError(f"{path}: vertex element lacks property {axis}")
    rows = [line.split() for line in text[body_start : body_start + n_vertex]]
    if len(rows) != n_vertex:
        raise ValidationError(f"{path}: expected {n_vertex} vertices, found {len(rows)}")
    data = np.array(rows, dtype=np.float64).reshape(n_vertex, len(props))
    pts = data[:, [props.index(a) for a in "xyz"]]
    mask = data[:, props.index("mask")].astype(np.int8) if "mask" in props else None
    return PointCloud(pts, mask)


def write_cloud_csv(path, cloud: PointCloud) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for k, p in enumerate(cloud.points):
            row = [repr(float(c)) for c in p]
            if cloud.mask is not None:
                row.append(int(cloud.mask[k]))
            w.writerow(row)


def read_cloud_csv(path) -> PointCloud:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    widths = {len(r) for r in rows}
    if not rows or not widths <= {3, 4} or len(widths) != 1:
        raise ValidationError(f"{path}: expected rows of x,y,z[,mask]")
    data = np.array(rows, dtype=np.float64)
    mask = data[:, 3].astype(np.int8) if data.shape[1] == 4 else None
    return PointCloud(data[:, :3], mask)


def read_cloud(path) -> PointCloud:
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        return read_ply(path)
    if suffix in (".csv", ".txt"):
        return read_cloud_csv(path)
    raise ValidationError(f"unsupported point cloud format {suffix!r}")


def write_cloud(path, cloud: PointCloud) -> None:
    if Path(path).suffix.lower() == ".ply":
        write_ply(path, cloud)
    else:
        write_cloud_csv(path, cloud)


# -- meshes -----------------------------------------------------------------


def write_obj(path, mesh: TriangleMesh) -> None:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path) -> TriangleMesh:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            # fan-triangulate polygons
            faces += [[idx[0], idx[k], idx[k + 1]] for k in range(1, len(idx) - 1)]
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64).reshape(-1, 3))


# -- grasps -----------------------------------------------------------------


def dump_json(path, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)


def load_json(path):
    return json.loads(Path(path).read_text())


def write_robot_grasps(path, grasps: Sequence[GraspPose]) -> None:
    dump_json(path, [g.to_dict() for g in grasps])


def read_robot_grasps(path) -> list[GraspPose]:
    data = load_json(path)
    if not isinstance(data, list):
        raise ValidationError(f"{path}: expected a JSON array of grasps")
    return [GraspPose.from_dict(d) for d in data]


def write_hand_grasps(path, grasps: Sequence[HandGrasp]) -> None:
    dump_json(path, [h.to_dict() for h in grasps])


def read_hand_grasps(path, model: HandModel) -> list[HandGrasp]:
    data = load_json(path)
    if not isinstance(data, list):
        raise ValidationError(f"{path}: expected a JSON array of hand grasps")
    return [hand_grasp_from_dict(d, model) for d in data]


# -- score records ----------------------------------------------------------


def record_to_dict(r: ScoreRecord) -> dict:
    return {
        "robot_index": r.robot_index,
        "hand_index": r.hand_index,
        "s_d": r.s_d,
        "s_a": r.s_a,
        "s_n": r.s_n,
        "overlap": r.hulls_overlap,
        "label": r.label,
    }


def record_from_dict(d: dict) -> ScoreRecord:
    label = d.get("label")
    return ScoreRecord(
        int(d["robot_index"]),
        int(d["hand_index"]),
        float(d["s_d"]),
        float(d["s_a"]),
        float(d["s_n"]),
        bool(d["overlap"]),
        None if label is None else int(label),
    )


def write_records_csv(path, records: Sequence[ScoreRecord], digits: int = 17) -> None:
    """Write one row per pair; the label column is empty for unlabeled records."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow(
                [
                    r.robot_index,
                    r.hand_index,
                    _fmt(r.s_d, digits),
                    _fmt(r.s_a, digits),
                    _fmt(r.s_n, digits),
                    int(r.hulls_overlap),
                    "" if r.label is None else r.label,
                ]
            )


def read_records_csv(path) -> list[ScoreRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RECORD_FIELDS:
            raise ValidationError(f"{path}: header must be {','.join(RECORD_FIELDS)}")
        out = []
        for row in reader:
            row["overlap"] = row["overlap"] not in ("0", "False", "false", "")
            row["label"] = None if row["label"] == "" else int(row["label"])
            out.append(record_from_dict(row))
    return out


def write_records_json(path, records: Sequence[ScoreRecord]) -> None:
    dump_json(path, [record_to_dict(r) for r in records])


def read_records_json(path) -> list[ScoreRecord]:
    return [record_from_dict(d) for d in load_json(path)]


def read_records(path) -> list[ScoreRecord]:
    if Path(path).suffix.lower() == ".json":
        return read_records_json(path)
    return read_records_csv(path)


def write_table_csv(path, header: Sequence[str], rows, digits: int = 9) -> None:
    """Plot-oriented table: floats rounded to ``digits`` significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x, digits) if isinstance(x, float) else x for x in row])
