"""Command-line entry point: ``cograsp <subcommand> ...``.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error. Diagnostics go
to stderr; ``--out -`` sends machine-readable output to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .candidates import sample_robot_grasps, synthesize_hand_grasps
from .embodiment import default_hand_model, render_gripper
from .geometry import PointCloud, estimate_normals
from .pipeline import (
    ObjectSpec,
    PipelineConfig,
    ablation_report,
    config_hash,
    generate_dataset,
    run_pipeline,
    sample_object,
    voxel_downsample,
    write_ablation,
)
from .scoring import (
    ObjectThresholds,
    PruneResult,
    compute_thresholds,
    label_records,
    prune,
    score_all_pairs,
    sweep_thresholds,
    threshold_grid,
)
from .validation import CoGraspError

log = logging.getLogger("cograsp")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config overriding built-in defaults")
    p.add_argument("--seed", type=int, help="global seed (default: $COGRASP_SEED or config)")
    p.add_argument("--threads", type=int, default=None, help="worker cap, 0 = auto")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="cograsp", description="Human-aware robot grasp compatibility tools")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", parents=[common], help="antipodal robot grasp candidates")
    p.add_argument("--object", required=True)
    p.add_argument("--m", type=int, help="maximum number of candidates")
    p.add_argument("--out", required=True)

    p = sub.add_parser("hands", parents=[common], help="synthetic hand grasp placements")
    p.add_argument("--object", required=True)
    p.add_argument("--n", type=int, help="number of hand grasps")
    p.add_argument("--out", required=True)

    p = sub.add_parser("score", parents=[common], help="score all robot x hand pairs")
    p.add_argument("--robot", required=True)
    p.add_argument("--hands", required=True)
    p.add_argument("--object", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("thresholds", parents=[common], help="per-object median thresholds")
    p.add_argument("--records", required=True)
    p.add_argument("--median", choices=["mean", "lower"], default=None)
    p.add_argument("--out", default="-")

    p = sub.add_parser("label", parents=[common], help="label records against thresholds")
    p.add_argument("--records", required=True)
    p.add_argument("--thresholds", help="thresholds JSON (default: medians of the records)")
    p.add_argument("--median", choices=["mean", "lower"], default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("prune", parents=[common], help="select compatible robot grasps")
    p.add_argument("--records", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--min-fraction", type=float, default=None)
    p.add_argument("--median", choices=["mean", "lower"], default=None)
    p.add_argument("--out", default="-")

    p = sub.add_parser("sweep", parents=[common], help="threshold ablation sweep")
    p.add_argument("--records", required=True)
    p.add_argument("--axis", choices=["distance", "angle"], required=True)
    p.add_argument("--grid-steps", type=int, default=20)
    p.add_argument("--median", choices=["mean", "lower"], default=None)
    p.add_argument("--out", default="-")

    p = sub.add_parser("run", parents=[common], help="full pipeline on one scene")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("datagen", parents=[common], help="labeled dataset over many scenes")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", type=float, default=None, help="training fraction, e.g. 0.8")

    p = sub.add_parser("export", parents=[common], help="re-export records or render an overlay")
    p.add_argument("--records", help="records CSV/JSON")
    p.add_argument("--prune", help="prune JSON (picks the overlay pair)")
    p.add_argument("--format", required=True)
    p.add_argument("--robot")
    p.add_argument("--hands")
    p.add_argument("--object")
    p.add_argument("--pair", help="robot,hand indices for ply-overlay")
    p.add_argument("--out", required=True)
    return parser


def _load_config(args) -> PipelineConfig:
    raw = io.load_json(args.config) if args.config else {}
    cfg = PipelineConfig.from_dict(raw)
    seed = args.seed
    if seed is None and os.environ.get("COGRASP_SEED"):
        try:
            seed = int(os.environ["COGRASP_SEED"])
        except ValueError as exc:
            raise CoGraspError(f"COGRASP_SEED must be an integer: {exc}") from exc
    if seed is not None:
        cfg = cfg.with_seed(seed)
    if args.threads is not None:
        cfg = replace(cfg, options=replace(cfg.options, threads=args.threads))
    if args.verbose:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True), file=sys.stderr)
    return cfg


def _median_mode(args, cfg) -> str:
    return args.median or cfg.options.median_mode


def _object_cloud(path, cfg) -> PointCloud:
    if Path(path).suffix.lower() == ".obj":
        cloud = sample_object(ObjectSpec("mesh", (1.0,), path=str(path)))
    else:
        cloud = io.read_cloud(path)
    return voxel_downsample(cloud, cfg.options.voxel) if cfg.options.voxel else cloud


def _write_records(path, records) -> None:
    if path == "-":
        io.dump_json(None, [io.record_to_dict(r) for r in records])
    elif Path(path).suffix.lower() == ".json":
        io.write_records_json(path, records)
    else:
        io.write_records_csv(path, records)


def cmd_sample(args, cfg):
    sampler = cfg.sampler if args.m is None else replace(cfg.sampler, max_candidates=args.m)
    cloud = _object_cloud(args.object, cfg)
    normals = estimate_normals(cloud, min(cfg.options.normals_k, len(cloud)))
    grasps = sample_robot_grasps(cloud, normals, cfg.gripper, sampler)
    log.info("sampled %d grasps", len(grasps))
    io.write_robot_grasps(args.out, grasps)


def cmd_hands(args, cfg):
    hand_cfg = cfg.hands if args.n is None else replace(cfg.hands, n=args.n)
    hands = synthesize_hand_grasps(_object_cloud(args.object, cfg), default_hand_model(), hand_cfg)
    io.write_hand_grasps(args.out, hands)


def cmd_score(args, cfg):
    _object_cloud(args.object, cfg)
    grasps = io.read_robot_grasps(args.robot)
    hands = io.read_hand_grasps(args.hands, default_hand_model())
    robot = [(g, render_gripper(cfg.gripper, g)) for g in grasps]
    records = score_all_pairs(robot, hands, threads=cfg.options.threads)
    _write_records(args.out, records)


def cmd_thresholds(args, cfg):
    th = compute_thresholds(io.read_records(args.records), _median_mode(args, cfg))
    io.dump_json(None if args.out == "-" else args.out, th.to_dict())


def cmd_label(args, cfg):
    records = io.read_records(args.records)
    if args.thresholds:
        d = io.load_json(args.thresholds)
        th = ObjectThresholds(float(d["lambda_d"]), float(d["lambda_a"]))
    else:
        th = compute_thresholds(records, _median_mode(args, cfg))
    _write_records(args.out, label_records(records, th))


def cmd_prune(args, cfg):
    records = io.read_records(args.records)
    th = None
    if any(r.label is None for r in records):
        th = compute_thresholds(records, _median_mode(args, cfg))
        records = label_records(records, th)
    result = prune(records, args.m, args.n, args.min_fraction)
    result.thresholds = th
    result.provenance = {"config_hash": config_hash(cfg.to_dict()), "records": str(args.records)}
    io.dump_json(None if args.out == "-" else args.out, result.to_dict())


def cmd_sweep(args, cfg):
    records = io.read_records(args.records)
    values = [r.s_d for r in records] if args.axis == "distance" else [r.s_a for r in records]
    grid = threshold_grid(values, args.grid_steps)
    rows = sweep_thresholds(records, args.axis, grid, _median_mode(args, cfg))
    if args.out == "-":
        for t, c in rows:
            print(f"{t:.9g},{c}")
    else:
        io.write_table_csv(args.out, ("threshold", "positive_count"), rows)


def cmd_run(args, cfg):
    scene = cfg.scenes[0]
    result = run_pipeline(scene, cfg.gripper, None, cfg.sampler, cfg.hands, cfg.options, out_dir=args.out_dir)
    records = [r for o in result.objects for r in o.records]
    if records:
        write_ablation(args.out_dir, ablation_report(result.objects[0].records, median_mode=cfg.options.median_mode))
    log.info("pipeline finished: %d pair records", len(records))


def cmd_datagen(args, cfg):
    manifest = generate_dataset(cfg, args.out_dir, split=args.split, split_seed=cfg.sampler.rng_seed)
    log.info("dataset written: %d pairs", manifest["total_pairs"])


def _parse_pair(text: str) -> tuple[int, int]:
    try:
        r, h = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise CoGraspError(f"--pair must look like ROBOT,HAND, got {text!r}") from exc
    return r, h


def cmd_export(args, cfg):
    fmt = args.format
    if fmt in ("csv", "json"):
        if args.records:
            records = io.read_records(args.records)
            if fmt == "csv":
                io.write_records_csv(args.out, records)
            else:
                io.write_records_json(args.out, records)
        elif args.prune and fmt == "json":
            io.dump_json(args.out, PruneResult.from_dict(io.load_json(args.prune)).to_dict())
        elif args.prune:
            result = PruneResult.from_dict(io.load_json(args.prune))
            rows = [(i, float(result.fractions[i]), int(i in set(result.accepted_indices))) for i in range(len(result.fractions))]
            io.write_table_csv(args.out, ("robot_index", "fraction", "accepted"), rows)
        else:
            raise CoGraspError("export needs --records or --prune")
        return
    if fmt != "ply-overlay":
        raise CoGraspError(f"unknown export format {fmt!r}")
    if not (args.robot and args.hands and args.object):
        raise CoGraspError("ply-overlay needs --robot, --hands and --object")
    if args.pair:
        r_idx, h_idx = _parse_pair(args.pair)
    elif args.prune:
        accepted = PruneResult.from_dict(io.load_json(args.prune)).accepted_indices
        if not accepted:
            raise CoGraspError("prune result has no accepted grasp to overlay")
        r_idx, h_idx = accepted[0], 0
    else:
        raise CoGraspError("ply-overlay needs --pair or --prune")
    grasps = io.read_robot_grasps(args.robot)
    hands = io.read_hand_grasps(args.hands, default_hand_model())
    if not (0 <= r_idx < len(grasps) and 0 <= h_idx < len(hands)):
        raise CoGraspError(f"pair ({r_idx}, {h_idx}) out of range")
    obj = _object_cloud(args.object, cfg)
    parts = [
        render_gripper(cfg.gripper, grasps[r_idx]),
        PointCloud.with_role(obj.points, 0),
        hands[h_idx].cloud,
    ]
    io.write_ply(args.out, PointCloud(np.concatenate([p.points for p in parts]), np.concatenate([p.mask for p in parts])))


COMMANDS = {
    "sample": cmd_sample,
    "hands": cmd_hands,
    "score": cmd_score,
    "thresholds": cmd_thresholds,
    "label": cmd_label,
    "prune": cmd_prune,
    "sweep": cmd_sweep,
    "run": cmd_run,
    "datagen": cmd_datagen,
    "export": cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _load_config(args)
        COMMANDS[args.command](args, cfg)
    except (CoGraspError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"cograsp {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cograsp {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
