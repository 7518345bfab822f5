"""Batch command-line front door.

Exit codes: 0 success, 1 user error (bad inputs, domain failures), 2
internal error. Diagnostics go to stderr; data output (and --json
line-delimited records) go to stdout, so pipelines can consume results.
Primary outputs are written atomically (temp file + rename).

Heavy numeric imports happen inside the command handlers so that --threads
can cap the BLAS pools before numpy is loaded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


class UserError(Exception):
    pass


def _read_file(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise UserError(f"no such file: {path}")
    return p.read_bytes()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxscore",
        description="Voxel-based assembly-automation capability scoring.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap numeric worker threads (set before numpy loads)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("voxelize", help="mesh file -> solid binvox")
    p.add_argument("--in", dest="infile", required=True, help="STL or OBJ file")
    p.add_argument("--res", type=int, default=64, help="grid resolution (4..1024)")
    p.add_argument("--out", required=True, help="output .binvox path")
    p.add_argument("--format", choices=("auto", "stl", "obj"), default="auto")

    p = sub.add_parser("augment", help="binvox -> rotated/scaled invariants")
    p.add_argument("--in", dest="infile", required=True, help="input .binvox")
    p.add_argument("--plan", help="JSON plan file (orientations, scale_factors)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("ingest", help="add mesh files to a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--format", choices=("auto", "stl", "obj"), default="auto")
    p.add_argument("files", nargs="+", help="mesh files")

    p = sub.add_parser("annotate", help="record an expert answer")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--score", type=int, required=True)
    p.add_argument("--annotator", default="cli")

    p = sub.add_parser("split", help="assign train/eval split")
    p.add_argument("--data", required=True)
    p.add_argument("--eval-count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen-shapes", help="populate a synthetic rule-labeled dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--res", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--questions", default="separability")

    p = sub.add_parser("train", help="train a question's network")
    p.add_argument("--data", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--config", help="JSON training config file")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--res", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--augment", action="store_true", default=None)
    p.add_argument("--json", action="store_true", help="line-delimited records on stdout")

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on the eval split")
    p.add_argument("--data", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--checkpoint", help="defaults to the dataset's checkpoint")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("assess", help="score one mesh file with a trained net")
    p.add_argument("--data", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=("auto", "stl", "obj"), default="auto")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("serve", help="run the annotation/assessment service")
    p.add_argument("--config", help="JSON service config")
    p.add_argument("--data")
    p.add_argument("--port", type=int)
    p.add_argument("--host")

    return parser


def cmd_voxelize(args) -> int:
    from .dataset import atomic_write_bytes, load_mesh
    from .voxel import voxelize, write_binvox

    mesh = load_mesh(_read_file(args.infile), args.format)
    grid = voxelize(mesh, args.res)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(out, write_binvox(grid))
    print(f"{out}", file=sys.stderr)
    return 0


def cmd_augment(args) -> int:
    from .augment import AugmentationPlan, generate_invariants
    from .dataset import atomic_write_bytes
    from .voxel import read_binvox, write_binvox

    grid = read_binvox(_read_file(args.infile))
    if args.plan:
        plan = AugmentationPlan.from_json_dict(json.loads(_read_file(args.plan)))
    else:
        plan = AugmentationPlan()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.infile).stem
    count = 0
    invariants = generate_invariants(grid, plan)
    for i, o in enumerate(plan.orientations):
        for j in range(len(plan.scale_factors)):
            inv = invariants[i * len(plan.scale_factors) + j]
            name = f"{stem}_o{o.index:02d}_s{j}.binvox"
            atomic_write_bytes(out_dir / name, write_binvox(inv))
            count += 1
    print(f"wrote {count} invariants to {out_dir}", file=sys.stderr)
    return 0


def cmd_ingest(args) -> int:
    from .dataset import DatasetManifest

    manifest = DatasetManifest.open(args.data)
    for path in args.files:
        model_id = manifest.ingest_model(_read_file(path), args.format, args.res)
        print(json.dumps({"file": path, "model_id": model_id}))
    return 0


def cmd_annotate(args) -> int:
    from .dataset import DatasetManifest

    manifest = DatasetManifest.open(args.data)
    ann_id = manifest.record_annotation(
        args.model, args.question, args.score, args.annotator
    )
    print(json.dumps({"annotation_id": ann_id}))
    return 0


def cmd_split(args) -> int:
    from .dataset import DatasetManifest

    manifest = DatasetManifest.open(args.data)
    manifest.assign_split(args.eval_count, args.seed)
    counts = {
        "train": len(manifest.split_ids("train")),
        "eval": len(manifest.split_ids("eval")),
    }
    print(json.dumps(counts))
    return 0


def cmd_gen_shapes(args) -> int:
    from .dataset import DatasetManifest
    from .trainer import populate_synthetic

    manifest = DatasetManifest.open(args.data)
    questions = tuple(q for q in args.questions.split(",") if q)
    if not questions:
        raise UserError("at least one question id required")
    ids = populate_synthetic(
        manifest, args.count, resolution=args.res, seed=args.seed,
        question_ids=questions,
    )
    print(json.dumps({"models": len(ids)}))
    return 0


def cmd_train(args) -> int:
    from .dataset import DatasetManifest
    from .trainer import TrainingConfig, train

    manifest = DatasetManifest.open(args.data)
    base = {}
    if args.config:
        base = json.loads(_read_file(args.config))
    base["question_id"] = args.question
    overrides = {
        "learning_rate": args.lr,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "seed": args.seed,
        "resolution": args.res,
        "max_steps": args.max_steps,
        "augment": args.augment,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    config = TrainingConfig(**base)
    result = train(manifest, config)
    if args.json:
        for point in result.history:
            print(json.dumps({"record": "epoch", **point.__dict__}, sort_keys=True))
        print(json.dumps({"record": "checkpoint", "path": str(result.checkpoint_path)}))
    else:
        last = result.history[-1]
        print(
            f"trained {config.question_id}: {result.steps} steps, "
            f"final cost {last.mean_cost:.6f}, exact accuracy "
            f"{last.exact_accuracy:.1%} -> {result.checkpoint_path}",
            file=sys.stderr,
        )
    return 0


def cmd_evaluate(args) -> int:
    from .dataset import DatasetManifest
    from .net import load_checkpoint
    from .trainer import TrainingConfig, confidence_regression, evaluate

    manifest = DatasetManifest.open(args.data)
    ckpt = Path(args.checkpoint) if args.checkpoint else (
        manifest.root / "checkpoints" / f"{args.question}.ckpt"
    )
    if not ckpt.is_file():
        raise UserError(f"no checkpoint at {ckpt}")
    arch, params = load_checkpoint(ckpt.read_bytes())
    config = TrainingConfig(question_id=args.question, resolution=arch.input_shape[0])
    report = evaluate(manifest, config, arch, params)
    regression = confidence_regression(report) if len(report.rows) >= 3 else None
    out_path = manifest.root / "reports" / f"eval_{args.question}.jsonl"
    out_path.write_text(report.to_jsonl())
    if args.json:
        sys.stdout.write(report.to_jsonl())
        if regression:
            print(json.dumps({"record": "confidence", **regression.__dict__}, sort_keys=True))
    else:
        print(report.summary_table())
        if regression:
            print(
                f"confidence regression: error ~= {regression.slope:.3f}*|peak-1| "
                f"+ {regression.intercept:.3f}  (R^2 {regression.r_squared:.1%})"
            )
    return 0


def cmd_assess(args) -> int:
    from .net import load_checkpoint
    from .trainer import assess

    ckpt = Path(args.data) / "checkpoints" / f"{args.question}.ckpt"
    if not ckpt.is_file():
        raise UserError(f"no checkpoint at {ckpt}")
    arch, params = load_checkpoint(ckpt.read_bytes())
    result = assess(arch, params, _read_file(args.infile), args.format)
    payload = {
        "score": result.score,
        "peak_height": result.peak_height,
        "curve": list(result.curve),
        "tolerance_band": list(result.tolerance_band),
    }
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        lo, hi = result.tolerance_band
        print(
            f"score {result.score}/10 (band {lo}..{hi}), "
            f"peak height {result.peak_height:.3f}"
        )
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    config = ServiceConfig.load(args.config)
    if args.data:
        config.data_dir = Path(args.data)
    if args.port:
        config.port = args.port
    if args.host:
        config.host = args.host
    serve(config)
    return 0


_COMMANDS = {
    "voxelize": cmd_voxelize,
    "augment": cmd_augment,
    "ingest": cmd_ingest,
    "annotate": cmd_annotate,
    "split": cmd_split,
    "gen-shapes": cmd_gen_shapes,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "assess": cmd_assess,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))
    try:
        return _COMMANDS[args.command](args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # internal failure contract
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
