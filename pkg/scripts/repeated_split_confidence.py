#!/usr/bin/env python3
"""Repeated-split confidence study.

Trains from scratch several times, each time holding out a different random
evaluation split, accumulates the (peak-height divergence, error fraction)
pairs across all folds, and fits the pooled confidence regression. Seven
folds of 20 eval models give the 140-model accumulated evaluation the
confidence analysis is designed around.

Usage:
    python scripts/repeated_split_confidence.py --data DIR [--folds 7]
        [--question separability] [--seed 0] [--epochs 12] [--lr 2e-4]

The dataset directory must already hold annotated models (for a synthetic
one: `voxscore gen-shapes --data DIR --count 200 --res 16`).
"""

import argparse
import json
import sys

from voxscore.dataset import DatasetManifest
from voxscore.labels import SCALE_STEPS
from voxscore.trainer import TrainingConfig, evaluate, fit_confidence_pairs, train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", required=True)
    parser.add_argument("--question", default="separability")
    parser.add_argument("--folds", type=int, default=7)
    parser.add_argument("--eval-count", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=12)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--lr", type=float, default=2e-4)
    parser.add_argument("--res", type=int, default=16)
    args = parser.parse_args(argv)

    manifest = DatasetManifest.open(args.data)
    pairs = []
    for fold in range(args.folds):
        manifest.assign_split(args.eval_count, seed=args.seed + fold)
        config = TrainingConfig(
            question_id=args.question,
            learning_rate=args.lr,
            epochs=args.epochs,
            batch_size=args.batch_size,
            seed=args.seed + fold,
            resolution=args.res,
        )
        result = train(manifest, config)
        report = evaluate(manifest, config, result.arch, result.params)
        fold_pairs = [
            (abs(r.peak_height - 1.0), abs(r.predicted - r.expected) / SCALE_STEPS)
            for r in report.rows
        ]
        pairs.extend(fold_pairs)
        print(
            f"fold {fold}: eval acc@2 {report.accuracy_2step:.1%}, "
            f"max err {report.max_error_steps} steps",
            file=sys.stderr,
        )

    regression = fit_confidence_pairs(pairs)
    print(
        json.dumps(
            {
                "folds": args.folds,
                "samples": regression.sample_count,
                "slope": regression.slope,
                "intercept": regression.intercept,
                "r_squared": regression.r_squared,
                "degenerate_abscissa": regression.degenerate_abscissa,
            },
            sort_keys=True,
        )
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
