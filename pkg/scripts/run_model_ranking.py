"""Repeated ego-grouped k-fold CV of each tuned regressor family on a pipeline run.

Reads ``dataset.csv`` and ``metrics.json`` from a finished run (for example
``out/recovery/run`` from ``run_recovery.py``) and writes ``cv_ranking.csv``.
"""

import argparse
import csv
import json
import time
from pathlib import Path

from valuedyn.labeling import load_dataset
from valuedyn.regress import RegressorSpec, cross_validate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--run", default="out/recovery/run")
    ap.add_argument("--folds", type=int, default=10)
    ap.add_argument("--iterations", type=int, default=10)
    ap.add_argument("--max-train-samples", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    run = Path(args.run)
    d = load_dataset(run / "dataset.csv")
    metrics = json.loads((run / "metrics.json").read_text())
    rows = []
    for fam, fm in metrics["families"].items():
        spec = RegressorSpec.from_dict(fm["best_spec"])
        t = time.perf_counter()
        cv = cross_validate(d, spec, args.folds, args.iterations, args.seed, args.max_train_samples)
        rows.append((fam, cv.mean, min(cv.scores), max(cv.scores), time.perf_counter() - t))
    rows.sort(key=lambda r: r[1])
    with (run / "cv_ranking.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "family", "mean_mse", "min_fold_mse", "max_fold_mse"])
        for k, (fam, mean, lo, hi, _) in enumerate(rows, 1):
            w.writerow([k, fam, repr(mean), repr(lo), repr(hi)])
    for k, (fam, mean, lo, hi, secs) in enumerate(rows, 1):
        print(f"{k}. {fam:<10} mean MSE {mean:.3g}  (folds {lo:.2g}..{hi:.2g}, {secs:.1f}s)")


if __name__ == "__main__":
    main()
