"""Run the full pipeline on a generated corpus: MCNN under each fusion mode
plus the three baselines on each feature block.

    python scripts/synthetic_experiment.py --out runs/synthetic --n-per-class 400 --folds 3
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from nepmcnn.cli import main as cli


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/synthetic")
    p.add_argument("--n-per-class", type=int, default=400)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--joint-epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    return p.parse_args()


def run(cmd: list[str]) -> None:
    code = cli(cmd)
    if code:
        raise SystemExit(code)


def main():
    args = parse_args()
    out = Path(args.out)
    run(["make-synthetic", str(out / "data"), "--n-per-class", str(args.n_per_class), "--seed", str(args.seed)])
    common = ["--dataset", str(out / "data" / "tweets.csv"), "--embeddings", str(out / "data" / "vectors.vec"),
              "--n-folds", str(args.folds), "--epochs", str(args.epochs), "--joint-epochs", str(args.joint_epochs),
              "--seed", str(args.seed), "--ratio", "0.7"]
    summary = {}
    for fusion in ("avg", "sum", "max"):
        # bundles depend only on training settings, so sum/max reuse the avg run's models
        run(["evaluate", *common, "--output", str(out / "run"), "--fusion", fusion])
        report = json.loads((out / "run" / "report.json").read_text())
        summary[f"mcnn_{fusion}"] = report["summary"]["accuracy"]["mean"]
    for kind in ("ft", "bow", "ds", "hybrid"):
        run(["compare-baselines", *common, "--output", str(out / "run"), "--features", kind])
        doc = json.loads((out / "run" / f"baselines_{kind}.json").read_text())
        for name, rep in doc["baselines"].items():
            summary[f"{name}_{kind}"] = rep["summary"]["accuracy"]["mean"]
    for name, acc in summary.items():
        print(f"{name:28s} {acc:.4f}")
    (out / "summary.json").write_text(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
