"""Run the replicate study and print WAIC totals per scenario and clustering.

    python3 scripts/run_study.py --config configs/study.yaml --out runs/study
"""
import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

from cilm.cli import main as cli


def waic_table(path):
    table = defaultdict(dict)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            table[(row["scenario"], row["clustering"])][row["model"]] = float(row["waic_total"])
    models = sorted({m for v in table.values() for m in v})
    print("scenario  clustering  " + "  ".join(f"{m:>12}" for m in models))
    for (sc, cl), vals in sorted(table.items()):
        cells = "  ".join(f"{vals[m]:12.2f}" if m in vals else " " * 12 for m in models)
        print(f"{sc:<9} {cl:<11} {cells}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/study.yaml")
    ap.add_argument("--out", default="runs/study")
    ap.add_argument("--workers", default="1")
    args = ap.parse_args()
    rc = cli(["replicate-study", "--config", args.config, "--out", args.out,
              "--workers", args.workers])
    if rc == 0:
        waic_table(Path(args.out) / "study_waic.csv")
    sys.exit(rc)
