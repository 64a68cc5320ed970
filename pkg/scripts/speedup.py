"""Composite vs full timing over K, likelihood and MCMC.

    python3 scripts/speedup.py --workers 2 --iters 400
"""
import argparse
import csv
import sys
import tempfile
from pathlib import Path

import yaml

from cilm.cli import main as cli

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--k", type=int, nargs="+", default=[1, 2, 5, 10])
    ap.add_argument("--iters", type=int, default=400)
    ap.add_argument("--workers", default="2")
    ap.add_argument("--seed", default="2024")
    ap.add_argument("--out", default="runs/bench")
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "bench.yaml"
        cfg.write_text(yaml.safe_dump({"bench": {"n": args.n, "k_values": args.k,
                                                 "mcmc_iters": args.iters}}))
        rc = cli(["bench", "--config", str(cfg), "--seed", args.seed, "--workers", args.workers,
                  "--out", args.out])
    if rc:
        sys.exit(rc)
    with open(Path(args.out) / "bench.csv", newline="") as fh:
        for r in csv.DictReader(fh):
            line = f"K={r['K']:>3}  loglik ratio {float(r['loglik_ratio']):.3f}"
            if "mcmc_ratio" in r:
                line += (f"  MCMC {float(r['mcmc_composite_s']):.2f}s / "
                         f"{float(r['mcmc_full_s']):.2f}s = {float(r['mcmc_ratio']):.3f}")
            print(line + f"  (workers={r['workers']})")
