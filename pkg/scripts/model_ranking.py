"""WAIC of M2, M3 and M4 on low-variance clustered populations with DPMM clusters.

Prints one line per replicate and how often M2 has the lowest WAIC.

    python3 scripts/model_ranking.py --scenario low3 --replicates 10
"""
import argparse

import numpy as np

from cilm.core import pairwise_distances
from cilm.study import (cluster_population, derive_rng, derive_seed, fit_and_score, model_for,
                        simulate_replicate)

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default="low3")
    ap.add_argument("--replicates", type=int, default=10)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--models", nargs="+", default=["m2", "m3", "m4"])
    ap.add_argument("--spatial", action="store_true", help="spatial-only DPMM")
    args = ap.parse_args()
    best = []
    for r in range(args.replicates):
        rep = simulate_replicate(args.scenario, r, args.seed)
        clusters = cluster_population(rep.pop, rep.record, "dpmm", derive_rng(args.seed, 9, r),
                                      spatial_only=args.spatial, iters=args.iters)
        dist = pairwise_distances(rep.pop)
        w = {m: fit_and_score(rep.record, rep.pop, model_for(m, clusters),
                              derive_seed(args.seed, r, 5), args.iters, n_sims=0,
                              dist=dist)["waic"] for m in args.models}
        best.append(min(w, key=w.get))
        print(f"replicate {r}: K={clusters.K}  " + "  ".join(f"{m} {v:.2f}" for m, v in w.items()))
    for m in args.models:
        print(f"{m} lowest in {int(np.sum(np.array(best) == m))}/{args.replicates}")
