"""Simulation-study building blocks shared by the CLI and scripts:
seeded stream derivation, replicate generation, clustering dispatch,
fit-and-score of one model, and the likelihood benchmark."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assessment import hpdi, pointwise_log_likelihood, ppd_complete, waic
from .clustering import dpmm_gibbs, extract_assignment, kmeans, standardize
from .core import SIR, EpidemicRecord, ModelParams, Population, ValidationError, pairwise_distances
from .inference import PriorSpec, fit_mcmc
from .kernel import ClusterAssignment, ModelSpec, Spark
from .simulate import SCENARIOS, SimConfig, generate_population, scenario, simulate_epidemic

# Stable stream ids so that adding a command never shifts another's seeds.
STREAMS = {"simulate": 1, "cluster": 2, "fit": 3, "assess": 4, "forecast": 5, "bench": 6,
           "replicate-study": 7}


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for the stream ``seed -> keys[0] -> keys[1] -> ...``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))


@dataclass(frozen=True)
class Replicate:
    scenario: str
    index: int
    pop: Population
    labels: Optional[np.ndarray]
    record: EpidemicRecord


def simulate_replicate(scenario_name: str, index: int, seed: int, n: int = 100, t_max: int = 31,
                       params: ModelParams = ModelParams(0.8, 2.0), infectious_period: int = 3,
                       initial_count: int = 1) -> Replicate:
    """One population and one basic-SILM epidemic for a study cell."""
    sc = scenario(scenario_name)
    key = list(SCENARIOS).index(scenario_name)
    pop, labels = generate_population(sc, n, derive_rng(seed, key, index, 0))
    cfg = SimConfig(params, n=n, t_max=t_max, infectious_period=infectious_period,
                    initial_count=initial_count, seed=derive_seed(seed, key, index, 1))
    return Replicate(scenario_name, index, pop, labels, simulate_epidemic(pop, cfg))


def cluster_population(pop: Population, record: Optional[EpidemicRecord], method: str,
                       rng: np.random.Generator, k: int = 3, spatial_only: bool = False,
                       iters: int = 2000, burn_in: Optional[int] = None,
                       truncation: int = 30) -> ClusterAssignment:
    if method == "kmeans":
        return kmeans(pop, k, rng)
    if method == "dpmm":
        if record is None and not spatial_only:
            raise ValidationError("spatio-temporal DPMM needs the epidemic record")
        t_max = record.t_max if record is not None else 1.0
        data = standardize(pop, None if spatial_only else record, t_max=t_max)
        chain = dpmm_gibbs(data, M=truncation, iters=iters, burn_in=burn_in, rng=rng,
                           spatial_only=spatial_only)
        return extract_assignment(chain, pop, data)
    if method == "true":
        raise ValidationError("true labels must be supplied by the caller")
    raise ValidationError(f"unknown clustering method {method!r}")


def model_for(name: str, clusters: Optional[ClusterAssignment], infectious_period: int = 3,
              frame: str = SIR, latent_period: Optional[int] = None) -> ModelSpec:
    """``silm`` is the basic model; any spark name gives the composite model."""
    if name == "silm":
        return ModelSpec(frame, Spark.ZERO, False, None, latent_period, infectious_period)
    return ModelSpec(frame, Spark.parse(name), True, clusters, latent_period, infectious_period)


def fit_and_score(record: EpidemicRecord, pop: Population, model: ModelSpec, seed: int,
                  iters: int = 2000, priors: PriorSpec = PriorSpec(), n_sims: int = 100,
                  truth: Optional[dict] = None, dist=None, waic_draws: Optional[int] = None
                  ) -> dict:
    """Fit one model and summarize: WAIC, posterior medians/HPDIs, truth
    coverage (when ``truth`` is given) and complete-case PPD band coverage."""
    dist = pairwise_distances(pop) if dist is None else dist
    trace = fit_mcmc(record, pop, model, priors, iters=iters, seed=derive_seed(seed, 0), dist=dist)
    pw = pointwise_log_likelihood(trace, record, pop, model, dist, max_draws=waic_draws)
    w = waic(pw)
    row = {"model": model.label, "waic": w.waic, "lppd": w.lppd, "p_waic": w.p_waic,
           "n_units": w.n_units}
    for name in trace.names:
        col = trace.column(name)
        lo, hi = hpdi(col)
        row[f"{name}_median"] = float(np.median(col))
        row[f"{name}_lo"], row[f"{name}_hi"] = lo, hi
        if truth and name in truth:
            row[f"{name}_covered"] = bool(lo <= truth[name] <= hi)
    if n_sims:
        ens = ppd_complete(trace, record, pop, model, n_sims, derive_rng(seed, 1), dist)
        row["ppd_coverage"] = ens.coverage()
    row["trace"] = trace
    return row


# ------------------------------------------------------------------ bench

def bench_population(n: int, k: int, seed: int, spread: float = 3.0, bounds=(0.0, 30.0)):
    """Balanced clustered population with its true clusters."""
    from .simulate import SpatialScenario
    sc = SpatialScenario(f"bench{k}", k, spread, bounds) if k > 1 else SpatialScenario("csr", 0, 0.0, bounds)
    pop, labels = generate_population(sc, n, derive_rng(seed, 0))
    if labels is None:
        clusters = ClusterAssignment.single(pop)
    else:
        clusters = ClusterAssignment.from_labels(pop, labels)
    return pop, clusters


def time_call(fn, reps: int = 20, warmup: int = 3) -> float:
    """Median wall time of ``fn()`` over ``reps`` calls after ``warmup``."""
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(reps):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return float(np.median(times))
