"""Command-line entry point.

Every subcommand reads a YAML config (``--config``); ``--seed``,
``--workers`` and ``--out`` override the top-level keys of the same name.
Unknown keys are rejected and input paths are checked before any work
starts. Randomness derives from the single top-level seed through
``study.derive_seed(seed, stream, ...)``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .assessment import pointwise_log_likelihood, ppd_complete, ppd_forecast, waic
from .core import (SEIR, SIR, EpidemicRecord, ModelParams, Population, ValidationError,
                   pairwise_distances, parsing)
from .inference import InitializationError, McmcTrace, PriorSpec, diagnostics, fit_mcmc
from .kernel import ClusterAssignment, ModelSpec, Spark
from .simulate import SCENARIOS, SimConfig, simulate_epidemic
from .study import (STREAMS, bench_population, cluster_population, derive_rng, derive_seed,
                    fit_and_score, model_for, simulate_replicate, time_call)


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------- config

def _build(cls, raw, where):
    """Instantiate a config dataclass from a mapping, rejecting unknown keys."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kw = {}
    for name, value in raw.items():
        sub = _NESTED.get((cls, name))
        if sub is not None:
            if isinstance(value, list):
                value = [_build(sub, v, f"{where}.{name}[{i}]") for i, v in enumerate(value)]
            else:
                value = _build(sub, value, f"{where}.{name}")
        kw[name] = value
    try:
        return cls(**kw)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from None


@dataclass
class SimulateCfg:
    scenarios: list = field(default_factory=lambda: list(SCENARIOS))
    n_populations: int = 10
    n: int = 100
    t_max: int = 31
    infectious_period: int = 3
    initial_count: int = 1
    alpha: float = 0.8
    beta: float = 2.0


@dataclass
class DataCfg:
    population: Optional[str] = None
    events: Optional[str] = None
    format: str = "events"            # "events" or "fmd"
    t_max: Optional[int] = None
    window: Optional[list] = None     # fmd: [first_day, last_day]
    frame: str = SIR
    latent_period: Optional[int] = None
    infectious_period: int = 3


@dataclass
class ClusterCfg:
    method: str = "dpmm"              # "dpmm" or "kmeans"
    k: int = 3
    mode: str = "spatiotemporal"      # or "spatial"
    iters: int = 2000
    burn_in: Optional[int] = None
    truncation: int = 30


@dataclass
class ModelCfg:
    name: str = "silm"
    spark: str = "zero"
    composite: bool = False
    assignment: Optional[str] = None
    centroids: Optional[str] = None


@dataclass
class McmcCfg:
    iters: int = 2000
    burn_in: Optional[int] = None


@dataclass
class PriorCfg:
    alpha: list = field(default_factory=lambda: [1.5, 1.0])
    beta: list = field(default_factory=lambda: [2.0, 3.0])
    beta_tilde: list = field(default_factory=lambda: [2.0, 3.0])
    epsilon: list = field(default_factory=lambda: [1.5, 1.0])
    delta: list = field(default_factory=lambda: [1.0, 1.0])

    def spec(self) -> PriorSpec:
        return PriorSpec(*(tuple(getattr(self, k)) for k in
                           ("alpha", "beta", "beta_tilde", "epsilon", "delta")))


@dataclass
class AssessCfg:
    n_sims: int = 100
    waic_draws: Optional[int] = None


@dataclass
class ForecastCfg:
    from_t: int = 5
    n_sims: int = 100


@dataclass
class BenchCfg:
    n: int = 1000
    k_values: list = field(default_factory=lambda: [1, 2, 5, 10])
    spark: str = "m2"
    reps: int = 20
    warmup: int = 3
    mcmc_iters: int = 0
    alpha: float = 0.05
    beta: float = 2.0
    beta_tilde: float = 1.0
    variance: float = 8.0
    bounds: list = field(default_factory=lambda: [0.0, 30.0])
    t_max: int = 31
    infectious_period: int = 3


@dataclass
class StudyCfg:
    scenarios: list = field(default_factory=lambda: list(SCENARIOS))
    n_replicates: int = 10
    n: int = 100
    t_max: int = 31
    alpha: float = 0.8
    beta: float = 2.0
    infectious_period: int = 3
    models: list = field(default_factory=lambda: ["silm", "m2", "m3", "m4"])
    clusterings: list = field(default_factory=lambda: ["dpmm", "kmeans3", "kmeans5",
                                                       "kmeans8", "kmeans10"])
    dpmm_mode: str = "spatiotemporal"
    dpmm_iters: int = 2000
    iters: int = 2000
    n_sims: int = 100


@dataclass
class RunConfig:
    seed: int = 0
    workers: int = 1
    out: str = "out"
    simulate: SimulateCfg = field(default_factory=SimulateCfg)
    data: DataCfg = field(default_factory=DataCfg)
    cluster: ClusterCfg = field(default_factory=ClusterCfg)
    models: list = field(default_factory=lambda: [ModelCfg()])
    mcmc: McmcCfg = field(default_factory=McmcCfg)
    priors: PriorCfg = field(default_factory=PriorCfg)
    assess: AssessCfg = field(default_factory=AssessCfg)
    forecast: ForecastCfg = field(default_factory=ForecastCfg)
    bench: BenchCfg = field(default_factory=BenchCfg)
    study: StudyCfg = field(default_factory=StudyCfg)


_NESTED = {
    (RunConfig, "simulate"): SimulateCfg, (RunConfig, "data"): DataCfg,
    (RunConfig, "cluster"): ClusterCfg, (RunConfig, "models"): ModelCfg,
    (RunConfig, "mcmc"): McmcCfg, (RunConfig, "priors"): PriorCfg,
    (RunConfig, "assess"): AssessCfg, (RunConfig, "forecast"): ForecastCfg,
    (RunConfig, "bench"): BenchCfg, (RunConfig, "study"): StudyCfg,
}


def load_config(path: Optional[str]) -> RunConfig:
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        raw = yaml.safe_load(p.read_text()) or {}
    cfg = _build(RunConfig, raw, "config")
    if isinstance(cfg.models, ModelCfg):
        cfg.models = [cfg.models]
    return cfg


def _check_values(cfg: RunConfig) -> None:
    """Range checks that can be made before any work starts."""
    for where, n in (("assess.n_sims", cfg.assess.n_sims), ("forecast.n_sims", cfg.forecast.n_sims)):
        if n < 20:
            raise ConfigError(f"{where} must be >= 20 for 95% bands, got {n}")
    if cfg.study.n_sims and cfg.study.n_sims < 20:
        raise ConfigError(f"study.n_sims must be 0 or >= 20, got {cfg.study.n_sims}")
    for where, n in (("mcmc.iters", cfg.mcmc.iters), ("study.iters", cfg.study.iters),
                     ("cluster.iters", cfg.cluster.iters), ("study.dpmm_iters", cfg.study.dpmm_iters)):
        if n < 2:
            raise ConfigError(f"{where} must be >= 2, got {n}")
    if cfg.simulate.n_populations < 1 or cfg.study.n_replicates < 1:
        raise ConfigError("simulate.n_populations and study.n_replicates must be >= 1")
    if cfg.bench.reps < 1 or cfg.bench.n < 2 or not cfg.bench.k_values:
        raise ConfigError("bench needs reps >= 1, n >= 2 and at least one K")


def _base_dir(config_path):
    return Path(config_path).parent if config_path else Path(".")


def _resolve(base: Path, p: Optional[str]) -> Optional[Path]:
    if p is None:
        return None
    p = Path(p)
    return p if p.is_absolute() else base / p


def _require_file(path: Optional[Path], what: str) -> Path:
    if path is None:
        raise ConfigError(f"missing {what} path")
    if not path.is_file():
        raise ConfigError(f"{what} file not found: {path}")
    return path


# ------------------------------------------------------------------- data

def load_fmd(path, window):
    """Read ``id,x,y,infection_day,removal_day`` and re-base days on ``window``.

    Day ``window[0]`` becomes day 0 and ``t_max = window[1] - window[0]``.
    Premises removed before the window never take part and are dropped;
    exposures before the window are clipped to day 0 (conditioned on);
    events after the window are treated as unobserved.
    Returns ``(population, record, kept_ids)``.
    """
    start, end = int(window[0]), int(window[1])
    if end <= start:
        raise ValidationError("window must satisfy first_day < last_day")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    need = {"id", "x", "y", "infection_day", "removal_day"}
    if not rows or not need <= set(rows[0]):
        raise ValidationError(f"{path}: expected columns {sorted(need)}")
    with parsing(path):
        return _fmd_rows(rows, start, end)


def _fmd_rows(rows, start, end):
    rows.sort(key=lambda r: int(r["id"]))
    coords, inf, rem, kept = [], [], [], []
    t_max = end - start
    for r in rows:
        a = int(r["infection_day"]) if r["infection_day"].strip() else None
        b = int(r["removal_day"]) if r["removal_day"].strip() else None
        if b is not None and b < start:
            continue
        if a is not None and a > end:
            a, b = None, None
        if a is not None:
            a = max(a, start) - start
        if b is not None:
            b = b - start if b <= end else None
            if b is not None and a is not None and b <= a:
                b = a + 1 if a + 1 <= t_max else None
        kept.append(int(r["id"]))
        coords.append((float(r["x"]), float(r["y"])))
        inf.append(a)
        rem.append(b)
    return Population(np.array(coords)), EpidemicRecord(tuple(inf), tuple(rem), t_max), kept


def _load_data(cfg: RunConfig, base: Path):
    d = cfg.data
    if d.frame not in (SIR, SEIR):
        raise ConfigError(f"data.frame must be SIR or SEIR, got {d.frame!r}")
    if d.format == "fmd":
        path = _require_file(_resolve(base, d.events or d.population), "fmd data")
        if d.window is None:
            raise ConfigError("data.window is required for fmd data")
        pop, record, _ = load_fmd(path, d.window)
    elif d.format == "events":
        pop_path = _require_file(_resolve(base, d.population), "population")
        ev_path = _require_file(_resolve(base, d.events), "events")
        if d.t_max is None:
            raise ConfigError("data.t_max is required")
        pop = Population.from_csv(pop_path)
        record = EpidemicRecord.from_csv(ev_path, d.t_max)
        if record.n != pop.n:
            raise ValidationError("population and events files list different individuals")
    else:
        raise ConfigError(f"data.format must be 'events' or 'fmd', got {d.format!r}")
    return pop, record


def _model_specs(cfg: RunConfig, base: Path, pop: Population):
    d = cfg.data
    specs = []
    names = [m.name for m in cfg.models]
    if len(set(names)) != len(names):
        raise ConfigError("model names must be unique")
    for m in cfg.models:
        spark = Spark.parse(m.spark)
        clusters = None
        if m.assignment is not None:
            a = _require_file(_resolve(base, m.assignment), f"assignment for model {m.name}")
            c = _resolve(base, m.centroids)
            if c is not None:
                _require_file(c, f"centroids for model {m.name}")
            clusters = ClusterAssignment.from_csv(a, c, pop)
            if clusters.membership.shape[0] != pop.n:
                raise ValidationError(f"assignment for model {m.name} does not match population")
        if (m.composite or spark.needs_clusters) and clusters is None:
            raise ConfigError(f"model {m.name}: spark {spark.value}"
                              f"{' (composite)' if m.composite else ''} needs an assignment")
        specs.append((m.name, ModelSpec(d.frame, spark, m.composite, clusters,
                                        d.latent_period if d.frame == SEIR else None,
                                        d.infectious_period)))
    return specs


def _write_rows(path: Path, rows: list, columns: Optional[list] = None) -> None:
    columns = columns or list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# --------------------------------------------------------------- commands

def cmd_simulate(cfg: RunConfig, base: Path, out: Path) -> None:
    s = cfg.simulate
    bad = [x for x in s.scenarios if x not in SCENARIOS]
    if bad:
        raise ConfigError(f"simulate.scenarios: unknown {bad}; choose from {list(SCENARIOS)}")
    seed = derive_seed(cfg.seed, STREAMS["simulate"])
    index = []
    for name in s.scenarios:
        for r in range(s.n_populations):
            rep = simulate_replicate(name, r, seed, s.n, s.t_max, ModelParams(s.alpha, s.beta),
                                     s.infectious_period, s.initial_count)
            stem = f"{name}_{r:02d}"
            rep.pop.to_csv(out / f"{stem}_population.csv")
            rep.record.to_csv(out / f"{stem}_events.csv")
            if rep.labels is not None:
                ClusterAssignment.from_labels(rep.pop, rep.labels).to_csv(
                    out / f"{stem}_true_assignment.csv", out / f"{stem}_true_centroids.csv")
            n_inf = sum(v is not None for v in rep.record.infection_time)
            index.append({"scenario": name, "replicate": r, "stem": stem, "n": s.n,
                          "t_max": s.t_max, "infected": n_inf})
    _write_rows(out / "simulations.csv", index)


def cmd_cluster(cfg: RunConfig, base: Path, out: Path) -> None:
    c = cfg.cluster
    if c.method not in ("dpmm", "kmeans"):
        raise ConfigError(f"cluster.method must be dpmm or kmeans, got {c.method!r}")
    if c.mode not in ("spatial", "spatiotemporal"):
        raise ConfigError(f"cluster.mode must be spatial or spatiotemporal, got {c.mode!r}")
    spatial = c.method == "kmeans" or c.mode == "spatial"
    if not spatial and cfg.data.events is None and cfg.data.format == "events":
        raise ConfigError("spatio-temporal DPMM needs data.events")
    if spatial and cfg.data.format == "events" and cfg.data.events is None:
        pop = Population.from_csv(_require_file(_resolve(base, cfg.data.population), "population"))
        record = None
    else:
        pop, record = _load_data(cfg, base)
    rng = derive_rng(cfg.seed, STREAMS["cluster"])
    clusters = cluster_population(pop, record, c.method, rng, c.k, spatial, c.iters, c.burn_in,
                                  c.truncation)
    clusters.to_csv(out / "assignment.csv", out / "centroids.csv")
    _write_rows(out / "cluster_summary.csv",
                [{"method": c.method, "mode": "spatial" if spatial else "spatiotemporal",
                  "K": clusters.K, "sizes": " ".join(map(str, np.bincount(clusters.membership)))}])


def cmd_fit(cfg: RunConfig, base: Path, out: Path) -> None:
    pop, record = _load_data(cfg, base)
    specs = _model_specs(cfg, base, pop)
    dist = pairwise_distances(pop)
    priors = cfg.priors.spec()
    rows = []
    for i, (name, spec) in enumerate(specs):
        trace = fit_mcmc(record, pop, spec, priors, cfg.mcmc.iters,
                         derive_seed(cfg.seed, STREAMS["fit"], i), cfg.mcmc.burn_in, dist=dist,
                         workers=cfg.workers)
        trace.metadata["name"] = name
        trace.to_csv(out / f"trace_{name}.csv")
        for p, d in diagnostics(trace).items():
            rows.append({"model": name, "parameter": p, **d,
                         "median": float(np.median(trace.column(p)))})
    _write_rows(out / "fit_summary.csv", rows)


def _load_trace(out: Path, name: str) -> McmcTrace:
    path = out / f"trace_{name}.csv"
    if not path.is_file():
        raise ConfigError(f"no trace for model {name} at {path}; run `fit` first")
    return McmcTrace.from_csv(path)


def cmd_assess(cfg: RunConfig, base: Path, out: Path) -> None:
    pop, record = _load_data(cfg, base)
    specs = _model_specs(cfg, base, pop)
    traces = [_load_trace(out, name) for name, _ in specs]
    dist = pairwise_distances(pop)
    rows = []
    for i, ((name, spec), trace) in enumerate(zip(specs, traces)):
        w = waic(pointwise_log_likelihood(trace, record, pop, spec, dist, cfg.assess.waic_draws))
        ens = ppd_complete(trace, record, pop, spec, cfg.assess.n_sims,
                           derive_rng(cfg.seed, STREAMS["assess"], i), dist)
        ens.to_csv(out / f"curves_{name}.csv")
        rows.append({"model": name, "waic": w.waic, "lppd": w.lppd, "p_waic": w.p_waic,
                     "n_units": w.n_units, "waic_unit": "individual-day exposure",
                     "ppd_coverage": ens.coverage()})
    _write_rows(out / "assessment.csv", rows)


def cmd_forecast(cfg: RunConfig, base: Path, out: Path) -> None:
    pop, record = _load_data(cfg, base)
    specs = _model_specs(cfg, base, pop)
    f = cfg.forecast
    if not 0 <= f.from_t <= record.t_max:
        raise ConfigError(f"forecast.from_t {f.from_t} outside 0..{record.t_max}")
    early = record.truncate(f.from_t)
    dist = pairwise_distances(pop)
    rows = []
    for i, (name, spec) in enumerate(specs):
        trace = fit_mcmc(early, pop, spec, cfg.priors.spec(), cfg.mcmc.iters,
                         derive_seed(cfg.seed, STREAMS["forecast"], i, 0), cfg.mcmc.burn_in,
                         dist=dist, workers=cfg.workers)
        trace.to_csv(out / f"trace_early_{name}.csv")
        ens = ppd_forecast(trace, record, pop, spec, f.from_t, f.n_sims,
                           derive_rng(cfg.seed, STREAMS["forecast"], i, 1), dist)
        ens.to_csv(out / f"forecast_{name}.csv")
        rows.append({"model": name, "from_t": f.from_t, "coverage": ens.coverage()})
    _write_rows(out / "forecast_summary.csv", rows)


def cmd_bench(cfg: RunConfig, base: Path, out: Path) -> None:
    b = cfg.bench
    spark = Spark.parse(b.spark)
    rows = []
    for k in b.k_values:
        pop, clusters = bench_population(b.n, k, derive_seed(cfg.seed, STREAMS["bench"], k),
                                         b.variance, tuple(b.bounds))
        params = ModelParams(b.alpha, b.beta)
        record = simulate_epidemic(pop, SimConfig(params, n=b.n, t_max=b.t_max,
                                                  infectious_period=b.infectious_period,
                                                  seed=derive_seed(cfg.seed, STREAMS["bench"],
                                                                   k, 1)))
        dist = pairwise_distances(pop)
        full = ModelSpec(SIR, Spark.ZERO, False, None, None, b.infectious_period)
        comp = ModelSpec(SIR, spark, True, clusters, None, b.infectious_period)
        p_full = params
        p_comp = ModelParams(b.alpha, b.beta, epsilon=b.alpha if spark in (Spark.CONSTANT, Spark.M1)
                             else None,
                             beta_tilde=b.beta_tilde if spark.needs_clusters else None,
                             delta=1.0 if spark is Spark.M4 else None)
        lf = full.likelihood(record, dist, pop)
        lc = comp.likelihood(record, dist, pop, workers=cfg.workers)
        # cold evaluations: the beta-keyed kernel cache is dropped each call
        t_full = time_call(lambda: (lf.clear_cache(), lf(p_full)), b.reps, b.warmup)
        t_comp = time_call(lambda: (lc.clear_cache(), lc(p_comp)), b.reps, b.warmup)
        row = {"n": b.n, "K": k, "spark": spark.value, "workers": cfg.workers,
               "infected": sum(v is not None for v in record.infection_time),
               "loglik_full_s": t_full, "loglik_composite_s": t_comp,
               "loglik_ratio": t_comp / t_full}
        if b.mcmc_iters:
            row.update(_bench_mcmc(record, pop, full, comp, dist, b.mcmc_iters, cfg))
        rows.append(row)
    _write_rows(out / "bench.csv", rows)


def _bench_mcmc(record, pop, full, comp, dist, iters, cfg):
    seed = derive_seed(cfg.seed, STREAMS["bench"], 99)
    t = time.perf_counter()
    fit_mcmc(record, pop, full, iters=iters, seed=seed, dist=dist)
    t_full = time.perf_counter() - t
    t = time.perf_counter()
    fit_mcmc(record, pop, comp, iters=iters, seed=seed, dist=dist, workers=cfg.workers)
    t_comp = time.perf_counter() - t
    return {"mcmc_iters": iters, "mcmc_full_s": t_full, "mcmc_composite_s": t_comp,
            "mcmc_ratio": t_comp / t_full}


def _study_cell(args):
    sc_name, rep_idx, seed, st = args
    rep = simulate_replicate(sc_name, rep_idx, seed, st.n, st.t_max,
                             ModelParams(st.alpha, st.beta), st.infectious_period)
    key = list(SCENARIOS).index(sc_name)
    truth = {"alpha": st.alpha, "beta": st.beta}
    rows = []
    dist = pairwise_distances(rep.pop)
    base = {"scenario": sc_name, "replicate": rep_idx,
            "infected": sum(v is not None for v in rep.record.infection_time)}
    if "silm" in st.models:
        r = fit_and_score(rep.record, rep.pop, model_for("silm", None, st.infectious_period),
                          derive_seed(seed, key, rep_idx, 10), st.iters, n_sims=st.n_sims,
                          truth=truth, dist=dist)
        r.pop("trace")
        rows.append({**base, "clustering": "none", "K": 1, **r})
    for ci, method in enumerate(st.clusterings):
        rng = derive_rng(seed, key, rep_idx, 20 + ci)
        if method == "dpmm":
            clusters = cluster_population(rep.pop, rep.record, "dpmm", rng,
                                          spatial_only=st.dpmm_mode == "spatial",
                                          iters=st.dpmm_iters)
        elif method.startswith("kmeans"):
            clusters = cluster_population(rep.pop, rep.record, "kmeans", rng, int(method[6:]))
        else:
            raise ConfigError(f"unknown clustering {method!r}")
        for mi, m in enumerate(x for x in st.models if x != "silm"):
            spec = model_for(m, clusters, st.infectious_period)
            try:
                r = fit_and_score(rep.record, rep.pop, spec,
                                  derive_seed(seed, key, rep_idx, 100 + 10 * ci + mi), st.iters,
                                  n_sims=st.n_sims, truth=truth, dist=dist)
                r.pop("trace")
            except InitializationError as e:
                r = {"model": spec.label, "error": str(e)}
            rows.append({**base, "clustering": method, "K": clusters.K, **r})
    return rows


def cmd_replicate_study(cfg: RunConfig, base: Path, out: Path) -> None:
    st = cfg.study
    bad = [x for x in st.scenarios if x not in SCENARIOS]
    if bad:
        raise ConfigError(f"study.scenarios: unknown {bad}")
    for m in st.models:
        if m != "silm":
            Spark.parse(m)
    seed = derive_seed(cfg.seed, STREAMS["replicate-study"])
    jobs = [(s, r, seed, st) for s in st.scenarios for r in range(st.n_replicates)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(_study_cell, jobs))
    else:
        results = [_study_cell(j) for j in jobs]
    rows = [r for cell in results for r in cell]
    _write_rows(out / "study.csv", rows)
    summary = {}
    for r in rows:
        if "waic" not in r:
            continue
        key = (r["scenario"], r["clustering"], r["model"])
        summary.setdefault(key, []).append(r["waic"])
    _write_rows(out / "study_waic.csv",
                [{"scenario": s, "clustering": c, "model": m, "replicates": len(v),
                  "waic_total": float(np.sum(v))} for (s, c, m), v in sorted(summary.items())])


COMMANDS = {
    "simulate": cmd_simulate,
    "cluster": cmd_cluster,
    "fit": cmd_fit,
    "assess": cmd_assess,
    "forecast": cmd_forecast,
    "bench": cmd_bench,
    "replicate-study": cmd_replicate_study,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cilm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="top-level seed (u64)")
        p.add_argument("--workers", type=int, help="parallel workers")
        p.add_argument("--out", help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.workers is not None:
            cfg.workers = args.workers
        if args.out is not None:
            cfg.out = args.out
        if not 0 <= int(cfg.seed) < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if cfg.workers < 1:
            raise ConfigError("workers must be >= 1")
        _check_values(cfg)
        base = _base_dir(args.config)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, base, out)
    except (ConfigError, ValidationError, InitializationError, OSError) as e:
        print(f"cilm {args.command}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
