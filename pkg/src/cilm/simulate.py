"""Spatial population generators and discrete-time SIR/SEIR epidemic
simulation under the (composite) spatial ILM."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (NEVER, SEIR, SIR, EpidemicRecord, ModelParams, Population, ValidationError,
                   pairwise_distances)
from .kernel import ClusterAssignment, ModelSpec, NumericalError, Spark, spark_by_cluster


@dataclass(frozen=True)
class SpatialScenario:
    """Completely spatially random (``k == 0``) or Gaussian-clustered layout."""

    name: str
    k: int = 0
    variance: float = 0.0
    bounds: tuple = (0.0, 30.0)

    def __post_init__(self):
        if self.k < 0:
            raise ValidationError("cluster count must be >= 0")
        if self.k > 0 and self.variance <= 0:
            raise ValidationError("clustered scenarios need a positive variance")

    @property
    def clustered(self) -> bool:
        return self.k > 0


LOW_VARIANCE = 3.0
HIGH_VARIANCE = 8.0

SCENARIOS = {
    "csr": SpatialScenario("csr"),
    "low3": SpatialScenario("low3", 3, LOW_VARIANCE),
    "low5": SpatialScenario("low5", 5, LOW_VARIANCE),
    "low8": SpatialScenario("low8", 8, LOW_VARIANCE),
    "high3": SpatialScenario("high3", 3, HIGH_VARIANCE),
    "high5": SpatialScenario("high5", 5, HIGH_VARIANCE),
    "high8": SpatialScenario("high8", 8, HIGH_VARIANCE),
}


def scenario(name: str) -> SpatialScenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValidationError(f"unknown scenario {name!r}; expected one of {list(SCENARIOS)}") from None


def even_split(n: int, k: int) -> np.ndarray:
    """Cluster sizes differing by at most one, larger clusters first."""
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    return sizes


def generate_population(sc: SpatialScenario, n: int, rng: np.random.Generator):
    """Draw ``n`` locations; returns ``(population, true_labels)``.

    ``true_labels`` is None for CSR layouts. Clustered layouts draw each
    cluster mean uniformly in ``bounds`` and members from an isotropic
    Gaussian around it; points are not clipped to the bounds.
    """
    lo, hi = sc.bounds
    if not sc.clustered:
        coords = rng.uniform(lo, hi, size=(n, 2))
        labels = None
    else:
        means = rng.uniform(lo, hi, size=(sc.k, 2))
        labels = np.repeat(np.arange(sc.k), even_split(n, sc.k))
        coords = means[labels] + rng.normal(0.0, np.sqrt(sc.variance), size=(n, 2))
    while True:
        _, first, counts = np.unique(coords, axis=0, return_index=True, return_counts=True)
        dup = np.setdiff1d(np.arange(n), first)
        if dup.size == 0:
            break
        if labels is None:
            coords[dup] = rng.uniform(lo, hi, size=(dup.size, 2))
        else:
            coords[dup] = means[labels[dup]] + rng.normal(0.0, np.sqrt(sc.variance), (dup.size, 2))
    return Population(coords), labels


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    n: int = 100
    t_max: int = 31
    infectious_period: int = 3
    initial_count: int = 1
    seed: int = 0
    frame: str = SIR
    latent_period: Optional[int] = None
    spark: Spark = Spark.ZERO
    composite: bool = False
    clusters: Optional[ClusterAssignment] = None

    def __post_init__(self):
        if self.n < 1 or self.t_max < 1 or self.infectious_period < 1:
            raise ValidationError("n, t_max and infectious_period must all be >= 1")
        if not 0 <= self.initial_count <= self.n:
            raise ValidationError("initial_count must lie in 0..n")
        if self.frame == SEIR and (self.latent_period is None or self.latent_period < 0):
            raise ValidationError("SEIR simulation needs latent_period >= 0")

    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.frame, self.spark, self.composite, self.clusters,
                         self.latent_period if self.frame == SEIR else None,
                         self.infectious_period)


class _Transmission:
    """Per-day infection rates for every individual given who is infectious."""

    def __init__(self, pop, params, spec: ModelSpec, dist=None):
        dist = pairwise_distances(pop) if dist is None else np.asarray(dist)
        with np.errstate(divide="ignore"):
            w = dist ** (-params.beta)
        np.fill_diagonal(w, 0.0)
        if spec.composite:
            g = spec.clusters.membership
            w = np.where(g[:, None] == g[None, :], w, 0.0)
        self.w = w
        self.pop = pop
        self.params = params
        self.spec = spec
        self.labels = (spec.clusters.membership if spec.clusters is not None
                       else np.zeros(pop.n, dtype=np.int64))

    def rates(self, infectious: np.ndarray) -> np.ndarray:
        kern = self.params.alpha * self.w[:, infectious].sum(axis=1)
        spark = spark_by_cluster(self.spec.spark, self.params, infectious, self.spec.clusters,
                                 self.pop)
        return kern + spark[self.labels]


def run_from_state(pop: Population, params: ModelParams, spec: ModelSpec, s_exit, i_start,
                   r_start, start_day: int, t_max: int, rng: np.random.Generator,
                   dist=None) -> EpidemicRecord:
    """Advance an epidemic from the compartment state on ``start_day``.

    ``s_exit``, ``i_start`` and ``r_start`` hold each individual's known
    transition days (``NEVER`` if not yet happened). On every day, every
    susceptible is infected with its ILM probability using one uniform draw
    per susceptible in ascending id order.
    """
    if start_day > t_max:
        raise ValidationError(f"start day {start_day} beyond t_max {t_max}")
    s_exit = np.array(s_exit, dtype=np.int64)
    i_start = np.array(i_start, dtype=np.int64)
    r_start = np.array(r_start, dtype=np.int64)
    latent = (spec.latent_period or 0) if spec.frame == SEIR else 0
    period = spec.infectious_period
    if period is None:
        raise ValidationError("simulation needs a fixed infectious period")
    for name, v in params.as_dict().items():
        if name != "delta" and not (np.isfinite(v) and v >= 0):
            raise ValidationError(f"{name} must be non-negative for simulation, got {v}")
    model = _Transmission(pop, params, spec, dist)
    for t in range(start_day, t_max):
        susceptible = np.flatnonzero(s_exit > t)
        if susceptible.size == 0:
            continue
        infectious = (i_start <= t) & (r_start > t)
        if not infectious.any() and spec.spark is not Spark.CONSTANT:
            continue
        rates = model.rates(infectious)[susceptible]
        if not np.all(np.isfinite(rates)):
            bad = susceptible[~np.isfinite(rates)][0]
            raise NumericalError(int(bad), t)
        u = rng.random(susceptible.size)
        new = susceptible[u < -np.expm1(-rates)]
        s_exit[new] = t + 1
        i_start[new] = t + 1 + latent
        r_start[new] = t + 1 + latent + period
    return _to_record(s_exit, r_start, t_max)


def _to_record(s_exit, r_start, t_max) -> EpidemicRecord:
    inf = tuple(int(v) if v <= t_max else None for v in s_exit)
    rem = tuple(int(r) if a is not None and r <= t_max else None for a, r in zip(inf, r_start))
    return EpidemicRecord(inf, rem, t_max)


def _initial_state(n, initial, latent, period):
    s_exit = np.full(n, NEVER, dtype=np.int64)
    i_start = np.full(n, NEVER, dtype=np.int64)
    r_start = np.full(n, NEVER, dtype=np.int64)
    s_exit[initial] = 0
    i_start[initial] = latent
    r_start[initial] = latent + period
    return s_exit, i_start, r_start


def simulate_epidemic(pop: Population, config: SimConfig, rng=None, dist=None) -> EpidemicRecord:
    """Simulate an SIR (or, via ``config.frame``, SEIR) epidemic.

    Initial infectives are drawn uniformly without replacement and enter
    I (E for SEIR) on day 0. Uses ``config.seed`` unless ``rng`` is given.
    """
    if pop.n != config.n:
        raise ValidationError(f"population has {pop.n} individuals, config says {config.n}")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    spec = config.model_spec()
    latent = (spec.latent_period or 0) if spec.frame == SEIR else 0
    initial = np.sort(rng.choice(pop.n, size=config.initial_count, replace=False))
    state = _initial_state(pop.n, initial, latent, config.infectious_period)
    return run_from_state(pop, config.params, spec, *state, 0, config.t_max, rng, dist)


def simulate_seir(pop: Population, config: SimConfig, rng=None, dist=None) -> EpidemicRecord:
    """SEIR simulation: S to E with the ILM probability, E to I after the
    latent period, I to R after the infectious period. ``infection_time`` in
    the returned record is the exposure day."""
    if config.latent_period is None or config.latent_period < 0:
        raise ValidationError("simulate_seir needs latent_period >= 0")
    if config.frame != SEIR:
        config = SimConfig(**{**config.__dict__, "frame": SEIR})
    return simulate_epidemic(pop, config, rng, dist)
