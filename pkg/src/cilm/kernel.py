"""Infection rates, spark functions and (composite) log-likelihoods for
spatial individual-level models with a power-law distance kernel."""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (NEVER, SIR, CompartmentTimeline, EpidemicRecord, ModelParams, Population,
                   ValidationError, build_timeline, parsing)


class NumericalError(ArithmeticError):
    """Non-finite infection rate; carries the offending individual and day."""

    def __init__(self, i, t, msg="non-finite infection rate"):
        super().__init__(f"{msg} for individual {i} at day {t}")
        self.i = i
        self.t = t


class Spark(str, enum.Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    M1 = "m1"
    M2 = "m2"
    M3 = "m3"
    M4 = "m4"

    @classmethod
    def parse(cls, value) -> "Spark":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown spark {value!r}; expected one of "
                                  f"{[s.value for s in cls]}") from None

    @property
    def params(self) -> tuple:
        """Parameters estimated for a model using this spark."""
        return {
            Spark.ZERO: ("alpha", "beta"),
            Spark.CONSTANT: ("alpha", "beta", "epsilon"),
            Spark.M1: ("alpha", "beta", "epsilon", "beta_tilde"),
            Spark.M2: ("alpha", "beta", "beta_tilde"),
            Spark.M3: ("alpha", "beta", "beta_tilde"),
            Spark.M4: ("alpha", "beta", "beta_tilde", "delta"),
        }[self]

    @property
    def needs_clusters(self) -> bool:
        return self in (Spark.M1, Spark.M2, Spark.M3, Spark.M4)


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster label per individual plus one planar centroid per cluster."""

    membership: np.ndarray
    centroids: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.membership, dtype=np.int64)
        c = np.asarray(self.centroids, dtype=float).reshape(-1, 2)
        if g.ndim != 1:
            raise ValidationError("membership must be one-dimensional")
        if g.size and (g.min() < 0 or g.max() >= c.shape[0]):
            raise ValidationError("membership labels must lie in 0..K-1")
        g.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "membership", g)
        object.__setattr__(self, "centroids", c)

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    @classmethod
    def from_labels(cls, pop: Population, labels) -> "ClusterAssignment":
        """Compact arbitrary labels to 0..K-1 and use member means as centroids."""
        _, g = np.unique(np.asarray(labels), return_inverse=True)
        K = g.max() + 1
        cent = np.array([pop.coords[g == k].mean(axis=0) for k in range(K)])
        return cls(g, cent)

    @classmethod
    def single(cls, pop: Population) -> "ClusterAssignment":
        return cls(np.zeros(pop.n, dtype=int), pop.coords.mean(axis=0)[None, :])

    def relabel(self, perm) -> "ClusterAssignment":
        """Cluster ``k`` becomes cluster ``perm[k]``."""
        perm = np.asarray(perm)
        cent = np.empty_like(self.centroids)
        cent[perm] = self.centroids
        return ClusterAssignment(perm[self.membership], cent)

    def to_csv(self, assignment_path, centroid_path) -> None:
        with open(assignment_path, "w") as fh:
            fh.write("id,cluster\n")
            for i, k in enumerate(self.membership):
                fh.write(f"{i},{k}\n")
        with open(centroid_path, "w") as fh:
            fh.write("cluster,x,y\n")
            for k, (x, y) in enumerate(self.centroids):
                fh.write(f"{k},{float(x)!r},{float(y)!r}\n")

    @classmethod
    def from_csv(cls, assignment_path, centroid_path=None, pop: Optional[Population] = None):
        with parsing(assignment_path):
            a = np.loadtxt(assignment_path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
            if sorted(a[:, 0].tolist()) != list(range(a.shape[0])):
                raise ValidationError(f"{assignment_path}: ids must be unique and contiguous from 0")
            g = np.empty(a.shape[0], dtype=np.int64)
            g[a[:, 0]] = a[:, 1]
        if centroid_path is None:
            if pop is None:
                raise ValidationError("need centroids or the population to derive them")
            return cls.from_labels(pop, g)
        with parsing(centroid_path):
            c = np.loadtxt(centroid_path, delimiter=",", skiprows=1, ndmin=2)
            if sorted(c[:, 0].astype(int).tolist()) != list(range(c.shape[0])):
                raise ValidationError(f"{centroid_path}: cluster ids must be contiguous from 0")
            cent = np.empty((c.shape[0], 2))
            cent[c[:, 0].astype(int)] = c[:, 1:3]
        return cls(g, cent)


def infection_probability(rate):
    """``1 - exp(-rate)`` evaluated without cancellation for small rates."""
    r = np.asarray(rate, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise ValueError("infection rate must be non-negative")
    p = -np.expm1(-r)
    return float(p) if np.ndim(p) == 0 else p


def _require(params: ModelParams, spark: Spark) -> None:
    for name in spark.params:
        if getattr(params, name) is None:
            raise ValidationError(f"spark {spark.value} needs parameter {name}")


def _check_params(params: ModelParams, spark: Spark) -> None:
    params.check()
    _require(params, spark)


def _infectious_centroid(pop: Population, members: np.ndarray) -> Optional[np.ndarray]:
    if members.size == 0:
        return None
    return pop.coords[members].mean(axis=0)


def spark_rate(i: int, t: int, timeline: CompartmentTimeline, params: ModelParams,
               clusters: Optional[ClusterAssignment], spark, pop: Optional[Population] = None) -> float:
    """Between-cluster (or background) hazard felt by individual ``i`` on day ``t``."""
    spark = Spark.parse(spark)
    _check_params(params, spark)
    if spark is Spark.ZERO:
        return 0.0
    if spark is Spark.CONSTANT:
        return float(params.epsilon)
    if clusters is None:
        raise ValidationError(f"spark {spark.value} requires a cluster assignment")
    if spark is Spark.M3 and pop is None:
        raise ValidationError("spark m3 requires the population to locate infectious centroids")
    g = clusters.membership
    k = g[i]
    inf = timeline.infectious_mask(t)
    scale = params.epsilon if spark is Spark.M1 else params.alpha
    total = 0.0
    for kk in range(clusters.K):
        if kk == k:
            continue
        n_inf = int(np.count_nonzero(inf & (g == kk)))
        if n_inf == 0:
            continue
        if spark is Spark.M3:
            ci = _infectious_centroid(pop, np.flatnonzero(inf & (g == k)))
            if ci is None:
                ci = clusters.centroids[k]
            ck = _infectious_centroid(pop, np.flatnonzero(inf & (g == kk)))
            d = float(np.hypot(*(ci - ck)))
        else:
            d = float(np.hypot(*(clusters.centroids[k] - clusters.centroids[kk])))
        count = n_inf ** params.delta if spark is Spark.M4 else n_inf
        total += count * d ** (-params.beta_tilde)
    return float(scale * total)


def infectivity_rate(i: int, t: int, timeline: CompartmentTimeline, params: ModelParams,
                     dist: np.ndarray, clusters: Optional[ClusterAssignment] = None,
                     spark=Spark.ZERO, composite: bool = False,
                     pop: Optional[Population] = None) -> float:
    """Infection rate of susceptible ``i`` on day ``t``.

    The kernel sums over all infectious individuals, or only those in
    ``i``'s cluster when ``composite`` is set, and the spark term is added.
    """
    if composite and clusters is None:
        raise ValidationError("composite mode requires a cluster assignment")
    inf = timeline.infectious_mask(t)
    if composite:
        inf = inf & (clusters.membership == clusters.membership[i])
    inf[i] = False
    with np.errstate(over="ignore"):
        rate = params.alpha * float(np.sum(dist[i, inf] ** (-params.beta)))
    rate += spark_rate(i, t, timeline, params, clusters, spark, pop)
    if not np.isfinite(rate):
        raise NumericalError(i, t)
    return rate


class _Block:
    """Precomputed data for one independent kernel work unit (one cluster,
    or the whole population for the full model)."""

    def __init__(self, rows, cols, log_d, esc_counts, inf_rows, inf_pattern,
                 inf_spark_idx, esc_spark):
        self.rows = rows                  # ids with at least one likelihood term
        self.cols = cols                  # ids infectious at some modelled day
        self.log_d = log_d                # log distances, +inf on the diagonal
        self.esc_counts = esc_counts      # escape-day overlaps per (row, col)
        self.inf_rows = inf_rows          # positions in ``rows`` with an infection term
        self.inf_pattern = inf_pattern    # infectious cols on each infection day
        self.inf_spark_idx = inf_spark_idx  # flat (day, cluster) index of each infection
        self.esc_spark = esc_spark        # escape counts per (day, cluster), flattened
        self.cache = None                 # (beta, escape kernel sum, infection kernel sums)


class ILMLikelihood:
    """Log-likelihood of one epidemic record under a (composite) spatial ILM.

    Everything that depends only on the data is precomputed once, so each
    call costs one power-law evaluation per (at-risk, ever-infectious) pair
    inside each kernel block. Blocks are independent and may be evaluated
    by a thread pool; partial sums are always reduced in ascending block
    order, so the result does not depend on ``workers``.

    Terms cover days ``t0 .. t_max - 1`` where ``t0`` is the first observed
    infection day. Individuals infected on ``t0`` are conditioned on; with
    the zero spark in composite mode, so is the earliest infection of every
    cluster.
    """

    def __init__(self, timeline: CompartmentTimeline, dist: np.ndarray, spark=Spark.ZERO,
                 clusters: Optional[ClusterAssignment] = None, composite: bool = False,
                 pop: Optional[Population] = None, workers: int = 1):
        self.spark = Spark.parse(spark)
        self.composite = composite
        self.workers = max(1, int(workers))
        self._pool = None
        if (composite or self.spark.needs_clusters) and clusters is None:
            raise ValidationError(f"spark {self.spark.value}"
                                  f"{' in composite mode' if composite else ''} requires clusters")
        if self.spark is Spark.M3 and pop is None:
            raise ValidationError("spark m3 requires the population to locate infectious centroids")
        n = timeline.n
        dist = np.asarray(dist, dtype=float)
        if dist.shape != (n, n):
            raise ValidationError(f"distance matrix shape {dist.shape} does not match N={n}")
        self.timeline = timeline
        self.n = n
        labels = clusters.membership if clusters is not None else np.zeros(n, dtype=np.int64)
        if labels.shape[0] != n:
            raise ValidationError("cluster membership does not match population size")
        n_clusters = clusters.K if clusters is not None else 1
        self.labels = labels
        self.n_clusters = n_clusters

        s_exit = timeline.s_exit
        infected = s_exit < NEVER
        t_max = timeline.t_max
        t0 = int(s_exit[infected].min()) if infected.any() else 0
        self.t0 = t0
        days = np.arange(t0, t_max)           # modelled days t; outcome observed at t+1
        self.days = days
        n_days = days.size

        conditioned = infected & (s_exit == t0)
        if self.composite and self.spark is Spark.ZERO:
            for k in range(n_clusters):
                members = infected & (labels == k)
                if members.any():
                    conditioned |= members & (s_exit == s_exit[members].min())
        self.conditioned = conditioned

        # escape[d, i]: i stays susceptible over day days[d]
        escape = s_exit[None, :] > days[:, None] + 1
        # infection term on day s_exit - 1 when inside the window
        inf_day = s_exit - 1
        has_inf_term = infected & ~conditioned & (inf_day >= t0) & (inf_day <= t_max - 1)
        self.escape = escape
        self.has_inf_term = has_inf_term
        self.inf_day = inf_day
        imat = timeline.infectious_matrix()[t0:t_max]   # (n_days, N)
        self.imat = imat

        # spark geometry
        self.counts = np.stack([np.count_nonzero(imat & (labels == k), axis=1)
                                for k in range(n_clusters)], axis=1).astype(float) \
            if n_days else np.zeros((0, n_clusters))
        if clusters is not None:
            cc = clusters.centroids
            dcc = np.hypot(cc[:, None, 0] - cc[None, :, 0], cc[:, None, 1] - cc[None, :, 1])
            np.fill_diagonal(dcc, np.inf)
            with np.errstate(divide="ignore"):
                self.log_dcc = np.log(dcc)
        if self.spark is Spark.M3:
            self.log_dinf = self._infectious_centroid_log_distances(
                pop.coords, imat, labels, n_clusters, clusters.centroids)

        if composite:
            groups = [np.flatnonzero(labels == k) for k in range(n_clusters)]
        else:
            groups = [np.arange(n)]
        self.blocks = [self._make_block(g, dist, escape, imat, has_inf_term, inf_day, labels,
                                        n_clusters) for g in groups]

    @staticmethod
    def _infectious_centroid_log_distances(coords, imat, labels, n_clusters, static):
        # (days, target k, source k'); a target with no infectious members
        # sits at its static centroid, an empty source exerts nothing
        n_days = imat.shape[0]
        cent = np.full((n_days, n_clusters, 2), np.nan)
        for k in range(n_clusters):
            m = imat & (labels == k)[None, :]
            cnt = m.sum(axis=1)
            ok = cnt > 0
            cent[ok, k] = (m[ok].astype(float) @ coords) / cnt[ok, None]
        target = np.where(np.isnan(cent), static[None, :, :], cent)
        diff = target[:, :, None, :] - cent[:, None, :, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        d[np.isnan(d)] = np.inf
        idx = np.arange(n_clusters)
        d[:, idx, idx] = np.inf
        with np.errstate(divide="ignore"):
            return np.log(d)

    def _make_block(self, members, dist, escape, imat, has_inf_term, inf_day, labels, n_clusters):
        esc_m = escape[:, members]
        rows_mask = esc_m.any(axis=0) | has_inf_term[members]
        rows = members[rows_mask]
        cols = members[imat[:, members].any(axis=0)]
        sub = dist[np.ix_(rows, cols)].copy()
        sub[rows[:, None] == cols[None, :]] = np.inf
        with np.errstate(divide="ignore"):
            log_d = np.log(sub)
        esc_r = escape[:, rows].astype(float)
        esc_counts = esc_r.T @ imat[:, cols].astype(float)
        inf_rows = np.flatnonzero(has_inf_term[rows])
        inf_ids = rows[inf_rows]
        d_idx = inf_day[inf_ids] - self.t0
        inf_pattern = imat[d_idx][:, cols].astype(float)
        inf_spark_idx = d_idx * n_clusters + labels[inf_ids]
        n_days = escape.shape[0]
        esc_spark = np.zeros(n_days * n_clusters)
        if n_days:
            per_cluster = np.stack([esc_r[:, labels[rows] == k].sum(axis=1)
                                    for k in range(n_clusters)], axis=1)
            esc_spark = per_cluster.ravel()
        return _Block(rows, cols, log_d, esc_counts, inf_rows, inf_pattern, inf_spark_idx,
                      esc_spark)

    def spark_matrix(self, params: ModelParams) -> np.ndarray:
        """Spark hazard per (modelled day, cluster), shape (n_days, K)."""
        sp = self.spark
        shape = self.counts.shape
        if sp is Spark.ZERO:
            return np.zeros(shape)
        if sp is Spark.CONSTANT:
            return np.full(shape, float(params.epsilon))
        if sp is Spark.M3:
            w = np.exp(-params.beta_tilde * self.log_dinf)          # (days, K, K)
            return params.alpha * np.einsum("dkl,dl->dk", w, self.counts)
        w = np.exp(-params.beta_tilde * self.log_dcc)
        if sp is Spark.M4:
            c = self.counts
            pressure = np.zeros_like(c)
            pos = c > 0
            pressure[pos] = c[pos] ** params.delta
        else:
            pressure = self.counts
        scale = params.epsilon if sp is Spark.M1 else params.alpha
        return scale * (pressure @ w.T)

    def _kernel_sums(self, block: _Block, beta: float):
        # Only beta enters the power law; Metropolis moves in alpha or the
        # spark parameters reuse the last sums (same arithmetic, same bits).
        if block.cache is not None and block.cache[0] == beta:
            return block.cache[1], block.cache[2]
        kern = np.exp(-beta * block.log_d)
        esc = float(np.sum(kern * block.esc_counts))
        inf = np.einsum("ij,ij->i", kern[block.inf_rows], block.inf_pattern)
        block.cache = (beta, esc, inf)
        return esc, inf

    def _block_terms(self, block: _Block, params: ModelParams, spark_flat: np.ndarray):
        esc_k, inf_k = self._kernel_sums(block, params.beta)
        esc = params.alpha * esc_k
        esc += float(spark_flat @ block.esc_spark)
        rates = params.alpha * inf_k
        rates += spark_flat[block.inf_spark_idx]
        return esc, rates

    def _evaluate(self, params: ModelParams):
        _check_params(params, self.spark)
        spark_flat = self.spark_matrix(params).ravel()
        if self.workers > 1 and len(self.blocks) > 1:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(self.workers)
            parts = list(self._pool.map(lambda b: self._block_terms(b, params, spark_flat),
                                        self.blocks))
        else:
            parts = [self._block_terms(b, params, spark_flat) for b in self.blocks]
        return parts

    def clear_cache(self) -> None:
        for b in self.blocks:
            b.cache = None

    def block_log_likelihoods(self, params: ModelParams) -> list:
        out = []
        with np.errstate(divide="ignore"):
            for b, (esc, rates) in zip(self.blocks, self._evaluate(params)):
                if not np.isfinite(esc) or not np.all(np.isfinite(rates)):
                    self._raise_non_finite(params)
                out.append(-esc + float(np.sum(np.log(-np.expm1(-rates)))))
        return out

    def __call__(self, params: ModelParams) -> float:
        total = 0.0
        for part in self.block_log_likelihoods(params):
            total += part
        return total

    def rate_matrix(self, params: ModelParams) -> np.ndarray:
        """Infection rate for every (modelled day, individual), shape (n_days, N)."""
        _check_params(params, self.spark)
        spark = self.spark_matrix(params)
        rates = spark[:, self.labels].copy()
        for b in self.blocks:
            if b.rows.size == 0 or b.cols.size == 0:
                continue
            kern = np.exp(-params.beta * b.log_d)
            rates[:, b.rows] += params.alpha * (self.imat[:, b.cols].astype(float) @ kern.T)
        return rates

    def pointwise(self, params: ModelParams) -> np.ndarray:
        """Per-exposure log-likelihood terms in a fixed unit order.

        Units are the escape terms (day-major, then id) followed by the
        infection terms in ascending id.
        """
        rates = self.rate_matrix(params)
        esc = -rates[self.escape]
        ids = np.flatnonzero(self.has_inf_term)
        r = rates[self.inf_day[ids] - self.t0, ids]
        with np.errstate(divide="ignore"):
            inf = np.log(-np.expm1(-r))
        return np.concatenate([esc, inf])

    @property
    def n_units(self) -> int:
        return int(self.escape.sum() + self.has_inf_term.sum())

    def _raise_non_finite(self, params):
        with np.errstate(all="ignore"):
            rates = self.rate_matrix(params)
        mask = (self.escape | self._inf_term_mask()) & ~np.isfinite(rates)
        d, i = np.argwhere(mask)[0] if mask.any() else (0, 0)
        raise NumericalError(int(i), int(self.days[d]) if self.days.size else self.t0)

    def _inf_term_mask(self):
        m = np.zeros_like(self.escape)
        ids = np.flatnonzero(self.has_inf_term)
        m[self.inf_day[ids] - self.t0, ids] = True
        return m


def log_likelihood(record: EpidemicRecord, params: ModelParams, frame: str = SIR,
                   spark=Spark.ZERO, clusters: Optional[ClusterAssignment] = None,
                   dist: Optional[np.ndarray] = None, *, pop: Optional[Population] = None,
                   latent_period: Optional[int] = None,
                   infectious_period: Optional[int] = None) -> float:
    """Full-population log-likelihood (kernel sums over every infectious
    individual). Returns ``-inf`` when an observed infection had probability 0."""
    timeline = build_timeline(record, frame, latent_period, infectious_period)
    dist = _resolve_dist(dist, pop)
    return ILMLikelihood(timeline, dist, spark, clusters, composite=False, pop=pop)(params)


def composite_log_likelihood(record: EpidemicRecord, params: ModelParams, frame: str = SIR,
                             spark=Spark.ZERO, clusters: Optional[ClusterAssignment] = None,
                             dist: Optional[np.ndarray] = None, *,
                             pop: Optional[Population] = None,
                             latent_period: Optional[int] = None,
                             infectious_period: Optional[int] = None, workers: int = 1) -> float:
    """Composite log-likelihood: kernel sums within clusters, spark between."""
    if clusters is None:
        raise ValidationError("composite likelihood requires a cluster assignment")
    timeline = build_timeline(record, frame, latent_period, infectious_period)
    dist = _resolve_dist(dist, pop)
    return ILMLikelihood(timeline, dist, spark, clusters, composite=True, pop=pop,
                         workers=workers)(params)


def _resolve_dist(dist, pop):
    if dist is not None:
        return dist
    if pop is None:
        raise ValidationError("need a distance matrix or a population")
    from .core import pairwise_distances
    return pairwise_distances(pop)


def spark_by_cluster(spark, params: ModelParams, infectious: np.ndarray,
                     clusters: Optional[ClusterAssignment],
                     pop: Optional[Population] = None) -> np.ndarray:
    """Spark hazard for each cluster given one day's infectious indicator.

    Returns an array of length K (length 1 without clusters); every
    susceptible in cluster ``k`` feels ``out[k]``.
    """
    spark = Spark.parse(spark)
    _require(params, spark)
    n_clusters = clusters.K if clusters is not None else 1
    if spark is Spark.ZERO:
        return np.zeros(n_clusters)
    if spark is Spark.CONSTANT:
        return np.full(n_clusters, float(params.epsilon))
    if clusters is None:
        raise ValidationError(f"spark {spark.value} requires a cluster assignment")
    g = clusters.membership
    counts = np.bincount(g[infectious], minlength=n_clusters).astype(float)
    if spark is Spark.M3:
        if pop is None:
            raise ValidationError("spark m3 requires the population")
        cent = np.full((n_clusters, 2), np.nan)
        ok = counts > 0
        for k in np.flatnonzero(ok):
            cent[k] = pop.coords[infectious & (g == k)].mean(axis=0)
        target = np.where(np.isnan(cent), clusters.centroids, cent)
        d = np.hypot(target[:, None, 0] - cent[None, :, 0],
                     target[:, None, 1] - cent[None, :, 1])
    else:
        cc = clusters.centroids
        d = np.hypot(cc[:, None, 0] - cc[None, :, 0], cc[:, None, 1] - cc[None, :, 1])
    d[np.isnan(d)] = np.inf
    np.fill_diagonal(d, np.inf)
    w = d ** (-params.beta_tilde)
    if spark is Spark.M4:
        pressure = np.zeros_like(counts)
        pos = counts > 0
        pressure[pos] = counts[pos] ** params.delta
    else:
        pressure = counts
    scale = params.epsilon if spark is Spark.M1 else params.alpha
    return scale * (w @ pressure)


@dataclass(frozen=True)
class ModelSpec:
    """Structure of a transmission model, independent of parameter values."""

    frame: str = SIR
    spark: Spark = Spark.ZERO
    composite: bool = False
    clusters: Optional[ClusterAssignment] = None
    latent_period: Optional[int] = None
    infectious_period: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "spark", Spark.parse(self.spark))
        if (self.composite or self.spark.needs_clusters) and self.clusters is None:
            raise ValidationError(f"model with spark {self.spark.value} "
                                  f"{'(composite) ' if self.composite else ''}needs clusters")

    @property
    def param_names(self) -> tuple:
        return self.spark.params

    @property
    def label(self) -> str:
        if not self.composite:
            return "silm" if self.spark is Spark.ZERO else f"silm+{self.spark.value}"
        return f"cilm-{self.spark.value}"

    def timeline(self, record: EpidemicRecord) -> CompartmentTimeline:
        return build_timeline(record, self.frame, self.latent_period, self.infectious_period)

    def likelihood(self, record: EpidemicRecord, dist: np.ndarray,
                   pop: Optional[Population] = None, workers: int = 1) -> ILMLikelihood:
        return ILMLikelihood(self.timeline(record), dist, self.spark, self.clusters,
                             composite=self.composite, pop=pop, workers=workers)
